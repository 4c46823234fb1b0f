# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors

import numpy as np
import pytest
from scipy.integrate import trapezoid

from nlvib.harmonic.fourier import (
    HarmonicBasis,
    HarmonicSet,
    harmonics_from_time_series,
    time_basis,
    time_series_from_harmonics,
)


def random_set(basis: HarmonicBasis, seed: int = 0) -> HarmonicSet:
    rng = np.random.default_rng(seed)
    return HarmonicSet(basis=basis, coefficients=rng.normal(size=basis.size))


def test_stacked_layout():
    basis = HarmonicBasis(harmonics=(0, 1, 3), num_dof=2)
    assert basis.n_components == 5
    assert basis.size == 10
    assert basis.component(0) == 0
    assert basis.component(1, 's') == 2
    assert basis.component(3, 'c') == 3
    assert basis.block(3, 's') == slice(8, 10)
    assert list(basis.component_harmonics) == [0, 1, 1, 3, 3]


@pytest.mark.parametrize('harmonics', [(), (2, 1), (1, 1), (-1, 1)])
def test_invalid_basis_raises(harmonics):
    with pytest.raises(ValueError, match='armonic'):
        HarmonicBasis(harmonics=harmonics, num_dof=1)


def test_missing_harmonic_raises():
    basis = HarmonicBasis(harmonics=(1, 3), num_dof=1)
    with pytest.raises(ValueError, match='not in the basis'):
        basis.component(2)


def test_wrong_coefficient_count_raises():
    basis = HarmonicBasis(harmonics=(0, 1), num_dof=2)
    with pytest.raises(ValueError, match='Expected 6 coefficients'):
        HarmonicSet(basis=basis, coefficients=np.zeros(5))


@pytest.mark.parametrize('n_time', [15, 8])
def test_validate_samples_rejects_aliasing_or_odd_counts(n_time):
    basis = HarmonicBasis(harmonics=(0, 1, 3), num_dof=1)
    with pytest.raises(ValueError, match='time samples'):
        basis.validate_samples(n_time)


@pytest.mark.parametrize('harmonics', [(0, 1), (1, 3, 5), (0, 1, 2, 3, 7)])
def test_round_trip_recovers_coefficients(harmonics):
    basis = HarmonicBasis(harmonics=harmonics, num_dof=3)
    X = random_set(basis)
    series = time_series_from_harmonics(X, 1.3, 64)
    recovered = harmonics_from_time_series(series, basis)
    np.testing.assert_allclose(recovered.coefficients, X.coefficients, atol=1e-12)


def test_cosine_series_has_unit_first_cosine_only():
    basis = HarmonicBasis(harmonics=(0, 1, 2, 3), num_dof=1)
    theta = 2 * np.pi * np.arange(32) / 32
    X = harmonics_from_time_series(np.cos(theta), basis)
    expected = np.zeros(basis.size)
    expected[basis.component(1, 'c')] = 1.0
    np.testing.assert_allclose(X.coefficients, expected, atol=1e-12)


def test_clipped_sine_matches_quadrature():
    basis = HarmonicBasis(harmonics=(0, 1, 2, 3, 4, 5), num_dof=1)
    n_time = 4096
    theta = 2 * np.pi * np.arange(n_time) / n_time
    series = np.clip(np.sin(theta), -0.5, 0.5)
    X = harmonics_from_time_series(series, basis)
    fine = np.linspace(0.0, 2 * np.pi, 200001)
    clipped = np.clip(np.sin(fine), -0.5, 0.5)
    for n in (1, 3, 5):
        quadrature = trapezoid(clipped * np.sin(n * fine), fine) / np.pi
        assert X.sine(n)[0] == pytest.approx(quadrature, abs=1e-6)
    for n in (2, 4):
        assert X.amplitude(n)[0] == pytest.approx(0.0, abs=1e-12)


def test_parseval():
    basis = HarmonicBasis(harmonics=(0, 1, 2, 5), num_dof=2)
    X = random_set(basis, seed=3)
    series = time_series_from_harmonics(X, 1.0, 64)
    power = X.static**2 + 0.5 * sum(X.amplitude(n) ** 2 for n in (1, 2, 5))
    np.testing.assert_allclose(np.mean(series**2, axis=0), power, rtol=1e-10)


@pytest.mark.parametrize('derivative', [0, 1, 2])
def test_time_series_matches_time_basis(derivative):
    basis = HarmonicBasis(harmonics=(0, 1, 3), num_dof=2)
    X = random_set(basis, seed=1)
    omega = 2.5
    series = time_series_from_harmonics(X, omega, 32, derivative=derivative)
    expected = time_basis(basis, 32, omega, derivative) @ X.as_matrix()
    np.testing.assert_allclose(series, expected, atol=1e-12)


def test_derivative_of_sine():
    basis = HarmonicBasis(harmonics=(1,), num_dof=1)
    X = HarmonicSet(basis=basis, coefficients=np.array([0.0, 1.0]))
    omega = 3.0
    theta = 2 * np.pi * np.arange(16) / 16
    velocity = time_series_from_harmonics(X, omega, 16, derivative=1)[:, 0]
    np.testing.assert_allclose(velocity, omega * np.cos(theta), atol=1e-12)


def test_rotation_preserves_amplitudes_and_static():
    basis = HarmonicBasis(harmonics=(0, 1, 2, 3), num_dof=3)
    X = random_set(basis, seed=2)
    rotated = X.rotated(0.7)
    np.testing.assert_array_equal(rotated.static, X.static)
    for n in (1, 2, 3):
        np.testing.assert_allclose(rotated.amplitude(n), X.amplitude(n), rtol=1e-12)
        np.testing.assert_allclose(
            rotated.complex_amplitude(n),
            X.complex_amplitude(n) * np.exp(-1j * n * 0.7),
            atol=1e-12,
        )


def test_rotation_delays_the_motion():
    basis = HarmonicBasis(harmonics=(1, 2), num_dof=1)
    X = random_set(basis, seed=4)
    n_time = 16
    shift = 3
    phi = 2 * np.pi * shift / n_time
    original = time_series_from_harmonics(X, 1.0, n_time)
    delayed = time_series_from_harmonics(X.rotated(phi), 1.0, n_time)
    np.testing.assert_allclose(delayed, np.roll(original, shift, axis=0), atol=1e-12)


def test_select_and_truncate():
    basis = HarmonicBasis(harmonics=(0, 1, 3), num_dof=1)
    X = HarmonicSet(basis=basis, coefficients=np.arange(1.0, 6.0))
    np.testing.assert_array_equal(X.select({3}).coefficients, [0, 0, 0, 4, 5])
    np.testing.assert_array_equal(X.truncated(3).coefficients, [1, 2, 3, 0, 0])
