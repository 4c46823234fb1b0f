# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors

import numpy as np
import pytest

from nlvib.harmonic.fourier import (
    HarmonicBasis,
    HarmonicSet,
    harmonics_from_time_series,
    time_series_from_harmonics,
)
from nlvib.harmonic.nlforces import (
    ElementSlot,
    LinearSpring,
    aft_force,
    build_iwan,
    init_history,
    iwan_phi_max,
    local_force_step,
)


def iwan():
    return build_iwan(k_t=0.6, F_s=10.0, chi=-0.5, beta=0.0, n_sliders=100)


def iwan_slot() -> ElementSlot:
    return ElementSlot(
        element=iwan(),
        q_row=np.array([0.0, 1.0, -1.0]),
        t_col=np.array([0.0, 1.0, -1.0]),
        label='iwan',
    )


def random_motion(basis: HarmonicBasis, scale: float, seed: int) -> HarmonicSet:
    rng = np.random.default_rng(seed)
    return HarmonicSet(basis=basis, coefficients=scale * rng.normal(size=basis.size))


def marched_forces(
    slot: ElementSlot, X: HarmonicSet, n_time: int, x_static: float, cycles: int
) -> HarmonicSet:
    """Force harmonics from stepping the element through many cycles."""
    u = time_series_from_harmonics(X, 1.0, n_time) @ slot.q_row
    element = init_history(slot.element, x_static)
    force = np.empty(n_time)
    for _ in range(cycles):
        for j in range(n_time):
            force[j] = local_force_step(element, u[j])
    return harmonics_from_time_series(np.outer(force, slot.t_col), X.basis)


def test_iwan_stuck_stiffness_is_k_t():
    element = iwan()
    assert element.stuck_stiffness == pytest.approx(0.6, rel=1e-12)
    assert element.breakpoints.size == 100
    assert element.breakpoints.max() < element.phi_max


@pytest.mark.parametrize('chi', [-0.9, -0.8, -0.7, -0.5, 0.0, 0.5])
@pytest.mark.parametrize('beta', [0.0, 0.4])
def test_iwan_saturation_force_is_F_s(chi, beta):
    element = build_iwan(k_t=0.6, F_s=10.0, chi=chi, beta=beta, n_sliders=20)
    assert element.saturation_force == pytest.approx(10.0, rel=1e-10)
    assert element.stuck_stiffness == pytest.approx(0.6, rel=1e-10)


def test_march_without_slip_is_linear_in_the_stuck_stiffness():
    element = iwan()
    u = 1e-9 * np.sin(2 * np.pi * np.arange(16) / 16)
    response = element.march(u)
    assert response.settled
    assert response.tangent.dtype == np.float64
    np.testing.assert_allclose(
        response.tangent, element.stuck_stiffness * np.eye(16), rtol=1e-12
    )
    np.testing.assert_allclose(
        response.force, element.stuck_stiffness * u, rtol=1e-10, atol=1e-24
    )


def test_march_skips_the_tangent_on_request():
    u = 0.3 * np.cos(2 * np.pi * np.arange(32) / 32)
    full = iwan().march(u)
    bare = iwan().march(u, tangent=False)
    assert bare.tangent is None
    np.testing.assert_array_equal(bare.force, full.force)
    assert LinearSpring(2.0).march(u, tangent=False).tangent is None


def test_iwan_lumped_slider_for_positive_beta():
    element = build_iwan(k_t=1.0, F_s=2.0, chi=-0.3, beta=0.5, n_sliders=40)
    assert element.breakpoints.size == 41
    assert element.breakpoints[-1] == pytest.approx(
        iwan_phi_max(1.0, 2.0, -0.3, 0.5), rel=1e-14
    )
    assert element.stuck_stiffness == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize(
    ('k_t', 'F_s', 'chi', 'beta', 'n_sliders'),
    [
        (0.0, 1.0, -0.5, 0.0, 10),
        (1.0, -1.0, -0.5, 0.0, 10),
        (1.0, 1.0, -1.0, 0.0, 10),
        (1.0, 1.0, -0.5, -0.1, 10),
        (1.0, 1.0, -0.5, 0.0, 0),
    ],
)
def test_build_iwan_rejects_invalid_parameters(k_t, F_s, chi, beta, n_sliders):
    with pytest.raises(ValueError, match='must'):
        build_iwan(k_t, F_s, chi, beta, n_sliders)


def test_step_without_history_raises():
    with pytest.raises(ValueError, match='history'):
        iwan().step(1.0)


def test_virgin_force_saturates():
    element = iwan()
    force, tangent = element.virgin_force(1e3)
    assert force == pytest.approx(element.saturation_force, rel=1e-14)
    assert tangent == 0.0
    force, tangent = element.virgin_force(1e-4)
    assert force == pytest.approx(0.6e-4, rel=1e-12)
    assert tangent == pytest.approx(0.6, rel=1e-12)


@pytest.mark.parametrize('x_static', [0.0, 2.5])
@pytest.mark.parametrize('scale', [0.5, 5.0, 50.0])
def test_aft_matches_long_time_march(scale, x_static):
    basis = HarmonicBasis(harmonics=(0, 1, 2, 3, 5), num_dof=3)
    X = random_motion(basis, scale, seed=11)
    slot = iwan_slot()
    result = aft_force([slot], X, 1.0, n_time=256, x_static_local=[x_static])
    oracle = marched_forces(slot, X, 256, x_static, cycles=6)
    norm = max(np.linalg.norm(oracle.coefficients), 1e-300)
    error = np.linalg.norm(result.forces.coefficients - oracle.coefficients)
    assert error / norm < 1e-6
    assert result.settled


def test_aft_of_stuck_element_is_linear():
    basis = HarmonicBasis(harmonics=(0, 1, 3), num_dof=3)
    X = random_motion(basis, 1e-4, seed=5)
    slot = iwan_slot()
    result = aft_force([slot], X, 1.0, n_time=64)
    K = slot.stiffness_matrix
    expected = (X.as_matrix() @ K.T).ravel()
    np.testing.assert_allclose(
        result.forces.coefficients, expected, rtol=1e-9, atol=1e-16
    )


def test_linear_spring_jacobian_is_block_diagonal():
    basis = HarmonicBasis(harmonics=(0, 1, 2), num_dof=2)
    slot = ElementSlot(
        element=LinearSpring(3.0), q_row=np.array([1.0, -1.0]), t_col=[1.0, -1.0]
    )
    X = random_motion(basis, 1.0, seed=2)
    result = aft_force([slot], X, 2.0, n_time=32)
    expected = np.kron(np.eye(basis.n_components), slot.stiffness_matrix)
    np.testing.assert_allclose(result.jacobian, expected, atol=1e-12)


@pytest.mark.parametrize('seed', range(5))
def test_aft_jacobian_matches_central_differences(seed):
    basis = HarmonicBasis(harmonics=(0, 1, 2, 3), num_dof=3)
    X = random_motion(basis, 8.0, seed=seed)
    slots = [iwan_slot()]
    result = aft_force(slots, X, 1.0, n_time=128, x_static_local=[0.3])
    h = 1e-7
    numeric = np.empty_like(result.jacobian)
    for i in range(basis.size):
        step = np.zeros(basis.size)
        step[i] = h
        plus = aft_force(
            slots, X.with_coefficients(X.coefficients + step), 1.0, 128, [0.3]
        )
        minus = aft_force(
            slots, X.with_coefficients(X.coefficients - step), 1.0, 128, [0.3]
        )
        numeric[:, i] = (plus.forces.coefficients - minus.forces.coefficients) / (2 * h)
    error = np.linalg.norm(result.jacobian - numeric)
    assert error / np.linalg.norm(result.jacobian) < 1e-5


def test_slot_length_mismatch_raises():
    with pytest.raises(ValueError, match='same length'):
        ElementSlot(element=iwan(), q_row=[1.0, -1.0], t_col=[1.0, -1.0, 0.0])


def test_slot_on_wrong_number_of_dofs_raises():
    basis = HarmonicBasis(harmonics=(0, 1), num_dof=2)
    with pytest.raises(ValueError, match='acts on 3 DOFs'):
        aft_force([iwan_slot()], HarmonicSet.zeros(basis), 1.0, n_time=16)
