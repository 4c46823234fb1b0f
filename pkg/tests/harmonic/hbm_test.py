# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors

import numpy as np
import pytest

from nlvib.harmonic import hbm
from nlvib.harmonic.fourier import HarmonicBasis, HarmonicSet
from nlvib.harmonic.hbm import (
    ControlMode,
    ControlSpec,
    ForcingState,
    SystemModel,
    amplitude_init_branch,
    frc,
    harmonic_phase_difference,
    hbm_residual,
    linear_frf,
    linear_modes,
    peak_displacement,
    prestress_solve,
)
from nlvib.harmonic.nlforces import ElementSlot, LinearSpring, build_iwan
from nlvib.harmonic.solvers import ConvergenceError, SolverOptions


def oscillator(c: float = 0.1) -> SystemModel:
    return SystemModel(M=[[1.0]], C=[[c]], K=[[1.0]], F_ext=[1.0])


def chain(slots=()) -> SystemModel:
    K = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    return SystemModel(
        M=np.diag([1.0, 2.0, 1.0]),
        C=0.02 * K,
        K=K,
        F_ext=[1.0, 0.0, 0.0],
        F_ext0=[0.0, 0.5, -0.2],
        slots=tuple(slots),
    )


def iwan_slot(**kwargs) -> ElementSlot:
    return ElementSlot(
        element=build_iwan(k_t=0.6, F_s=2.0, chi=-0.5, beta=0.1, n_sliders=60),
        q_row=[0.0, 1.0, -1.0],
        t_col=[0.0, 1.0, -1.0],
        label='joint',
        **kwargs,
    )


def dynamic_stiffness(omega: float, c: float = 0.1) -> complex:
    return 1.0 - omega**2 + 1j * omega * c


def test_model_rejects_asymmetric_stiffness():
    with pytest.raises(ValueError, match='K must be symmetric'):
        SystemModel(M=np.eye(2), C=np.zeros((2, 2)), K=[[1, 2], [0, 1]], F_ext=[1, 0])


def test_model_rejects_indefinite_mass():
    with pytest.raises(ValueError, match='positive definite'):
        SystemModel(M=np.diag([1, -1]), C=np.zeros((2, 2)), K=np.eye(2), F_ext=[1, 0])


def test_model_rejects_wrong_force_length():
    with pytest.raises(ValueError, match='Force vectors'):
        SystemModel(M=np.eye(2), C=np.zeros((2, 2)), K=np.eye(2), F_ext=[1, 0, 0])


def test_default_labels():
    assert chain().labels == ('x1', 'x2', 'x3')


def test_element_stiffness_states():
    model = chain([iwan_slot(), ElementSlot(LinearSpring(2.0), [1, 0, 0], [1, 0, 0])])
    iwan = np.outer([0, 1, -1], [0, 1, -1]) * 0.6
    spring = np.zeros((3, 3))
    spring[0, 0] = 2.0
    np.testing.assert_allclose(model.element_stiffness('stuck'), iwan + spring)
    np.testing.assert_allclose(model.element_stiffness('half'), 0.5 * iwan + spring)
    np.testing.assert_allclose(model.element_stiffness('free'), spring)
    with pytest.raises(ValueError, match='Unknown stiffness state'):
        model.element_stiffness('sliding')


def test_linear_frf_satisfies_harmonic_balance():
    model = chain()
    basis = HarmonicBasis(harmonics=(1,), num_dof=3)
    omega = 0.8
    H = linear_frf(model, omega)
    X = HarmonicSet(basis=basis, coefficients=np.concatenate([H.real, -H.imag]))
    res = hbm_residual(X, omega, ForcingState(f_mag_c=1.0), model)
    np.testing.assert_allclose(res.residual, 0.0, atol=1e-12)


def test_linear_frf_of_oscillator():
    for omega in (0.3, 1.0, 2.0):
        H = linear_frf(oscillator(), omega)
        assert H[0] == pytest.approx(1.0 / dynamic_stiffness(omega), rel=1e-12)


def test_linear_frf_raises_at_undamped_resonance():
    with pytest.raises(ValueError, match='singular'):
        linear_frf(oscillator(c=0.0), 1.0)


def test_linear_modes_are_mass_normalized():
    model = chain([iwan_slot()])
    omegas, shapes = linear_modes(model, 'half')
    np.testing.assert_allclose(shapes.T @ model.M @ shapes, np.eye(3), atol=1e-12)
    K = model.linearized_stiffness('half')
    np.testing.assert_allclose(
        shapes.T @ K @ shapes, np.diag(omegas**2), atol=1e-12
    )
    largest = shapes[np.argmax(np.abs(shapes), axis=0), np.arange(3)]
    assert np.all(largest > 0)
    assert np.all(np.diff(omegas) > 0)


def test_prestress_of_linear_spring_model():
    spring = ElementSlot(LinearSpring(3.0), q_row=[1.0, -1.0, 0.0], t_col=[1, -1, 0])
    model = chain([spring])
    expected = np.linalg.solve(model.K + spring.stiffness_matrix, model.F_ext0)
    np.testing.assert_allclose(prestress_solve(model), expected, rtol=1e-10)


def test_prestress_ignores_tangential_slots():
    model = chain([iwan_slot(tangential=True)])
    expected = np.linalg.solve(model.K, model.F_ext0)
    np.testing.assert_allclose(prestress_solve(model), expected, rtol=1e-10)


def test_prestress_loads_normal_iwan_slot():
    model = chain([iwan_slot()])
    x = prestress_solve(model, SolverOptions(abs_tol=1e-12))
    force, _ = model.slots[0].element.virgin_force(model.slots[0].q_row @ x)
    residual = model.K @ x + force * model.slots[0].t_col - model.F_ext0
    np.testing.assert_allclose(residual, 0.0, atol=1e-10)


@pytest.mark.parametrize(
    ('kwargs', 'match'),
    [
        ({'mode': ControlMode.AMPLITUDE, 'A_1': 1.0}, 'requires R_1'),
        ({'mode': ControlMode.AMPLITUDE, 'R_1': [1.0], 'A_1': 0.0}, 'positive'),
        ({'k': 3}, 'Derivative order'),
    ],
)
def test_control_spec_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        ControlSpec(**kwargs)


def test_control_spec_rows():
    assert ControlSpec().n_rows == 0
    assert ControlSpec.amplitude([1.0, 0.0, 0.0], 0.1).n_rows == 1
    assert ControlSpec.amplitude_phase([1.0, 0.0, 0.0], 0.1).n_rows == 2
    assert ControlSpec.amplitude([1.0], 0.1, k=2).with_amplitude(0.3).k == 2


def test_amplitude_control_rows():
    basis = HarmonicBasis(harmonics=(0, 1, 3), num_dof=3)
    rng = np.random.default_rng(3)
    X = HarmonicSet(basis=basis, coefficients=rng.normal(size=basis.size))
    R = np.array([1.0, 0.5, 0.0])
    a, b = R @ X.cosine(1), R @ X.sine(1)
    omega = 1.7

    control = ControlSpec.amplitude(R, 0.4, k=1)
    res = hbm_residual(X, omega, ForcingState(0.2), chain(), control)
    assert res.residual.size == basis.size + 1
    assert res.residual[-1] == pytest.approx(omega**2 * (a**2 + b**2) - 0.16)
    assert control.extracted_amplitude(X, omega) == pytest.approx(
        omega * np.hypot(a, b)
    )

    control = ControlSpec.amplitude_phase(R, 0.4, k=2)
    res = hbm_residual(X, omega, ForcingState(0.2, 0.1), chain(), control)
    np.testing.assert_allclose(
        res.residual[-2:], [omega**2 * a - 0.4, omega**2 * b], rtol=1e-12
    )
    np.testing.assert_array_equal(res.d_A_1[-2:], [-1.0, 0.0])


def test_control_requires_first_harmonic():
    basis = HarmonicBasis(harmonics=(0, 3), num_dof=3)
    with pytest.raises(ValueError, match='requires harmonic 1'):
        hbm_residual(
            HarmonicSet.zeros(basis),
            1.0,
            ForcingState(),
            chain(),
            ControlSpec.amplitude([1.0, 0.0, 0.0], 1.0),
        )


@pytest.mark.parametrize(
    'control',
    [ControlSpec(), ControlSpec.amplitude([1.0, 0.0, 0.0], 2.0, k=1)],
    ids=['constant_force', 'amplitude'],
)
def test_residual_derivatives_match_central_differences(control):
    model = chain([iwan_slot()])
    basis = HarmonicBasis(harmonics=(0, 1, 2, 3), num_dof=3)
    rng = np.random.default_rng(7)
    X = HarmonicSet(basis=basis, coefficients=3.0 * rng.normal(size=basis.size))
    omega = 1.3
    forcing = ForcingState(0.7, -0.2)
    x_static = np.array([0.0, 0.4, 0.1])

    def residual(coefficients, omega=omega):
        return hbm_residual(
            X.with_coefficients(coefficients),
            omega,
            forcing,
            model,
            control,
            128,
            x_static,
        ).residual

    res = hbm_residual(X, omega, forcing, model, control, 128, x_static)
    h = 1e-7
    numeric = np.empty_like(res.d_X)
    for i in range(basis.size):
        step = np.zeros(basis.size)
        step[i] = h
        numeric[:, i] = (
            residual(X.coefficients + step) - residual(X.coefficients - step)
        ) / (2 * h)
    error = np.linalg.norm(res.d_X - numeric) / np.linalg.norm(res.d_X)
    assert error < 1e-5
    d_omega = (
        residual(X.coefficients, omega + 1e-6) - residual(X.coefficients, omega - 1e-6)
    ) / 2e-6
    np.testing.assert_allclose(res.d_omega, d_omega, atol=1e-6)


def test_constant_force_curve_of_oscillator_matches_frf():
    basis = HarmonicBasis(harmonics=(0, 1), num_dof=1)
    branch = frc(
        oscillator(),
        ControlSpec(),
        (0.5, 1.5),
        basis,
        forcing=ForcingState(f_mag_c=1.0),
        sopts=SolverOptions(abs_tol=1e-12),
    )
    assert not branch.truncated
    assert len(branch) > 5
    assert branch.omega[0] == 0.5
    assert np.all(np.diff(branch.omega) > 0)
    for point in branch.points:
        expected = 1.0 / dynamic_stiffness(point.omega)
        assert point.X.complex_amplitude(1)[0] == pytest.approx(expected, rel=1e-9)
        assert np.isnan(point.control_amplitude)
    np.testing.assert_array_equal(branch.f_mag, 1.0)


def test_amplitude_controlled_curve_of_oscillator():
    basis = HarmonicBasis(harmonics=(1,), num_dof=1)
    control = ControlSpec.amplitude([1.0], 0.2)
    branch = frc(
        oscillator(),
        control,
        (0.5, 1.5),
        basis,
        sopts=SolverOptions(abs_tol=1e-12),
    )
    assert not branch.truncated
    np.testing.assert_allclose(branch.amplitude(1, 0), 0.2, rtol=1e-9)
    expected = 0.2 * np.abs(dynamic_stiffness(branch.omega))
    np.testing.assert_allclose(branch.f_mag, expected, rtol=1e-9)
    np.testing.assert_array_equal(branch.f_mag_s, 0.0)


def test_amplitude_continuation_ends_at_the_upper_amplitude():
    basis = HarmonicBasis(harmonics=(1,), num_dof=1)
    branch = amplitude_init_branch(
        oscillator(),
        ControlSpec.amplitude([1.0], 0.2),
        0.9,
        (0.01, 0.3),
        basis,
        sopts=SolverOptions(abs_tol=1e-12),
    )
    amplitudes = np.array([p.control_amplitude for p in branch.points])
    assert not branch.truncated
    assert amplitudes[0] == 0.01
    assert amplitudes[-1] == 0.3
    assert np.all(np.diff(amplitudes) > 0)
    np.testing.assert_allclose(branch.amplitude(1, 0), amplitudes, rtol=1e-9)
    np.testing.assert_allclose(
        branch.f_mag, amplitudes * abs(dynamic_stiffness(0.9)), rtol=1e-9
    )


def test_failed_linear_start_is_seeded_by_amplitude_continuation(monkeypatch):
    starts = []
    converge = hbm.solve_point

    def fail_first(*args, **kwargs):
        starts.append(args[1])
        if len(starts) == 1:
            raise ConvergenceError("No convergence from the linear guess")
        return converge(*args, **kwargs)

    monkeypatch.setattr(hbm, 'solve_point', fail_first)
    basis = HarmonicBasis(harmonics=(1,), num_dof=1)
    branch = frc(
        oscillator(),
        ControlSpec.amplitude([1.0], 0.2),
        (0.5, 1.5),
        basis,
        sopts=SolverOptions(abs_tol=1e-12),
    )
    assert starts == [0.5, 0.5]
    assert not branch.truncated
    assert branch.omega[0] == 0.5
    assert branch.omega[-1] == 1.5
    np.testing.assert_allclose(branch.amplitude(1, 0), 0.2, rtol=1e-9)


def test_constant_force_curve_requires_forcing():
    basis = HarmonicBasis(harmonics=(1,), num_dof=1)
    with pytest.raises(ValueError, match='requires a forcing state'):
        frc(oscillator(), ControlSpec(), (0.5, 1.5), basis)


def test_peak_displacement():
    basis = HarmonicBasis(harmonics=(0, 1), num_dof=1)
    X = HarmonicSet(basis=basis, coefficients=np.array([0.5, 1.0, 0.0]))
    assert peak_displacement(X, 0, n_time=64) == pytest.approx(1.5, rel=1e-12)


def test_phase_difference_is_invariant_under_rotation():
    basis = HarmonicBasis(harmonics=(1, 3), num_dof=2)
    rng = np.random.default_rng(1)
    X = HarmonicSet(basis=basis, coefficients=rng.normal(size=basis.size))
    difference = harmonic_phase_difference(X, 1, 3)
    assert -np.pi < difference <= np.pi
    assert harmonic_phase_difference(X.rotated(0.9), 1, 3) == pytest.approx(
        difference, abs=1e-12
    )
