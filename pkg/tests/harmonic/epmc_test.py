# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors

import numpy as np
import pytest

from nlvib.harmonic.epmc import (
    Backbone,
    EpmcPoint,
    check_stuck_regime,
    damping_factor,
    epmc_backbone,
    point_residual_norm,
    upsample_backbone,
)
from nlvib.harmonic.fourier import HarmonicBasis, HarmonicSet
from nlvib.harmonic.hbm import SystemModel
from nlvib.harmonic.nlforces import ElementSlot, build_iwan
from nlvib.harmonic.solvers import ContinuationOptions, SolverOptions


def two_dof(slots=()) -> SystemModel:
    K = np.array([[2.0, -1.0], [-1.0, 2.0]])
    return SystemModel(
        M=np.eye(2),
        C=0.02 * np.eye(2) + 0.01 * K,
        K=K,
        F_ext=[1.0, 0.0],
        slots=tuple(slots),
    )


def linear_backbone(q=(0.1, 1.0, 10.0)) -> Backbone:
    basis = HarmonicBasis(harmonics=(0, 1), num_dof=1)
    points = [
        EpmcPoint(q=v, omega=2.0, xi=0.2, X=HarmonicSet(basis, np.array([0, 0, v])))
        for v in q
    ]
    return Backbone(basis=basis, mode=1, phase_dof=0, points=points)


def test_damping_factor():
    assert damping_factor(0.2, 2.0) == pytest.approx(0.05)
    with pytest.raises(ValueError, match='positive'):
        damping_factor(0.1, 0.0)


@pytest.mark.parametrize(
    ('mode', 'omega', 'xi'), [(1, 1.0, 0.03), (2, np.sqrt(3.0), 0.05)]
)
def test_linear_model_gives_its_modes(mode, omega, xi):
    model = two_dof()
    basis = HarmonicBasis(harmonics=(0, 1, 2), num_dof=2)
    backbone = epmc_backbone(
        model,
        mode,
        (1e-2, 1.0),
        basis,
        sopts=SolverOptions(abs_tol=1e-12),
    )
    assert not backbone.truncated
    assert len(backbone) > 1
    assert backbone.q[0] == pytest.approx(1e-2)
    assert np.all(np.diff(backbone.q) > 0)
    np.testing.assert_allclose(backbone.omega, omega, rtol=1e-9)
    np.testing.assert_allclose(backbone.xi, xi, rtol=1e-8)
    np.testing.assert_allclose(backbone.zeta, xi / (2 * omega), rtol=1e-8)
    for point in backbone.points:
        assert point.X.cosine(1)[backbone.phase_dof] == pytest.approx(0.0, abs=1e-12)
        X1c, X1s = point.X.cosine(1), point.X.sine(1)
        assert X1c @ model.M @ X1c + X1s @ model.M @ X1s == pytest.approx(point.q**2)
        np.testing.assert_allclose(point.X.amplitude(2), 0.0, atol=1e-12)


def test_iwan_model_softens_and_dissipates():
    slot = ElementSlot(
        element=build_iwan(k_t=0.5, F_s=0.2, chi=-0.5, beta=0.0, n_sliders=40),
        q_row=[1.0, -1.0],
        t_col=[1.0, -1.0],
    )
    model = two_dof([slot])
    basis = HarmonicBasis(harmonics=(0, 1, 2, 3), num_dof=2)
    backbone = epmc_backbone(
        model,
        2,
        (1e-4, 0.5),
        basis,
        n_time=64,
        copts=ContinuationOptions(max_step=0.2),
    )
    assert backbone.omega[-1] < backbone.omega[0]
    assert backbone.xi[-1] > backbone.xi[0]
    for point in backbone.points[:: max(1, len(backbone) // 5)]:
        assert point_residual_norm(point, model, backbone.phase_dof, 64) < 1e-7


def test_backbone_rejects_invalid_input():
    basis = HarmonicBasis(harmonics=(0, 1), num_dof=2)
    with pytest.raises(ValueError, match='range'):
        epmc_backbone(two_dof(), 1, (1.0, 0.1), basis)
    with pytest.raises(ValueError, match='does not exist'):
        epmc_backbone(two_dof(), 3, (0.1, 1.0), basis)
    with pytest.raises(ValueError, match='harmonics 0 and 1'):
        epmc_backbone(
            two_dof(), 1, (0.1, 1.0), HarmonicBasis(harmonics=(1, 3), num_dof=2)
        )


def test_stuck_regime_check():
    slot = ElementSlot(
        element=build_iwan(k_t=0.5, F_s=0.2, chi=-0.5, beta=0.0, n_sliders=40),
        q_row=[1.0, -1.0],
        t_col=[1.0, -1.0],
    )
    model = two_dof([slot])
    shape = np.array([1.0, -1.0]) / np.sqrt(2.0)
    assert check_stuck_regime(model, shape, 1e-8)
    assert not check_stuck_regime(model, shape, 1.0)


def test_interpolation_between_points():
    backbone = linear_backbone()
    point = backbone.at(0.55)
    assert point.q == 0.55
    assert point.X.sine(1)[0] == pytest.approx(0.55)
    assert point.shape[0] == pytest.approx(-1j)
    assert backbone.at(1.0) is backbone.points[1]
    with pytest.raises(ValueError, match='outside the sampled range'):
        backbone.at(20.0)


def test_upsampling_keeps_end_points():
    backbone = linear_backbone()
    dense = upsample_backbone(backbone, 4)
    assert len(dense) == 9
    assert dense.q[0] == backbone.q[0]
    assert dense.q[-1] == backbone.q[-1]
    np.testing.assert_allclose(dense.amplitude(1, 0), dense.q)
    assert upsample_backbone(backbone, 1) is backbone
    with pytest.raises(ValueError, match='at least 1'):
        upsample_backbone(backbone, 0)
