# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Nonlinear modes by the extended periodic motion concept.

Negative mass-proportional damping ``-xi M`` excites a periodic modal motion
of the otherwise autonomous system. The backbone is continued in the mass
normalized modal amplitude ``q`` and yields the amplitude dependent frequency
and damping.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from loguru import logger

from .fourier import HarmonicBasis, HarmonicSet
from .hbm import (
    ForcingState,
    StiffnessState,
    SystemModel,
    harmonic_stiffness,
    hbm_residual,
    linear_modes,
    prestress_solve,
)
from .nlforces import IwanElement
from .solvers import (
    ContinuationOptions,
    ConvergenceError,
    SolverOptions,
    continue_branch,
    solve,
)
from .utils import interval_index


def damping_factor(xi: float | np.ndarray, omega: float | np.ndarray) -> np.ndarray:
    """Fraction of critical damping ``xi / (2 omega)``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError(f"Modal frequency must be positive, got {omega}")
    return np.asarray(xi, dtype=float) / (2 * omega)


@dataclass(frozen=True, eq=False)
class EpmcPoint:
    q: float
    omega: float
    xi: float
    X: HarmonicSet

    @property
    def zeta(self) -> float:
        return float(damping_factor(self.xi, self.omega))

    @property
    def static(self) -> np.ndarray:
        return self.X.static

    @property
    def shape(self) -> np.ndarray:
        """Complex first harmonic mode shape ``(X_1c - i X_1s) / q``."""
        return self.X.complex_amplitude(1) / self.q


@dataclass
class Backbone:
    """Nonlinear mode points ordered by increasing modal amplitude."""

    basis: HarmonicBasis
    mode: int
    phase_dof: int
    points: list[EpmcPoint] = field(default_factory=list)
    truncated: bool = False
    message: str = ''
    elapsed: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    @property
    def q(self) -> np.ndarray:
        return np.array([p.q for p in self.points])

    @property
    def omega(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    @property
    def xi(self) -> np.ndarray:
        return np.array([p.xi for p in self.points])

    @property
    def zeta(self) -> np.ndarray:
        return damping_factor(self.xi, self.omega)

    def amplitude(self, n: int, dof: int) -> np.ndarray:
        return np.array([p.X.amplitude(n)[dof] for p in self.points])

    def at(self, q: float) -> EpmcPoint:
        """Point at modal amplitude ``q``, linear in ``q`` between samples."""
        i, w = interval_index(self.q, q, name='Modal amplitude q')
        left = self.points[i]
        if w == 0.0:
            return left
        right = self.points[i + 1]
        return EpmcPoint(
            q=q,
            omega=(1 - w) * left.omega + w * right.omega,
            xi=(1 - w) * left.xi + w * right.xi,
            X=left.X.with_coefficients(
                (1 - w) * left.X.coefficients + w * right.X.coefficients
            ),
        )

    def with_points(self, points: list[EpmcPoint]) -> Backbone:
        return Backbone(
            basis=self.basis,
            mode=self.mode,
            phase_dof=self.phase_dof,
            points=points,
            truncated=self.truncated,
            message=self.message,
            elapsed=self.elapsed,
        )


class EpmcResidual(NamedTuple):
    residual: np.ndarray
    d_X: np.ndarray
    d_omega: np.ndarray
    d_xi: np.ndarray
    d_q: np.ndarray


def epmc_residual(
    X: HarmonicSet,
    omega: float,
    xi: float,
    q: float,
    model: SystemModel,
    R: np.ndarray,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
    with_jacobian: bool = True,
) -> EpmcResidual:
    """Residual of a nonlinear mode at modal amplitude ``q``.

    The harmonic balance rows use the damping ``C - xi M`` and no harmonic
    force. A phase row ``R X_1c = 0`` and the amplitude row
    ``X_1c^T M X_1c + X_1s^T M X_1s = q^2`` close the system for the unknowns
    ``(X, omega, xi)``. Without ``with_jacobian`` the derivatives lack the
    nonlinear forces.
    """
    basis = X.basis
    if 1 not in basis.harmonics:
        raise ValueError(
            f"Nonlinear modes require harmonic 1 in the basis, got {basis.harmonics}"
        )
    damping = model.C - xi * model.M
    hbm = hbm_residual(
        X,
        omega,
        ForcingState(),
        model,
        n_time=n_time,
        x_static=x_static,
        damping=damping,
        with_jacobian=with_jacobian,
    )
    zeros = np.zeros_like(model.M)
    Z_xi, _ = harmonic_stiffness(basis, omega, zeros, -model.M, zeros)
    c, s = basis.block(1, 'c'), basis.block(1, 's')
    X1c, X1s = X.cosine(1), X.sine(1)
    phase_row = np.zeros(basis.size)
    phase_row[c] = R
    amplitude_row = np.zeros(basis.size)
    amplitude_row[c] = 2 * model.M @ X1c
    amplitude_row[s] = 2 * model.M @ X1s
    residual = np.concatenate(
        [
            hbm.residual,
            [R @ X1c, X1c @ model.M @ X1c + X1s @ model.M @ X1s - q**2],
        ]
    )
    return EpmcResidual(
        residual=residual,
        d_X=np.vstack([hbm.d_X, phase_row, amplitude_row]),
        d_omega=np.concatenate([hbm.d_omega, [0.0, 0.0]]),
        d_xi=np.concatenate([Z_xi @ X.coefficients, [0.0, 0.0]]),
        d_q=np.concatenate([np.zeros(basis.size), [0.0, -2 * q]]),
    )


def _normalized_residual(
    Xhat: HarmonicSet,
    omega: float,
    xi: float,
    log_q: float,
    model: SystemModel,
    R: np.ndarray,
    n_time: int,
    x_static: np.ndarray,
    with_jacobian: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residual in harmonics divided by ``q`` and amplitude ``log10 q``.

    Rows of harmonics other than 0 are divided by ``q`` so that tolerances
    hold relative to the modal amplitude.
    """
    basis = Xhat.basis
    q = 10.0**log_q
    dynamic = basis.component_harmonics.repeat(basis.num_dof) != 0
    scale = np.where(dynamic, q, 1.0)
    X = Xhat.with_coefficients(scale * Xhat.coefficients)
    res = epmc_residual(X, omega, xi, q, model, R, n_time, x_static, with_jacobian)
    row_scale = np.concatenate([np.where(dynamic, 1.0 / q, 1.0), [1.0 / q, 1.0 / q**2]])
    residual = row_scale * res.residual
    d_unknowns = row_scale[:, np.newaxis] * np.column_stack(
        [res.d_X * scale, res.d_omega, res.d_xi]
    )
    # d/dq of the scaled rows: chain rule through X = scale * Xhat and the row scale
    d_row_scale = np.concatenate(
        [np.where(dynamic, -1.0 / q**2, 0.0), [-1.0 / q**2, -2.0 / q**3]]
    )
    d_q = d_row_scale * res.residual + row_scale * (
        res.d_X @ np.where(dynamic, Xhat.coefficients, 0.0) + res.d_q
    )
    return residual, d_unknowns, d_q * q * np.log(10.0)


def check_stuck_regime(model: SystemModel, shape: np.ndarray, q: float) -> bool:
    """Whether every Iwan slider stays stuck at modal amplitude ``q``."""
    stuck = True
    for slot in model.slots:
        if not isinstance(slot.element, IwanElement):
            continue
        local = q * abs(slot.q_row @ shape)
        if local >= slot.element.breakpoints.min():
            logger.warning(
                "Slot {!r} slips at the start amplitude q={:.3g}: local amplitude "
                "{:.3g} exceeds the smallest breakpoint {:.3g}",
                slot.label,
                q,
                local,
                slot.element.breakpoints.min(),
            )
            stuck = False
    return stuck


def epmc_backbone(
    model: SystemModel,
    mode: int,
    q_range: tuple[float, float],
    basis: HarmonicBasis,
    *,
    n_time: int = 1024,
    phase_dof: int | None = None,
    state: StiffnessState = 'stuck',
    sopts: SolverOptions | None = None,
    copts: ContinuationOptions | None = None,
) -> Backbone:
    """Backbone of a nonlinear mode over a range of modal amplitudes.

    Parameters
    ----------
    model:
        The structure.
    mode:
        1-based index of the linear mode the backbone starts from.
    q_range:
        Smallest and largest modal amplitude. The smallest should keep all
        elements stuck.
    basis:
        Harmonics of the modal motion, including 0 and 1.
    n_time:
        Samples per cycle of the nonlinear force evaluation.
    phase_dof:
        DOF whose first harmonic cosine is fixed to zero. Defaults to the
        largest component of the linear mode.
    state:
        Linearization used for the start guess.
    sopts:
        Corrector settings.
    copts:
        Step control in ``log10 q``.

    Returns
    -------
    :
        The backbone, flagged as truncated if continuation stopped early.
    """
    q_min, q_max = q_range
    if not 0 < q_min < q_max:
        raise ValueError(f"Invalid modal amplitude range {q_range}")
    if 0 not in basis.harmonics or 1 not in basis.harmonics:
        raise ValueError(
            f"Nonlinear modes require harmonics 0 and 1, got {basis.harmonics}"
        )
    omegas, shapes = linear_modes(model, state)
    if not 1 <= mode <= omegas.size:
        raise ValueError(f"Mode {mode} does not exist, the model has {omegas.size}")
    tic = time.perf_counter()
    shape = shapes[:, mode - 1]
    dof = int(np.argmax(np.abs(shape))) if phase_dof is None else phase_dof
    R = np.zeros(model.num_dof)
    R[dof] = 1.0
    x_static = prestress_solve(model, sopts)
    check_stuck_regime(model, shape, q_min)

    start = np.zeros(basis.size)
    start[basis.block(0)] = x_static
    start[basis.block(1, 's')] = shape
    xi0 = float(shape @ model.C @ shape)
    y0 = np.concatenate([start, [omegas[mode - 1], xi0]])

    def fun(y: np.ndarray, log_q: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        Xhat = HarmonicSet(basis=basis, coefficients=y[:-2])
        return _normalized_residual(
            Xhat, y[-2], y[-1], log_q, model, R, n_time, x_static
        )

    def residual_only(y: np.ndarray, log_q: float) -> np.ndarray:
        Xhat = HarmonicSet(basis=basis, coefficients=y[:-2])
        return _normalized_residual(
            Xhat, y[-2], y[-1], log_q, model, R, n_time, x_static, False
        )[0]

    log_range = (np.log10(q_min), np.log10(q_max))

    def fixed(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        residual, d_y, _ = fun(y, log_range[0])
        return residual, d_y

    y_start, diagnostics = solve(
        fixed, y0, sopts, residual_only=lambda y: residual_only(y, log_range[0])
    )
    if not diagnostics.converged:
        raise ConvergenceError(
            f"Nonlinear mode {mode} did not converge at q={q_min}: residual norm "
            f"{diagnostics.residual_norm:.3e}",
            initial_guess=y0,
            diagnostics=diagnostics,
        )
    branch = continue_branch(
        fun,
        y_start,
        log_range[0],
        log_range,
        copts,
        sopts,
        residual_only=residual_only,
    )
    backbone = Backbone(
        basis=basis,
        mode=mode,
        phase_dof=dof,
        truncated=branch.truncated,
        message=branch.message,
    )
    dynamic = basis.component_harmonics.repeat(basis.num_dof) != 0
    for point in branch:
        q = 10.0**point.parameter
        if backbone.points and q <= backbone.points[-1].q:
            logger.warning("Dropping backbone point at q={:.4g} that folds back", q)
            continue
        coefficients = np.where(dynamic, q, 1.0) * point.unknowns[:-2]
        backbone.points.append(
            EpmcPoint(
                q=q,
                omega=float(point.unknowns[-2]),
                xi=float(point.unknowns[-1]),
                X=HarmonicSet(basis=basis, coefficients=coefficients),
            )
        )
    backbone.elapsed = time.perf_counter() - tic
    logger.info(
        "Backbone of mode {} from q={:.3g} to {:.3g}: omega {:.4g} to {:.4g} rad/s",
        mode,
        backbone.q[0],
        backbone.q[-1],
        backbone.omega[0],
        backbone.omega[-1],
    )
    return backbone


def upsample_backbone(backbone: Backbone, factor: int) -> Backbone:
    """Insert ``factor - 1`` points linearly in ``q`` between neighbouring points."""
    if factor < 1:
        raise ValueError(f"Upsampling factor must be at least 1, got {factor}")
    if factor == 1 or len(backbone) < 2:
        return backbone
    q = backbone.q
    dense = [
        q[i] + (q[i + 1] - q[i]) * j / factor
        for i in range(q.size - 1)
        for j in range(factor)
    ]
    points = [backbone.at(value) for value in dense]
    points.append(backbone.points[-1])
    return backbone.with_points(points)


def point_residual_norm(
    point: EpmcPoint,
    model: SystemModel,
    phase_dof: int,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
) -> float:
    """Residual norm of a backbone point in the normalized form used by continuation."""
    basis = point.X.basis
    dynamic = basis.component_harmonics.repeat(basis.num_dof) != 0
    Xhat = point.X.with_coefficients(
        np.where(dynamic, point.X.coefficients / point.q, point.X.coefficients)
    )
    R = np.zeros(model.num_dof)
    R[phase_dof] = 1.0
    x_static = np.zeros(model.num_dof) if x_static is None else x_static
    residual, _, _ = _normalized_residual(
        Xhat, point.omega, point.xi, np.log10(point.q), model, R, n_time, x_static
    )
    return float(np.linalg.norm(residual))
