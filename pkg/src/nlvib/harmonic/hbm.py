# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Harmonic balance residuals, forced response curves and linear utilities."""

from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, NamedTuple

import numpy as np
import scipy.linalg
from loguru import logger
from tqdm import tqdm

from .fourier import HarmonicBasis, HarmonicSet, time_series_from_harmonics
from .nlforces import ElementSlot, IwanElement, aft_force
from .solvers import (
    ContinuationOptions,
    ConvergenceError,
    SolverOptions,
    continue_branch,
    solve,
)

StiffnessState = Literal['stuck', 'half', 'free']
_SLIP_FRACTION = {'stuck': 1.0, 'half': 0.5, 'free': 0.0}


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Linear structure with hysteretic elements and a harmonic force shape.

    The equations of motion read
    ``M x'' + C x' + K x + sum(t_col * f(q_row @ x)) = F_ext0 + F_ext f(t)``.
    """

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    F_ext: np.ndarray
    F_ext0: np.ndarray | None = None
    slots: tuple[ElementSlot, ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        M, C, K = (np.asarray(a, dtype=float) for a in (self.M, self.C, self.K))
        n = M.shape[0]
        for name, matrix in (('M', M), ('C', C), ('K', K)):
            if matrix.shape != (n, n):
                raise ValueError(
                    f"{name} must be a square {n}x{n} matrix, got shape {matrix.shape}"
                )
        scale = max(np.abs(M).max(), np.abs(K).max(), 1e-300)
        if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * scale):
            raise ValueError("M must be symmetric")
        if not np.allclose(K, K.T, rtol=0.0, atol=1e-12 * scale):
            raise ValueError("K must be symmetric")
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise ValueError("M must be positive definite") from None
        F_ext = np.asarray(self.F_ext, dtype=float).ravel()
        F_ext0 = (
            np.zeros(n)
            if self.F_ext0 is None
            else np.asarray(self.F_ext0, dtype=float).ravel()
        )
        if F_ext.shape != (n,) or F_ext0.shape != (n,):
            raise ValueError(
                f"Force vectors must have {n} entries, got {F_ext.size} and "
                f"{F_ext0.size}"
            )
        slots = tuple(self.slots)
        for slot in slots:
            if slot.q_row.size != n:
                raise ValueError(
                    f"Slot {slot.label!r} has {slot.q_row.size} entries but the "
                    f"model has {n} DOFs"
                )
        labels = tuple(self.labels) or tuple(f'x{i + 1}' for i in range(n))
        if len(labels) != n:
            raise ValueError(f"Expected {n} DOF labels, got {len(labels)}")
        for name, value in (
            ('M', M),
            ('C', C),
            ('K', K),
            ('F_ext', F_ext),
            ('F_ext0', F_ext0),
            ('slots', slots),
            ('labels', labels),
        ):
            object.__setattr__(self, name, value)

    @property
    def num_dof(self) -> int:
        return self.M.shape[0]

    def element_stiffness(self, state: StiffnessState = 'stuck') -> np.ndarray:
        """Linearized stiffness of all slots.

        Iwan elements contribute their stuck stiffness scaled by 1, 1/2 or 0 for
        the ``stuck``, ``half`` and ``free`` states. Other elements always
        contribute in full.
        """
        if state not in _SLIP_FRACTION:
            raise ValueError(f"Unknown stiffness state {state!r}")
        stiffness = np.zeros_like(self.K)
        for slot in self.slots:
            fraction = (
                _SLIP_FRACTION[state] if isinstance(slot.element, IwanElement) else 1.0
            )
            stiffness += fraction * slot.stiffness_matrix
        return stiffness

    def linearized_stiffness(self, state: StiffnessState = 'stuck') -> np.ndarray:
        return self.K + self.element_stiffness(state)

    def local_static(self, x_static: np.ndarray | None) -> np.ndarray:
        """Local displacement of each slot at a static state."""
        if x_static is None:
            return np.zeros(len(self.slots))
        return np.array([slot.q_row @ x_static for slot in self.slots])


@dataclass(frozen=True)
class ForcingState:
    """Cosine and sine magnitudes of the harmonic force along ``F_ext``."""

    f_mag_c: float = 0.0
    f_mag_s: float = 0.0

    @property
    def magnitude(self) -> float:
        return float(np.hypot(self.f_mag_c, self.f_mag_s))


class ControlMode(str, Enum):
    CONSTANT_FORCE = 'constant_force'
    AMPLITUDE = 'amplitude'
    AMPLITUDE_PHASE = 'amplitude_phase'


@dataclass(frozen=True, eq=False)
class ControlSpec:
    """What is held fixed along a forced response curve.

    ``AMPLITUDE`` frees the cosine force magnitude and adds one row fixing the
    first harmonic amplitude ``Omega**k * |R_1 X_1|``. ``AMPLITUDE_PHASE``
    frees both force magnitudes and fixes ``Omega**k R_1 X_1c = A_1`` and
    ``R_1 X_1s = 0``.
    """

    mode: ControlMode = ControlMode.CONSTANT_FORCE
    R_1: np.ndarray | None = field(default=None, repr=False)
    A_1: float = 0.0
    k: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, 'mode', ControlMode(self.mode))
        if self.k not in (0, 1, 2):
            raise ValueError(f"Derivative order k must be 0, 1 or 2, got {self.k}")
        if self.mode is ControlMode.CONSTANT_FORCE:
            return
        if self.R_1 is None:
            raise ValueError(f"Control mode {self.mode.value} requires R_1")
        object.__setattr__(self, 'R_1', np.asarray(self.R_1, dtype=float).ravel())
        if self.A_1 <= 0:
            raise ValueError(f"Controlled amplitude must be positive, got {self.A_1}")

    @classmethod
    def amplitude(cls, R_1: np.ndarray, A_1: float, k: int = 0) -> ControlSpec:
        return cls(mode=ControlMode.AMPLITUDE, R_1=R_1, A_1=A_1, k=k)

    @classmethod
    def amplitude_phase(cls, R_1: np.ndarray, A_1: float, k: int = 0) -> ControlSpec:
        return cls(mode=ControlMode.AMPLITUDE_PHASE, R_1=R_1, A_1=A_1, k=k)

    @property
    def n_rows(self) -> int:
        """Number of control rows and of freed force magnitudes."""
        return {
            ControlMode.CONSTANT_FORCE: 0,
            ControlMode.AMPLITUDE: 1,
            ControlMode.AMPLITUDE_PHASE: 2,
        }[self.mode]

    def with_amplitude(self, A_1: float) -> ControlSpec:
        return ControlSpec(mode=self.mode, R_1=self.R_1, A_1=A_1, k=self.k)

    def extracted_amplitude(self, X: HarmonicSet, omega: float) -> float:
        """First harmonic amplitude of the controlled row, ``Omega**k |R_1 X_1|``."""
        if self.R_1 is None:
            raise ValueError("Constant force control has no extraction row")
        return float(omega**self.k * abs(self.R_1 @ X.complex_amplitude(1)))


class HbmResidual(NamedTuple):
    residual: np.ndarray
    d_X: np.ndarray
    d_omega: np.ndarray
    d_f_mag_c: np.ndarray
    d_f_mag_s: np.ndarray
    d_A_1: np.ndarray
    """Derivative with respect to the controlled amplitude."""


def harmonic_stiffness(
    basis: HarmonicBasis,
    omega: float,
    M: np.ndarray,
    C: np.ndarray,
    K: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal dynamic stiffness of the linear part and its Omega derivative.

    For harmonic ``n`` the block acting on ``[X_nc, X_ns]`` is
    ``[[K - (n Omega)^2 M, n Omega C], [-n Omega C, K - (n Omega)^2 M]]``.
    """
    Z = np.zeros((basis.size, basis.size))
    dZ = np.zeros_like(Z)
    for h in basis.harmonics:
        if h == 0:
            static = basis.block(0)
            Z[static, static] = K
            continue
        c, s = basis.block(h, 'c'), basis.block(h, 's')
        stiffness = K - (h * omega) ** 2 * M
        Z[c, c] = Z[s, s] = stiffness
        Z[c, s] = h * omega * C
        Z[s, c] = -h * omega * C
        dZ[c, c] = dZ[s, s] = -2 * h**2 * omega * M
        dZ[c, s] = h * C
        dZ[s, c] = -h * C
    return Z, dZ


def hbm_residual(
    X: HarmonicSet,
    omega: float,
    forcing: ForcingState,
    model: SystemModel,
    control: ControlSpec | None = None,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
    damping: np.ndarray | None = None,
    with_jacobian: bool = True,
) -> HbmResidual:
    """Harmonic balance residual and its derivatives.

    Parameters
    ----------
    X:
        Harmonic coefficients of the motion.
    omega:
        Fundamental frequency in rad/s.
    forcing:
        Magnitudes of the harmonic force along ``model.F_ext``.
    model:
        The structure.
    control:
        Appends amplitude (and phase) rows if not constant force.
    n_time:
        Samples per cycle of the nonlinear force evaluation.
    x_static:
        Static state where the element histories start, defaults to zero.
    damping:
        Replaces ``model.C``.
    with_jacobian:
        If false, ``d_X`` lacks the nonlinear force derivative. Only the
        residual is meant to be used then.

    Returns
    -------
    :
        The residual and its derivatives with respect to all unknowns.
    """
    control = ControlSpec() if control is None else control
    basis = X.basis
    if basis.num_dof != model.num_dof:
        raise ValueError(
            f"Basis has {basis.num_dof} DOFs but the model has {model.num_dof}"
        )
    if control.mode is not ControlMode.CONSTANT_FORCE and 1 not in basis.harmonics:
        raise ValueError(
            f"Control mode {control.mode.value} requires harmonic 1 in the basis, "
            f"got {basis.harmonics}"
        )
    C = model.C if damping is None else damping
    Z, dZ = harmonic_stiffness(basis, omega, model.M, C, model.K)
    residual = Z @ X.coefficients
    d_X = Z.copy()
    d_omega = dZ @ X.coefficients
    if model.slots:
        aft = aft_force(
            model.slots,
            X,
            omega,
            n_time,
            x_static_local=model.local_static(x_static),
            with_jacobian=with_jacobian,
        )
        residual += aft.forces.coefficients
        if aft.jacobian is not None:
            d_X += aft.jacobian
    d_fc = np.zeros(basis.size)
    d_fs = np.zeros(basis.size)
    if 0 in basis.harmonics:
        residual[basis.block(0)] -= model.F_ext0
    if 1 in basis.harmonics:
        c, s = basis.block(1, 'c'), basis.block(1, 's')
        residual[c] -= forcing.f_mag_c * model.F_ext
        residual[s] -= forcing.f_mag_s * model.F_ext
        d_fc[c] = -model.F_ext
        d_fs[s] = -model.F_ext

    rows = control.n_rows
    if rows == 0:
        return HbmResidual(residual, d_X, d_omega, d_fc, d_fs, np.zeros(basis.size))
    assert control.R_1 is not None  # noqa: S101
    c, s = basis.block(1, 'c'), basis.block(1, 's')
    scale = omega**control.k
    d_scale = control.k * omega ** (control.k - 1) if control.k else 0.0
    a = control.R_1 @ X.cosine(1)
    b = control.R_1 @ X.sine(1)
    extra = np.zeros((rows, basis.size))
    if control.mode is ControlMode.AMPLITUDE:
        extra_res = np.array([scale**2 * (a**2 + b**2) - control.A_1**2])
        extra[0, c] = 2 * scale**2 * a * control.R_1
        extra[0, s] = 2 * scale**2 * b * control.R_1
        extra_omega = np.array([2 * scale * d_scale * (a**2 + b**2)])
        extra_A = np.array([-2 * control.A_1])
    else:
        extra_res = np.array([scale * a - control.A_1, scale * b])
        extra[0, c] = scale * control.R_1
        extra[1, s] = scale * control.R_1
        extra_omega = np.array([d_scale * a, d_scale * b])
        extra_A = np.array([-1.0, 0.0])
    return HbmResidual(
        residual=np.concatenate([residual, extra_res]),
        d_X=np.vstack([d_X, extra]),
        d_omega=np.concatenate([d_omega, extra_omega]),
        d_f_mag_c=np.concatenate([d_fc, np.zeros(rows)]),
        d_f_mag_s=np.concatenate([d_fs, np.zeros(rows)]),
        d_A_1=np.concatenate([np.zeros(basis.size), extra_A]),
    )


def prestress_solve(
    model: SystemModel, opts: SolverOptions | None = None
) -> np.ndarray:
    """Static displacement under ``F_ext0`` with tangential element forces zeroed.

    Non-tangential elements are loaded once from a relaxed state at zero.

    Raises
    ------
    ConvergenceError
        If the Newton iteration does not converge.
    """
    active = [slot for slot in model.slots if not slot.tangential]

    def fun(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        residual = model.K @ x - model.F_ext0
        jacobian = model.K.copy()
        for slot in active:
            force, stiffness = slot.element.virgin_force(float(slot.q_row @ x))
            residual += force * slot.t_col
            jacobian += stiffness * np.outer(slot.t_col, slot.q_row)
        return residual, jacobian

    x0 = np.zeros(model.num_dof)
    x_static, diagnostics = solve(fun, x0, opts)
    if not diagnostics.converged:
        raise ConvergenceError(
            f"Static prestress solution did not converge: residual norm "
            f"{diagnostics.residual_norm:.3e}",
            initial_guess=x0,
            diagnostics=diagnostics,
        )
    return x_static


def _dynamic_stiffness(
    model: SystemModel, omega: float, state: StiffnessState
) -> np.ndarray:
    return (
        model.linearized_stiffness(state)
        - omega**2 * model.M
        + 1j * omega * model.C
    )


def linear_frf(
    model: SystemModel,
    omega: float,
    state: StiffnessState = 'stuck',
    force: np.ndarray | None = None,
) -> np.ndarray:
    """Complex receptance response ``H(Omega) F`` of the linearized model.

    The motion is ``Re(H exp(i Omega t))`` so that ``X_1c = Re H`` and
    ``X_1s = -Im H``.

    Parameters
    ----------
    model:
        The structure.
    omega:
        Frequency in rad/s.
    state:
        Linearization of the hysteretic elements.
    force:
        Complex force amplitude, defaults to ``model.F_ext``.

    Raises
    ------
    ValueError
        If the dynamic stiffness is singular at ``omega``.
    """
    dynamic = _dynamic_stiffness(model, omega, state)
    with np.errstate(divide='ignore', invalid='ignore'):
        condition = np.linalg.cond(dynamic)
    if not condition <= 1e12:
        raise ValueError(
            f"Dynamic stiffness is singular at Omega={omega} rad/s ({state} state)"
        )
    rhs = model.F_ext if force is None else force
    return np.linalg.solve(dynamic, rhs.astype(complex))


def linear_modes(
    model: SystemModel, state: StiffnessState = 'stuck'
) -> tuple[np.ndarray, np.ndarray]:
    """Natural frequencies and mass-normalized mode shapes (as columns).

    Each shape is signed so that its largest component is positive.
    """
    eigenvalues, shapes = scipy.linalg.eigh(model.linearized_stiffness(state), model.M)
    if eigenvalues.min() < -1e-10 * abs(eigenvalues).max():
        logger.warning(
            "Linearized stiffness in the {} state is indefinite, smallest eigenvalue "
            "{:.3e}",
            state,
            eigenvalues.min(),
        )
    largest = shapes[np.argmax(np.abs(shapes), axis=0), np.arange(shapes.shape[1])]
    shapes = shapes * np.sign(largest)
    return np.sqrt(np.clip(eigenvalues, 0.0, None)), shapes


@dataclass
class HbmPoint:
    X: HarmonicSet
    omega: float
    forcing: ForcingState
    control_amplitude: float
    """``A_1`` of the point, NaN under constant force."""
    residual_norm: float


@dataclass
class FrcBranch:
    """Points of a forced response curve in continuation order."""

    control: ControlSpec
    basis: HarmonicBasis
    points: list[HbmPoint] = field(default_factory=list)
    truncated: bool = False
    message: str = ''
    elapsed: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    @property
    def omega(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    @property
    def f_mag_c(self) -> np.ndarray:
        return np.array([p.forcing.f_mag_c for p in self.points])

    @property
    def f_mag_s(self) -> np.ndarray:
        return np.array([p.forcing.f_mag_s for p in self.points])

    @property
    def f_mag(self) -> np.ndarray:
        return np.hypot(self.f_mag_c, self.f_mag_s)

    def amplitude(self, n: int, dof: int) -> np.ndarray:
        return np.array([p.X.amplitude(n)[dof] for p in self.points])

    def phase(self, n: int, dof: int) -> np.ndarray:
        return np.array([p.X.phase(n)[dof] for p in self.points])


def pack_unknowns(
    X: HarmonicSet, forcing: ForcingState, control: ControlSpec
) -> np.ndarray:
    """``[X, f_mag_c, f_mag_s]`` truncated to the force magnitudes freed by control."""
    freed = [forcing.f_mag_c, forcing.f_mag_s][: control.n_rows]
    return np.concatenate([X.coefficients, freed])


def unpack_unknowns(
    y: np.ndarray,
    basis: HarmonicBasis,
    control: ControlSpec,
    forcing: ForcingState | None = None,
) -> tuple[HarmonicSet, ForcingState]:
    """Inverse of :func:`pack_unknowns`, fixed magnitudes come from ``forcing``."""
    X = HarmonicSet(basis=basis, coefficients=y[: basis.size])
    if control.mode is ControlMode.CONSTANT_FORCE:
        return X, forcing if forcing is not None else ForcingState()
    if control.mode is ControlMode.AMPLITUDE:
        return X, ForcingState(f_mag_c=float(y[basis.size]))
    return X, ForcingState(
        f_mag_c=float(y[basis.size]), f_mag_s=float(y[basis.size + 1])
    )


def _jacobian_columns(res: HbmResidual, control: ControlSpec) -> np.ndarray:
    freed = [res.d_f_mag_c, res.d_f_mag_s][: control.n_rows]
    return np.column_stack([res.d_X, *freed])


def linear_initial_guess(
    model: SystemModel,
    omega: float,
    basis: HarmonicBasis,
    control: ControlSpec,
    forcing: ForcingState | None = None,
    x_static: np.ndarray | None = None,
) -> tuple[HarmonicSet, ForcingState]:
    """Start point from the stuck linear response.

    Under amplitude control the force is rotated and scaled so that the
    controlled row has zero sine part and the requested amplitude.
    """
    response = linear_frf(model, omega, 'stuck')
    if control.mode is ControlMode.CONSTANT_FORCE:
        forcing = ForcingState() if forcing is None else forcing
        force = forcing.f_mag_c - 1j * forcing.f_mag_s
    else:
        assert control.R_1 is not None  # noqa: S101
        extracted = control.R_1 @ response
        if abs(extracted) < 1e-8 * np.linalg.norm(response):
            logger.warning(
                "Control row is near a node of the linear response at Omega={:.4g}",
                omega,
            )
        force = control.A_1 / (omega**control.k * extracted)
        if control.mode is ControlMode.AMPLITUDE:
            force = abs(force)
        forcing = ForcingState(f_mag_c=float(force.real), f_mag_s=float(-force.imag))
    X1 = response * force
    coefficients = np.zeros(basis.size)
    if 1 in basis.harmonics:
        coefficients[basis.block(1, 'c')] = X1.real
        coefficients[basis.block(1, 's')] = -X1.imag
    if 0 in basis.harmonics and x_static is not None:
        coefficients[basis.block(0)] = x_static
    return HarmonicSet(basis=basis, coefficients=coefficients), forcing


def solve_point(
    model: SystemModel,
    omega: float,
    control: ControlSpec,
    X0: HarmonicSet,
    forcing0: ForcingState,
    *,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
    opts: SolverOptions | None = None,
) -> HbmPoint:
    """Converge one harmonic balance point at fixed frequency.

    Raises
    ------
    ConvergenceError
        With the initial guess attached if the solve does not converge.
    """
    basis = X0.basis

    def fun(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X, forcing = unpack_unknowns(y, basis, control, forcing0)
        res = hbm_residual(X, omega, forcing, model, control, n_time, x_static)
        return res.residual, _jacobian_columns(res, control)

    def residual_only(y: np.ndarray) -> np.ndarray:
        X, forcing = unpack_unknowns(y, basis, control, forcing0)
        return hbm_residual(
            X, omega, forcing, model, control, n_time, x_static, with_jacobian=False
        ).residual

    y0 = pack_unknowns(X0, forcing0, control)
    y, diagnostics = solve(fun, y0, opts, residual_only=residual_only)
    if not diagnostics.converged:
        raise ConvergenceError(
            f"Harmonic balance point at Omega={omega} did not converge: residual "
            f"norm {diagnostics.residual_norm:.3e}",
            initial_guess=y0,
            diagnostics=diagnostics,
        )
    X, forcing = unpack_unknowns(y, basis, control, forcing0)
    amplitude = control.A_1 if control.n_rows else float('nan')
    return HbmPoint(X, omega, forcing, amplitude, diagnostics.residual_norm)


def amplitude_init_branch(
    model: SystemModel,
    control: ControlSpec,
    omega: float,
    amplitude_range: tuple[float, float],
    basis: HarmonicBasis,
    *,
    n_time: int = 1024,
    sopts: SolverOptions | None = None,
    copts: ContinuationOptions | None = None,
) -> FrcBranch:
    """Continue a controlled-amplitude point in ``A_1`` at fixed frequency.

    The branch starts from the linear response at the lower amplitude and
    seeds high-amplitude forced response curves.
    """
    if control.mode is ControlMode.CONSTANT_FORCE:
        raise ValueError("Amplitude continuation requires amplitude control")
    low, high = amplitude_range
    if not 0 < low < high:
        raise ValueError(f"Invalid amplitude range {amplitude_range}")
    tic = time.perf_counter()
    x_static = prestress_solve(model, sopts)
    start_control = control.with_amplitude(low)
    X0, forcing0 = linear_initial_guess(
        model, omega, basis, start_control, None, x_static
    )

    def fun(
        y: np.ndarray, amplitude: float
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        active = control.with_amplitude(amplitude)
        X, forcing = unpack_unknowns(y, basis, active)
        res = hbm_residual(X, omega, forcing, model, active, n_time, x_static)
        return res.residual, _jacobian_columns(res, active), res.d_A_1

    def residual_only(y: np.ndarray, amplitude: float) -> np.ndarray:
        active = control.with_amplitude(amplitude)
        X, forcing = unpack_unknowns(y, basis, active)
        return hbm_residual(
            X, omega, forcing, model, active, n_time, x_static, with_jacobian=False
        ).residual

    branch = continue_branch(
        fun,
        pack_unknowns(X0, forcing0, control),
        low,
        (low, high),
        copts,
        sopts,
        residual_only=residual_only,
    )
    result = FrcBranch(
        control=control,
        basis=basis,
        truncated=branch.truncated,
        message=branch.message,
    )
    for point in branch:
        X, forcing = unpack_unknowns(point.unknowns, basis, control)
        result.points.append(
            HbmPoint(X, omega, forcing, point.parameter, point.residual_norm)
        )
    result.elapsed = time.perf_counter() - tic
    return result


def _seed_from_amplitude_branch(
    model: SystemModel,
    control: ControlSpec,
    omega: float,
    basis: HarmonicBasis,
    n_time: int,
    x_static: np.ndarray,
    sopts: SolverOptions | None,
    copts: ContinuationOptions | None,
) -> HbmPoint:
    logger.info(
        "Linear start failed at A_1={:.4g}, continuing in amplitude at Omega={:.4g}",
        control.A_1,
        omega,
    )
    low = 1e-3 * control.A_1
    init = amplitude_init_branch(
        model,
        control,
        omega,
        (low, 1.05 * control.A_1),
        basis,
        n_time=n_time,
        sopts=sopts,
        copts=copts,
    )
    amplitudes = np.array([p.control_amplitude for p in init.points])
    nearest = init.points[int(np.argmin(np.abs(amplitudes - control.A_1)))]
    return solve_point(
        model,
        omega,
        control,
        nearest.X,
        nearest.forcing,
        n_time=n_time,
        x_static=x_static,
        opts=sopts,
    )


def frc(
    model: SystemModel,
    control: ControlSpec,
    omega_range: tuple[float, float],
    basis: HarmonicBasis,
    *,
    forcing: ForcingState | None = None,
    n_time: int = 1024,
    sopts: SolverOptions | None = None,
    copts: ContinuationOptions | None = None,
) -> FrcBranch:
    """Forced response curve by continuation in frequency.

    Parameters
    ----------
    model:
        The structure.
    control:
        Constant force, or the controlled first harmonic amplitude.
    omega_range:
        Frequency interval in rad/s. The curve starts at the lower end, or at
        the upper end if ``copts.direction`` is -1.
    basis:
        Harmonics of the motion.
    forcing:
        Force magnitudes for constant force control.
    n_time:
        Samples per cycle of the nonlinear force evaluation.
    sopts:
        Corrector settings.
    copts:
        Step control.

    Returns
    -------
    :
        The traced curve.

    Raises
    ------
    ConvergenceError
        If the start point converges neither from the linear guess nor by
        amplitude continuation.
    """
    if control.mode is ControlMode.CONSTANT_FORCE and forcing is None:
        raise ValueError("Constant force control requires a forcing state")
    copts = ContinuationOptions() if copts is None else copts
    low, high = min(omega_range), max(omega_range)
    omega0 = low if copts.direction > 0 else high
    tic = time.perf_counter()
    x_static = prestress_solve(model, sopts)
    X0, forcing0 = linear_initial_guess(
        model, omega0, basis, control, forcing, x_static
    )
    try:
        start = solve_point(
            model,
            omega0,
            control,
            X0,
            forcing0,
            n_time=n_time,
            x_static=x_static,
            opts=sopts,
        )
    except ConvergenceError:
        if control.mode is ControlMode.CONSTANT_FORCE:
            raise
        start = _seed_from_amplitude_branch(
            model, control, omega0, basis, n_time, x_static, sopts, None
        )
    fixed = start.forcing

    def fun(y: np.ndarray, omega: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        X, active = unpack_unknowns(y, basis, control, fixed)
        res = hbm_residual(X, omega, active, model, control, n_time, x_static)
        return res.residual, _jacobian_columns(res, control), res.d_omega

    def residual_only(y: np.ndarray, omega: float) -> np.ndarray:
        X, active = unpack_unknowns(y, basis, control, fixed)
        return hbm_residual(
            X, omega, active, model, control, n_time, x_static, with_jacobian=False
        ).residual

    branch = continue_branch(
        fun,
        pack_unknowns(start.X, start.forcing, control),
        omega0,
        (low, high),
        copts,
        sopts,
        residual_only=residual_only,
    )
    amplitude = control.A_1 if control.n_rows else float('nan')
    result = FrcBranch(
        control=control, basis=basis, truncated=branch.truncated, message=branch.message
    )
    for point in branch:
        X, active = unpack_unknowns(point.unknowns, basis, control, fixed)
        result.points.append(
            HbmPoint(X, point.parameter, active, amplitude, point.residual_norm)
        )
    result.elapsed = time.perf_counter() - tic
    logger.info(
        "Forced response with {} points over [{:.4g}, {:.4g}] rad/s in {:.2f} s",
        len(result),
        low,
        high,
        result.elapsed,
    )
    return result


def peak_displacement(
    X: HarmonicSet, dof: int, n_time: int = 1024, omega: float = 1.0
) -> float:
    """Largest absolute displacement of one DOF over a cycle."""
    return float(np.abs(time_series_from_harmonics(X, omega, n_time)[:, dof]).max())


def harmonic_phase_difference(X: HarmonicSet, dof: int, n: int) -> float:
    """Phase of harmonic ``n`` relative to ``n`` times the fundamental phase.

    Wrapped to ``(-pi, pi]``.
    """
    difference = X.phase(n)[dof] - n * X.phase(1)[dof]
    return float(np.angle(np.exp(1j * difference)))


def frc_levels(
    model: SystemModel,
    controls: Sequence[ControlSpec],
    omega_range: tuple[float, float],
    basis: HarmonicBasis,
    **kwargs: object,
) -> list[FrcBranch]:
    """Forced response curves at several control levels, one after another."""
    return [
        frc(model, control, omega_range, basis, **kwargs)  # type: ignore[arg-type]
        for control in tqdm(controls, desc='FRC levels', disable=len(controls) < 2)
    ]
