# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Tracking of superharmonic resonances by a phase resonance constraint.

The harmonics below ``n`` of the motion generate, through the nonlinear
elements, a force at harmonic ``n`` that excites the superharmonic resonance.
A point is phase resonant when the harmonic ``n`` motion is orthogonal to
this broadband excitation, optionally after projection on a linear mode.
"""

from __future__ import annotations

import dataclasses
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np
from loguru import logger

from .fourier import HarmonicBasis, HarmonicSet
from .hbm import (
    ControlSpec,
    FrcBranch,
    ForcingState,
    StiffnessState,
    SystemModel,
    hbm_residual,
    linear_frf,
    linear_initial_guess,
    linear_modes,
    prestress_solve,
)
from .nlforces import ElementSlot, aft_force
from .solvers import (
    ContinuationOptions,
    ConvergenceError,
    SolverOptions,
    continue_branch,
    solve,
)
from .utils import crossings

ConstraintFilter = Literal['basic', 'modal']


class NoSuperharmonicExcitationError(ValueError):
    """The broadband excitation or the superharmonic motion vanishes."""


class BroadbandForce(NamedTuple):
    cosine: np.ndarray
    sine: np.ndarray
    d_cosine: np.ndarray
    """Derivative of the cosine part with respect to all motion coefficients."""
    d_sine: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.cosine, self.sine])


def _require_harmonic(basis: HarmonicBasis, n: int) -> None:
    if n < 2:
        raise ValueError(f"Superharmonic index must be at least 2, got {n}")
    if n not in basis.harmonics:
        raise ValueError(f"Harmonic {n} is not in the basis {basis.harmonics}")


def broadband_excitation(
    X: HarmonicSet,
    omega: float,
    n: int,
    model: SystemModel,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
    slots: Sequence[ElementSlot] | None = None,
    with_jacobian: bool = True,
) -> BroadbandForce:
    """Harmonic ``n`` of the force generated by the motion below harmonic ``n``.

    The motion is truncated to harmonics below ``n``, its nonlinear forces are
    evaluated with histories started at ``x_static`` and the negated harmonic
    ``n`` content is returned.

    Parameters
    ----------
    X:
        Harmonics of the motion.
    omega:
        Fundamental frequency in rad/s.
    n:
        Superharmonic index.
    model:
        The structure.
    n_time:
        Samples per cycle.
    x_static:
        Static state of the element histories.
    slots:
        Restrict the force to these slots, defaults to all slots of the model.
    with_jacobian:
        Leave the derivatives at zero if false.
    """
    basis = X.basis
    _require_harmonic(basis, n)
    slots = model.slots if slots is None else tuple(slots)
    zeros = np.zeros(model.num_dof)
    if not slots:
        jacobian = np.zeros((model.num_dof, basis.size))
        return BroadbandForce(zeros, zeros.copy(), jacobian, jacobian.copy())
    local = None
    if x_static is not None:
        local = np.array([slot.q_row @ x_static for slot in slots])
    aft = aft_force(
        slots,
        X.truncated(n),
        omega,
        n_time,
        x_static_local=local,
        with_jacobian=with_jacobian,
    )
    if aft.jacobian is None:
        jacobian = np.zeros((model.num_dof, basis.size))
        return BroadbandForce(
            -aft.forces.cosine(n), -aft.forces.sine(n), jacobian, jacobian.copy()
        )
    kept = basis.component_harmonics.repeat(basis.num_dof) < n
    c, s = basis.block(n, 'c'), basis.block(n, 's')
    return BroadbandForce(
        cosine=-aft.forces.cosine(n),
        sine=-aft.forces.sine(n),
        d_cosine=-aft.jacobian[c] * kept,
        d_sine=-aft.jacobian[s] * kept,
    )


def superposition_error_force(
    X: HarmonicSet,
    omega: float,
    n: int,
    k: int,
    model: SystemModel,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic ``k`` of the force not explained by superposing two motions.

    ``-F_k{f(x) - f(x_n) - f(x_below_n)}`` where ``x_n`` holds harmonic ``n``
    only. Histories of ``x_n`` start relaxed at zero, the others at
    ``x_static``.
    """
    basis = X.basis
    _require_harmonic(basis, n)
    local = model.local_static(x_static)

    def forces(motion: HarmonicSet, static: np.ndarray | None) -> np.ndarray:
        return aft_force(
            model.slots,
            motion,
            omega,
            n_time,
            x_static_local=static,
            with_jacobian=False,
        ).forces.coefficients

    full = forces(X, local)
    alone = forces(X.select({n}), None)
    below = forces(X.truncated(n), local)
    error = full - alone - below
    error_set = X.with_coefficients(-error)
    if k == 0:
        return error_set.static, np.zeros(model.num_dof)
    return error_set.cosine(k), error_set.sine(k)


def _normalized_inner(
    x: np.ndarray, f: np.ndarray, what: str
) -> tuple[float, np.ndarray, np.ndarray]:
    """``f.x / (|f| |x|)`` and its gradients with respect to ``x`` and ``f``."""
    norm_x, norm_f = np.linalg.norm(x), np.linalg.norm(f)
    if norm_f == 0.0:
        raise NoSuperharmonicExcitationError(
            f"The {what} excitation vanishes, there is no superharmonic forcing"
        )
    if norm_x == 0.0:
        raise NoSuperharmonicExcitationError(
            f"The {what} superharmonic motion vanishes"
        )
    value = float(f @ x / (norm_f * norm_x))
    d_x = f / (norm_f * norm_x) - value * x / norm_x**2
    d_f = x / (norm_f * norm_x) - value * f / norm_f**2
    return value, d_x, d_f


def vprnm_constraint(
    X: HarmonicSet, F_broad: tuple[np.ndarray, np.ndarray], n: int
) -> float:
    """Cosine of the angle between the harmonic ``n`` motion and the excitation.

    Zero at phase resonance; bounded by one in magnitude.
    """
    x = np.concatenate([X.cosine(n), X.sine(n)])
    f = np.concatenate([F_broad[0], F_broad[1]])
    return _normalized_inner(x, f, 'broadband')[0]


def modal_projections(
    X: HarmonicSet,
    F_broad: tuple[np.ndarray, np.ndarray],
    psi: np.ndarray,
    M: np.ndarray,
    n: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Modal amplitude ``psi^T M [X_nc, X_ns]`` and force ``psi^T [F_nc, F_ns]``."""
    weights = M @ psi
    q = np.array([weights @ X.cosine(n), weights @ X.sine(n)])
    eta = np.array([psi @ F_broad[0], psi @ F_broad[1]])
    return q, eta


def vprnm_constraint_modal(
    X: HarmonicSet,
    F_broad: tuple[np.ndarray, np.ndarray],
    psi: np.ndarray,
    M: np.ndarray,
    n: int,
) -> float:
    """Phase resonance of one mode: ``q`` and ``eta`` orthogonal in the plane."""
    q, eta = modal_projections(X, F_broad, psi, M, n)
    return _normalized_inner(q, eta, 'modal')[0]


def _constraint_row(
    X: HarmonicSet,
    broad: BroadbandForce,
    n: int,
    psi: np.ndarray | None,
    M: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Constraint value and its derivative with respect to all coefficients."""
    basis = X.basis
    c, s = basis.block(n, 'c'), basis.block(n, 's')
    gradient = np.zeros(basis.size)
    if psi is None:
        x = np.concatenate([X.cosine(n), X.sine(n)])
        value, d_x, d_f = _normalized_inner(x, broad.stacked, 'broadband')
        half = basis.num_dof
        gradient[c] += d_x[:half]
        gradient[s] += d_x[half:]
        gradient += d_f[:half] @ broad.d_cosine + d_f[half:] @ broad.d_sine
        return value, gradient
    q, eta = modal_projections(X, (broad.cosine, broad.sine), psi, M, n)
    value, d_q, d_eta = _normalized_inner(q, eta, 'modal')
    weights = M @ psi
    gradient[c] += d_q[0] * weights
    gradient[s] += d_q[1] * weights
    gradient += d_eta[0] * (psi @ broad.d_cosine) + d_eta[1] * (psi @ broad.d_sine)
    return value, gradient


@dataclass(frozen=True)
class ForceContinuation:
    """Continue in the cosine force magnitude with the sine magnitude at zero."""

    f_range: tuple[float, float]


@dataclass(frozen=True, eq=False)
class AmplitudeContinuation:
    """Continue in the controlled first harmonic amplitude with phase control."""

    R_1: np.ndarray
    A_range: tuple[float, float]
    k: int = 0


VprnmControl = ForceContinuation | AmplitudeContinuation


@dataclass(frozen=True, eq=False)
class VprnmPoint:
    X: HarmonicSet
    omega: float
    forcing: ForcingState
    n: int
    constraint_value: float
    F_broad: tuple[np.ndarray, np.ndarray]
    control_amplitude: float = float('nan')


@dataclass
class VprnmBackbone:
    """Phase resonant superharmonic points along a force or amplitude sweep."""

    n: int
    basis: HarmonicBasis
    continuation: Literal['force', 'amplitude']
    super_mode: int
    psi: np.ndarray | None = None
    """Mode shape of the modal filter, ``None`` for the basic constraint."""
    points: list[VprnmPoint] = field(default_factory=list)
    truncated: bool = False
    message: str = ''
    elapsed: float = 0.0

    def __len__(self) -> int:
        return len(self.points)

    @property
    def omega(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    @property
    def f_mag(self) -> np.ndarray:
        return np.array([p.forcing.magnitude for p in self.points])

    @property
    def constraint_values(self) -> np.ndarray:
        return np.array([p.constraint_value for p in self.points])

    def amplitude(self, n: int, dof: int) -> np.ndarray:
        return np.array([p.X.amplitude(n)[dof] for p in self.points])

    def extracted_amplitude(self, R: np.ndarray, n: int, k: int = 0) -> np.ndarray:
        """``(n Omega)**k |R X_n|`` at every point."""
        return np.array(
            [
                (n * p.omega) ** k * abs(R @ p.X.complex_amplitude(n))
                for p in self.points
            ]
        )


def paired_mode(
    model: SystemModel, n: int, fundamental: int = 1, state: StiffnessState = 'stuck'
) -> int:
    """1-based mode whose linear frequency ratio to ``fundamental`` is nearest ``n``."""
    omegas, _ = linear_modes(model, state)
    ratios = omegas / omegas[fundamental - 1]
    candidates = [j for j in range(omegas.size) if j != fundamental - 1]
    return 1 + min(candidates, key=lambda j: abs(ratios[j] - n))


def modal_filter_shape(
    model: SystemModel, mode: int, state: StiffnessState = 'stuck'
) -> np.ndarray:
    """Mass-normalized linear mode shape used by the modal filter."""
    _, shapes = linear_modes(model, state)
    return shapes[:, mode - 1]


def _check_modal_excitation(
    psi: np.ndarray, broad: BroadbandForce, mode: int
) -> None:
    eta = np.array([psi @ broad.cosine, psi @ broad.sine])
    scale = np.linalg.norm(psi) * np.linalg.norm(broad.stacked)
    if np.linalg.norm(eta) <= 1e-10 * scale:
        raise NoSuperharmonicExcitationError(
            f"The broadband excitation does not force mode {mode} "
            f"(|eta| = {np.linalg.norm(eta):.3e}), its superharmonic resonance "
            f"cannot be tracked"
        )


def vprnm_residual(
    y: np.ndarray,
    parameter: float,
    *,
    model: SystemModel,
    basis: HarmonicBasis,
    n: int,
    control: VprnmControl,
    psi: np.ndarray | None,
    n_time: int,
    x_static: np.ndarray | None,
    with_jacobian: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Harmonic balance rows, control rows and the phase resonance row.

    Force continuation has unknowns ``[X, Omega]`` and parameter ``f_mag_c``.
    Amplitude continuation has unknowns ``[X, Omega, f_mag_c, f_mag_s]`` and
    parameter ``A_1``. Without ``with_jacobian`` only the residual is exact.
    """
    X = HarmonicSet(basis=basis, coefficients=y[: basis.size])
    omega = float(y[basis.size])
    if isinstance(control, ForceContinuation):
        hbm_control = ControlSpec()
        forcing = ForcingState(f_mag_c=parameter)
    else:
        hbm_control = ControlSpec.amplitude_phase(control.R_1, parameter, control.k)
        forcing = ForcingState(
            f_mag_c=float(y[basis.size + 1]), f_mag_s=float(y[basis.size + 2])
        )
    res = hbm_residual(
        X,
        omega,
        forcing,
        model,
        hbm_control,
        n_time,
        x_static,
        with_jacobian=with_jacobian,
    )
    broad = broadband_excitation(
        X, omega, n, model, n_time, x_static, with_jacobian=with_jacobian
    )
    value, gradient = _constraint_row(X, broad, n, psi, model.M)
    residual = np.append(res.residual, value)
    columns = [res.d_X, res.d_omega]
    if isinstance(control, ForceContinuation):
        d_parameter = res.d_f_mag_c
    else:
        columns += [res.d_f_mag_c, res.d_f_mag_s]
        d_parameter = res.d_A_1
    jacobian = np.column_stack(columns)
    constraint_row = np.zeros(jacobian.shape[1])
    constraint_row[: basis.size] = gradient
    return (
        residual,
        np.vstack([jacobian, constraint_row]),
        np.append(d_parameter, 0.0),
    )


def vprnm_initial_guess(
    model: SystemModel,
    n: int,
    control: VprnmControl,
    parameter: float,
    basis: HarmonicBasis,
    super_mode: int,
    *,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
) -> np.ndarray:
    """Linear start at ``omega_super / n`` with the superharmonic response added.

    The fundamental is the stuck linear response. The broadband excitation of
    that motion is then applied as a harmonic ``n`` force to the stuck linear
    system.
    """
    omegas, _ = linear_modes(model, 'stuck')
    omega = float(omegas[super_mode - 1] / n)
    if isinstance(control, ForceContinuation):
        hbm_control = ControlSpec()
        forcing = ForcingState(f_mag_c=parameter)
    else:
        hbm_control = ControlSpec.amplitude_phase(control.R_1, parameter, control.k)
        forcing = None
    X, forcing = linear_initial_guess(
        model, omega, basis, hbm_control, forcing, x_static
    )
    broad = broadband_excitation(X, omega, n, model, n_time, x_static)
    response = linear_frf(
        model, n * omega, 'stuck', force=broad.cosine - 1j * broad.sine
    )
    coefficients = X.coefficients.copy()
    coefficients[basis.block(n, 'c')] = response.real
    coefficients[basis.block(n, 's')] = -response.imag
    extra = [omega]
    if isinstance(control, AmplitudeContinuation):
        extra += [forcing.f_mag_c, forcing.f_mag_s]
    return np.concatenate([coefficients, extra])


def vprnm_backbone(
    model: SystemModel,
    n: int,
    control: VprnmControl,
    basis: HarmonicBasis,
    *,
    constraint: ConstraintFilter = 'basic',
    fundamental_mode: int = 1,
    super_mode: int | None = None,
    filter_state: StiffnessState = 'stuck',
    n_time: int = 1024,
    sopts: SolverOptions | None = None,
    copts: ContinuationOptions | None = None,
    initial_opts: SolverOptions | None = None,
) -> VprnmBackbone:
    """Continue a superharmonic resonance in force or amplitude.

    Parameters
    ----------
    model:
        The structure.
    n:
        Superharmonic index.
    control:
        Force range, or controlled amplitude range with phase control.
    basis:
        Harmonics of the motion, including 1 and ``n``.
    constraint:
        ``'basic'`` for the unfiltered constraint, ``'modal'`` to project on
        the linear shape of ``super_mode``.
    fundamental_mode:
        1-based mode driven at the forcing frequency.
    super_mode:
        1-based mode in superharmonic resonance, defaults to the mode whose
        frequency ratio to ``fundamental_mode`` is nearest ``n``.
    filter_state:
        Linearization of the modal filter shape.
    n_time:
        Samples per cycle.
    sopts:
        Corrector settings during continuation.
    copts:
        Step control.
    initial_opts:
        Settings of the start point solve, with line search by default.

    Raises
    ------
    NoSuperharmonicExcitationError
        If the broadband excitation does not force the superharmonic mode.
    ConvergenceError
        If the start point does not converge.
    """
    _require_harmonic(basis, n)
    if 1 not in basis.harmonics:
        raise ValueError(f"Harmonic 1 is not in the basis {basis.harmonics}")
    tic = time.perf_counter()
    super_mode = (
        paired_mode(model, n, fundamental_mode) if super_mode is None else super_mode
    )
    shape = modal_filter_shape(model, super_mode, filter_state)
    psi = shape if constraint == 'modal' else None
    x_static = prestress_solve(model, sopts)
    if isinstance(control, ForceContinuation):
        low, high = control.f_range
        kind: Literal['force', 'amplitude'] = 'force'
    else:
        low, high = control.A_range
        kind = 'amplitude'
    if not 0 < low < high:
        raise ValueError(f"Invalid continuation range {(low, high)}")

    y0 = vprnm_initial_guess(
        model, n, control, low, basis, super_mode, n_time=n_time, x_static=x_static
    )
    start_X = HarmonicSet(basis=basis, coefficients=y0[: basis.size])
    _check_modal_excitation(
        shape,
        broadband_excitation(start_X, y0[basis.size], n, model, n_time, x_static),
        super_mode,
    )

    def fun(
        y: np.ndarray, parameter: float, with_jacobian: bool = True
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return vprnm_residual(
            y,
            parameter,
            model=model,
            basis=basis,
            n=n,
            control=control,
            psi=psi,
            n_time=n_time,
            x_static=x_static,
            with_jacobian=with_jacobian,
        )

    def residual_only(y: np.ndarray, parameter: float) -> np.ndarray:
        return fun(y, parameter, False)[0]

    def fixed(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        residual, d_y, _ = fun(y, low)
        return residual, d_y

    base = SolverOptions() if sopts is None else sopts
    initial_opts = (
        dataclasses.replace(base, line_search=True, jacobian_refresh_period=1)
        if initial_opts is None
        else initial_opts
    )
    y_start, diagnostics = solve(fixed, y0, initial_opts)
    if not diagnostics.converged:
        raise ConvergenceError(
            f"Superharmonic resonance start point did not converge at {kind} {low}: "
            f"residual norm {diagnostics.residual_norm:.3e}",
            initial_guess=y0,
            diagnostics=diagnostics,
        )
    branch = continue_branch(
        fun, y_start, low, (low, high), copts, sopts, residual_only=residual_only
    )
    backbone = VprnmBackbone(
        n=n,
        basis=basis,
        continuation=kind,
        super_mode=super_mode,
        psi=psi,
        truncated=branch.truncated,
        message=branch.message,
    )
    if branch.truncated and psi is None:
        backbone.message += "; the modal filter may avoid spurious constraint roots"
    for point in branch:
        X = HarmonicSet(basis=basis, coefficients=point.unknowns[: basis.size])
        omega = float(point.unknowns[basis.size])
        if kind == 'force':
            forcing = ForcingState(f_mag_c=point.parameter)
            amplitude = float('nan')
        else:
            forcing = ForcingState(
                f_mag_c=float(point.unknowns[basis.size + 1]),
                f_mag_s=float(point.unknowns[basis.size + 2]),
            )
            amplitude = point.parameter
        broad = broadband_excitation(X, omega, n, model, n_time, x_static)
        value, _ = _constraint_row(X, broad, n, psi, model.M)
        backbone.points.append(
            VprnmPoint(
                X=X,
                omega=omega,
                forcing=forcing,
                n=n,
                constraint_value=value,
                F_broad=(broad.cosine, broad.sine),
                control_amplitude=amplitude,
            )
        )
    backbone.elapsed = time.perf_counter() - tic
    logger.info(
        "Superharmonic resonance {}:1 of mode {} with {} points in {:.2f} s",
        n,
        super_mode,
        len(backbone),
        backbone.elapsed,
    )
    return backbone


class ExcitationShare(NamedTuple):
    magnitude: float
    phase: float
    """Four-quadrant angle of ``(eta_s, eta_c)``."""
    eta_c: float
    eta_s: float


def excitation_decomposition(
    X: HarmonicSet,
    omega: float,
    n: int,
    model: SystemModel,
    psi: np.ndarray,
    *,
    subset: Sequence[int] | None = None,
    dof_mask: np.ndarray | None = None,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
) -> ExcitationShare:
    """Modal forcing of ``psi`` by the broadband excitation of selected slots.

    Parameters
    ----------
    X:
        Harmonics of a harmonic balance or superharmonic resonance point.
    omega:
        Fundamental frequency in rad/s.
    n:
        Superharmonic index.
    model:
        The structure.
    psi:
        Mode shape the excitation is projected on.
    subset:
        Indices of the contributing slots, all slots by default.
    dof_mask:
        Per-DOF weights of the force distribution, for example ones in one
        direction and zeros elsewhere.
    n_time:
        Samples per cycle.
    x_static:
        Static state of the element histories.
    """
    indices = range(len(model.slots)) if subset is None else subset
    slots = [model.slots[i] for i in indices]
    if dof_mask is not None:
        mask = np.asarray(dof_mask, dtype=float)
        slots = [slot.with_t_col(slot.t_col * mask) for slot in slots]
    if not slots:
        logger.warning("Excitation decomposition of an empty slot subset is zero")
        return ExcitationShare(0.0, 0.0, 0.0, 0.0)
    broad = broadband_excitation(X, omega, n, model, n_time, x_static, slots=slots)
    eta_c, eta_s = float(psi @ broad.cosine), float(psi @ broad.sine)
    return ExcitationShare(
        magnitude=float(np.hypot(eta_c, eta_s)),
        phase=float(np.arctan2(eta_s, eta_c)),
        eta_c=eta_c,
        eta_s=eta_s,
    )


def constraint_along_branch(
    branch: FrcBranch,
    n: int,
    model: SystemModel,
    *,
    psi: np.ndarray | None = None,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
) -> np.ndarray:
    """Phase resonance constraint at every point of a forced response curve.

    Points where the constraint is undefined hold NaN.
    """
    values = np.full(len(branch), np.nan)
    for i, point in enumerate(branch.points):
        broad = broadband_excitation(point.X, point.omega, n, model, n_time, x_static)
        forces = (broad.cosine, broad.sine)
        try:
            if psi is None:
                values[i] = vprnm_constraint(point.X, forces, n)
            else:
                values[i] = vprnm_constraint_modal(point.X, forces, psi, model.M, n)
        except NoSuperharmonicExcitationError:
            continue
    return values


def sign_change_brackets(
    omega: np.ndarray, values: np.ndarray
) -> list[tuple[float, float]]:
    """Frequency intervals between neighbouring points where the sign changes.

    NaN values never bracket a change.
    """
    brackets = []
    for i in range(len(values) - 1):
        a, b = values[i], values[i + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == 0.0 or a * b < 0.0:
            low, high = sorted((float(omega[i]), float(omega[i + 1])))
            brackets.append((low, high))
    return brackets


def sign_change_frequencies(omega: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Linearly interpolated frequencies of the sign changes, NaN gaps excluded."""
    return crossings(omega, values)


def point_residual_norm(
    point: VprnmPoint,
    model: SystemModel,
    control: VprnmControl,
    psi: np.ndarray | None = None,
    n_time: int = 1024,
    x_static: np.ndarray | None = None,
) -> float:
    """Residual norm of a phase resonant point including its constraint row."""
    y = [*point.X.coefficients, point.omega]
    if isinstance(control, ForceContinuation):
        parameter = point.forcing.f_mag_c
    else:
        y += [point.forcing.f_mag_c, point.forcing.f_mag_s]
        parameter = point.control_amplitude
    residual, _, _ = vprnm_residual(
        np.array(y),
        parameter,
        model=model,
        basis=point.X.basis,
        n=point.n,
        control=control,
        psi=psi,
        n_time=n_time,
        x_static=x_static,
    )
    return float(np.linalg.norm(residual))
