# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Newton and quasi-Newton root finding and pseudo-arclength continuation."""

from __future__ import annotations

import dataclasses
import time
import warnings
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

ResidualFunction = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
ResidualOnly = Callable[[np.ndarray], np.ndarray]
AugmentedResidualFunction = Callable[
    [np.ndarray, float], tuple[np.ndarray, np.ndarray, np.ndarray]
]
AugmentedResidualOnly = Callable[[np.ndarray, float], np.ndarray]


class SingularJacobianError(RuntimeError):
    """The Jacobian could not be factorized."""


class ConvergenceError(RuntimeError):
    """A solve did not converge; carries the initial guess for diagnosis."""

    def __init__(
        self,
        message: str,
        initial_guess: np.ndarray | None = None,
        diagnostics: SolverDiagnostics | None = None,
    ) -> None:
        super().__init__(message)
        self.initial_guess = initial_guess
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SolverOptions:
    """Settings of :func:`newton_solve` and :func:`bfgs_solve`."""

    abs_tol: float = 1e-9
    rel_tol: float = 1e-12
    max_iter: int = 30
    line_search: bool = False
    backtrack_factor: float = 0.5
    max_backtracks: int = 8
    jacobian_refresh_period: int = 1
    """Iterations between Jacobian factorizations, 1 for full Newton."""

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError(
                f"Tolerances must be positive, got abs_tol={self.abs_tol}, "
                f"rel_tol={self.rel_tol}"
            )
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError(
                f"backtrack_factor must be in (0, 1), got {self.backtrack_factor}"
            )
        if self.jacobian_refresh_period < 1:
            raise ValueError(
                f"jacobian_refresh_period must be at least 1, "
                f"got {self.jacobian_refresh_period}"
            )


@dataclass
class SolverDiagnostics:
    converged: bool
    iterations: int
    residual_norm: float
    initial_norm: float
    factorizations: int
    jacobian_evaluations: int = 0
    message: str = ''


def _factor(jacobian: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not np.all(np.isfinite(jacobian)):
        raise SingularJacobianError("The Jacobian contains non-finite values")
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', LinAlgWarning)
        lu, piv = lu_factor(jacobian, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * pivots.size * max(pivots.max(), 1e-300):
        raise SingularJacobianError(
            f"The Jacobian of size {jacobian.shape[0]} is singular to working "
            f"precision"
        )
    return lu, piv


def _is_converged(norm: float, initial_norm: float, opts: SolverOptions) -> bool:
    return norm <= opts.abs_tol or norm <= opts.rel_tol * initial_norm


def _take_step(
    evaluate: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray | None]],
    x: np.ndarray,
    dx: np.ndarray,
    norm: float,
    opts: SolverOptions,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None, float]:
    """Full step, or backtracking on the residual norm if enabled."""
    alpha = 1.0
    best = None
    for _ in range(opts.max_backtracks + 1 if opts.line_search else 1):
        trial = x + alpha * dx
        residual, jacobian = evaluate(trial)
        trial_norm = float(np.linalg.norm(residual))
        if best is None or trial_norm < best[3]:
            best = (trial, residual, jacobian, trial_norm)
        if trial_norm < norm:
            break
        alpha *= opts.backtrack_factor
    assert best is not None  # noqa: S101
    return best


def _inverse_update(
    lu: tuple[np.ndarray, np.ndarray],
    pairs: list[tuple[np.ndarray, np.ndarray]],
    vector: np.ndarray,
) -> np.ndarray:
    """Apply the BFGS-updated inverse Jacobian by the two-loop recursion."""
    q = vector.copy()
    coefficients = []
    for s, y in reversed(pairs):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        coefficients.append((rho, a))
    z = lu_solve(lu, q, check_finite=False)
    for (s, y), (rho, a) in zip(pairs, reversed(coefficients), strict=True):
        b = rho * (y @ z)
        z += s * (a - b)
    return z


def bfgs_solve(
    fun: ResidualFunction,
    x0: np.ndarray,
    opts: SolverOptions | None = None,
    *,
    residual_only: ResidualOnly | None = None,
) -> tuple[np.ndarray, SolverDiagnostics]:
    """Quasi-Newton root finding with periodic Jacobian refresh.

    Every ``jacobian_refresh_period`` iterations the Jacobian is evaluated and
    factorized. In between, the factorization is combined with rank-two BFGS
    updates of the inverse collected since the last refresh.

    Parameters
    ----------
    fun:
        Returns the residual and its Jacobian at a point.
    x0:
        Initial guess.
    opts:
        Tolerances and iteration limits.
    residual_only:
        Returns the residual alone. If given, it replaces ``fun`` at every
        iterate whose Jacobian would not be factorized.

    Returns
    -------
    x: numpy.ndarray
        Best iterate.
    diagnostics: SolverDiagnostics
        Whether and how the iteration converged.

    Raises
    ------
    SingularJacobianError
        If a Jacobian cannot be factorized.
    """
    opts = SolverOptions() if opts is None else opts
    period = opts.jacobian_refresh_period
    jacobian_evaluations = 0

    def with_jacobian(x: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        nonlocal jacobian_evaluations
        jacobian_evaluations += 1
        return fun(x)

    def without_jacobian(x: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        assert residual_only is not None  # noqa: S101
        return residual_only(x), None

    x = np.array(x0, dtype=float)
    residual, jacobian = with_jacobian(x)
    norm = initial_norm = float(np.linalg.norm(residual))
    best_x, best_norm = x, norm
    iterations = factorizations = 0
    lu = None
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    while not _is_converged(norm, initial_norm, opts) and iterations < opts.max_iter:
        if iterations % period == 0 or lu is None:
            assert jacobian is not None  # noqa: S101
            lu = _factor(jacobian)
            factorizations += 1
            pairs = []
        dx = -_inverse_update(lu, pairs, residual)
        refresh_next = (iterations + 1) % period == 0
        evaluate = (
            with_jacobian if refresh_next or residual_only is None else without_jacobian
        )
        x_new, residual_new, jacobian, norm = _take_step(evaluate, x, dx, norm, opts)
        if opts.jacobian_refresh_period > 1:
            s, y = x_new - x, residual_new - residual
            if y @ s > 1e-12 * np.linalg.norm(y) * np.linalg.norm(s):
                pairs.append((s, y))
        x, residual = x_new, residual_new
        iterations += 1
        if norm < best_norm:
            best_x, best_norm = x, norm
    converged = _is_converged(norm, initial_norm, opts)
    if not converged:
        x, norm = best_x, best_norm
    diagnostics = SolverDiagnostics(
        converged=converged,
        iterations=iterations,
        residual_norm=norm,
        initial_norm=initial_norm,
        factorizations=factorizations,
        jacobian_evaluations=jacobian_evaluations,
        message='' if converged else f"No convergence in {iterations} iterations",
    )
    return x, diagnostics


def newton_solve(
    fun: ResidualFunction, x0: np.ndarray, opts: SolverOptions | None = None
) -> tuple[np.ndarray, SolverDiagnostics]:
    """Full Newton-Raphson root finding, optionally with a backtracking line search.

    Parameters
    ----------
    fun:
        Returns the residual and its Jacobian at a point.
    x0:
        Initial guess.
    opts:
        Tolerances and iteration limits. ``jacobian_refresh_period`` is ignored.

    Returns
    -------
    x: numpy.ndarray
        Solution, or the best iterate if the iteration did not converge.
    diagnostics: SolverDiagnostics
        Iteration count, final residual norm and convergence flag.

    Raises
    ------
    SingularJacobianError
        If a Jacobian cannot be factorized.
    """
    opts = SolverOptions() if opts is None else opts
    if opts.jacobian_refresh_period != 1:
        opts = dataclasses.replace(opts, jacobian_refresh_period=1)
    return bfgs_solve(fun, x0, opts)


def solve(
    fun: ResidualFunction,
    x0: np.ndarray,
    opts: SolverOptions | None = None,
    *,
    residual_only: ResidualOnly | None = None,
) -> tuple[np.ndarray, SolverDiagnostics]:
    """Dispatch to Newton or BFGS depending on the refresh period."""
    opts = SolverOptions() if opts is None else opts
    if opts.jacobian_refresh_period == 1:
        return newton_solve(fun, x0, opts)
    return bfgs_solve(fun, x0, opts, residual_only=residual_only)


@dataclass(frozen=True)
class ContinuationOptions:
    """Settings of :func:`continue_branch`.

    Steps are measured on unknowns divided by ``unknown_scaling``. Without an
    explicit scaling, each component is scaled by the largest magnitude it has
    had along the branch, floored at ``scale_floor`` times the largest scale.
    A corrector solution farther than ``max_corrector_distance`` steps from the
    predicted point is rejected like a failed corrector.
    """

    initial_step: float = 0.05
    min_step: float = 1e-5
    max_step: float = 0.5
    target_corrector_iters: int = 4
    unknown_scaling: np.ndarray | None = field(default=None, repr=False)
    scale_floor: float = 1e-2
    max_corrector_distance: float = 1.0
    direction: int = 1
    max_steps: int = 2000

    def __post_init__(self) -> None:
        if not 0 < self.min_step <= self.initial_step <= self.max_step:
            raise ValueError(
                f"Steps must satisfy 0 < min_step <= initial_step <= max_step, got "
                f"{self.min_step}, {self.initial_step}, {self.max_step}"
            )
        if self.direction not in (-1, 1):
            raise ValueError(f"direction must be 1 or -1, got {self.direction}")
        if self.max_corrector_distance <= 0:
            raise ValueError(
                f"max_corrector_distance must be positive, "
                f"got {self.max_corrector_distance}"
            )
        if self.target_corrector_iters < 1:
            raise ValueError(
                f"target_corrector_iters must be at least 1, "
                f"got {self.target_corrector_iters}"
            )
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be at least 1, got {self.max_steps}")


@dataclass
class BranchPoint:
    unknowns: np.ndarray
    parameter: float
    residual_norm: float
    iterations: int
    step: float


@dataclass
class SolutionBranch:
    """Converged points of a continuation run in the order they were traced."""

    points: list[BranchPoint] = field(default_factory=list)
    truncated: bool = False
    message: str = ''
    elapsed: float = 0.0
    """Wall-clock seconds spent tracing the branch."""

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[BranchPoint]:
        return iter(self.points)

    def __getitem__(self, index: int) -> BranchPoint:
        return self.points[index]

    @property
    def unknowns(self) -> np.ndarray:
        return np.array([p.unknowns for p in self.points])

    @property
    def parameters(self) -> np.ndarray:
        return np.array([p.parameter for p in self.points])

    @property
    def residual_norms(self) -> np.ndarray:
        return np.array([p.residual_norm for p in self.points])


def _scales(
    running: np.ndarray, copts: ContinuationOptions
) -> np.ndarray:
    if copts.unknown_scaling is not None:
        return np.asarray(copts.unknown_scaling, dtype=float)
    floor = max(copts.scale_floor * running.max(), np.finfo(float).tiny)
    return np.maximum(running, floor)


def _tangent(
    jacobian: np.ndarray, previous: np.ndarray | None, direction: int
) -> np.ndarray:
    """Unit null vector of the scaled ``(m, m+1)`` Jacobian, oriented."""
    _, _, vt = np.linalg.svd(jacobian)
    tangent = vt[-1]
    if previous is not None:
        sign = np.sign(tangent @ previous)
    else:
        sign = np.sign(tangent[-1]) * direction
    return tangent * (sign if sign != 0 else 1.0)


def _truncate(branch: SolutionBranch, message: str) -> None:
    branch.truncated = True
    branch.message = message
    logger.warning("Continuation truncated: {}", message)


def continue_branch(
    fun: AugmentedResidualFunction,
    start: np.ndarray,
    parameter: float,
    parameter_range: tuple[float, float],
    copts: ContinuationOptions | None = None,
    sopts: SolverOptions | None = None,
    *,
    residual_only: AugmentedResidualOnly | None = None,
) -> SolutionBranch:
    """Trace a solution branch by pseudo-arclength continuation.

    The predictor steps along the unit tangent of the scaled, bordered
    Jacobian. The corrector solves the residual together with the hyperplane
    through the predicted point orthogonal to the tangent, so folds in the
    parameter are passed without special treatment.

    A corrector that fails, lands more than ``max_corrector_distance`` steps
    away from the prediction or leaves a residual above ``abs_tol`` halves the
    step. A step across an end of ``parameter_range`` is replaced by a solve at
    that end, which completes the branch.

    Parameters
    ----------
    fun:
        Returns the residual and its derivatives with respect to the unknowns
        and to the parameter.
    start:
        Unknowns of a (nearly) converged point at ``parameter``.
    parameter:
        Parameter value of the start point.
    parameter_range:
        The branch ends when the parameter reaches an end of this interval.
    copts:
        Step control.
    sopts:
        Corrector settings, ``jacobian_refresh_period > 1`` selects BFGS.
    residual_only:
        Returns the residual alone, used by BFGS between Jacobian refreshes.

    Returns
    -------
    :
        The traced points. The branch is flagged as truncated with a message if
        it stops before reaching an end of the range.

    Raises
    ------
    ConvergenceError
        If the start point cannot be converged at fixed parameter.
    """
    copts = ContinuationOptions() if copts is None else copts
    sopts = SolverOptions() if sopts is None else sopts
    tic = time.perf_counter()
    low, high = min(parameter_range), max(parameter_range)
    if not low <= parameter <= high:
        raise ValueError(
            f"Start parameter {parameter} is outside the range {parameter_range}"
        )

    def residual_at(y: np.ndarray, lam: float) -> np.ndarray:
        if residual_only is not None:
            return residual_only(y, lam)
        return fun(y, lam)[0]

    def solve_fixed(
        guess: np.ndarray, lam: float
    ) -> tuple[np.ndarray, SolverDiagnostics]:
        def fixed(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            residual, d_unknowns, _ = fun(y, lam)
            return residual, d_unknowns

        def fixed_residual(y: np.ndarray) -> np.ndarray:
            return residual_at(y, lam)

        return solve(
            fixed,
            guess,
            sopts,
            residual_only=None if residual_only is None else fixed_residual,
        )

    def accepted(diagnostics: SolverDiagnostics) -> bool:
        return diagnostics.converged and diagnostics.residual_norm <= sopts.abs_tol

    start = np.asarray(start, dtype=float)
    y0, diagnostics = solve_fixed(start, parameter)
    if not accepted(diagnostics):
        raise ConvergenceError(
            f"Start point did not converge at parameter {parameter}: residual norm "
            f"{diagnostics.residual_norm:.3e}",
            initial_guess=start,
            diagnostics=diagnostics,
        )
    branch = SolutionBranch()
    branch.points.append(
        BranchPoint(y0, parameter, diagnostics.residual_norm, diagnostics.iterations, 0)
    )
    z = np.append(y0, parameter)
    running = np.abs(z)
    previous_tangent = None
    step = copts.initial_step
    while True:
        if len(branch) >= copts.max_steps:
            _truncate(
                branch,
                f"Reached {copts.max_steps} points at parameter {z[-1]:.6g} "
                f"inside the range [{low:.6g}, {high:.6g}]",
            )
            break
        scale = _scales(running, copts)
        _, d_unknowns, d_parameter = fun(z[:-1], z[-1])
        bordered = np.column_stack([d_unknowns, d_parameter]) * scale
        tangent = _tangent(
            bordered,
            None if previous_tangent is None else previous_tangent / scale,
            copts.direction,
        )
        predicted = z / scale + step * tangent

        def corrector(
            zs: np.ndarray,
            tangent: np.ndarray = tangent,
            predicted: np.ndarray = predicted,
        ) -> tuple[np.ndarray, np.ndarray]:
            point = zs * scale
            residual, d_y, d_lam = fun(point[:-1], point[-1])
            jacobian = np.vstack([np.column_stack([d_y, d_lam]) * scale, tangent])
            return np.append(residual, tangent @ (zs - predicted)), jacobian

        def corrector_residual(
            zs: np.ndarray,
            tangent: np.ndarray = tangent,
            predicted: np.ndarray = predicted,
        ) -> np.ndarray:
            point = zs * scale
            residual = residual_at(point[:-1], point[-1])
            return np.append(residual, tangent @ (zs - predicted))

        rejection = None
        end_point = None
        try:
            zs, diagnostics = solve(
                corrector,
                predicted,
                sopts,
                residual_only=None if residual_only is None else corrector_residual,
            )
        except SingularJacobianError as err:
            rejection = str(err)
        else:
            distance = float(np.linalg.norm(zs - predicted))
            if not diagnostics.converged:
                rejection = diagnostics.message
            elif distance > copts.max_corrector_distance * step:
                rejection = f"corrector moved {distance / step:.3g} steps away"
        if rejection is None:
            z_new = zs * scale
            if low <= z_new[-1] <= high:
                norm = float(np.linalg.norm(residual_at(z_new[:-1], z_new[-1])))
                if norm > sopts.abs_tol:
                    rejection = f"residual norm {norm:.3e} above abs_tol"
            else:
                end = high if z_new[-1] > high else low
                if z[-1] == end:
                    break
                weight = (end - z[-1]) / (z_new[-1] - z[-1])
                guess = z[:-1] + weight * (z_new[:-1] - z[:-1])
                try:
                    y_end, end_diagnostics = solve_fixed(guess, end)
                except SingularJacobianError as err:
                    rejection = f"no solution at the range end {end:.6g}: {err}"
                else:
                    if accepted(end_diagnostics):
                        end_point = BranchPoint(
                            y_end,
                            float(end),
                            end_diagnostics.residual_norm,
                            end_diagnostics.iterations,
                            step,
                        )
                    else:
                        rejection = f"no solution at the range end {end:.6g}"
        if rejection is not None:
            logger.debug(
                "Rejected step {:.3e} at parameter {:.6g}: {}", step, z[-1], rejection
            )
            step /= 2
            if step < copts.min_step:
                _truncate(
                    branch,
                    f"Step size fell below {copts.min_step} at parameter "
                    f"{z[-1]:.6g} after repeated corrector failures ({rejection})",
                )
                break
            continue
        if end_point is not None:
            branch.points.append(end_point)
            break
        branch.points.append(
            BranchPoint(
                z_new[:-1],
                float(z_new[-1]),
                norm,
                diagnostics.iterations,
                step,
            )
        )
        previous_tangent = tangent * scale
        z = z_new
        running = np.maximum(running, np.abs(z))
        iterations = max(diagnostics.iterations, 1)
        step *= float(np.clip(copts.target_corrector_iters / iterations, 0.5, 2.0))
        step = float(np.clip(step, copts.min_step, copts.max_step))
        logger.debug(
            "Continuation point {} at parameter {:.6g}, step {:.3e}",
            len(branch),
            z[-1],
            step,
        )
    branch.elapsed = time.perf_counter() - tic
    logger.info(
        "Traced {} points up to parameter {:.6g} in {:.2f} s",
        len(branch),
        branch.points[-1].parameter,
        branch.elapsed,
    )
    return branch
