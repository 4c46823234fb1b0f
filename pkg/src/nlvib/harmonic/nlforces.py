# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Hysteretic force elements and their alternating frequency-time evaluation."""

from __future__ import annotations

import dataclasses
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from loguru import logger

from .fourier import HarmonicSet, projection_basis, time_basis


class LocalResponse(NamedTuple):
    """Steady force series of one element and its exact discrete tangent."""

    force: np.ndarray
    """Force at each sample of the second cycle."""
    tangent: np.ndarray | None
    """``d force[j] / d u[i]`` of shape ``(n_time, n_time)``, if requested."""
    settled: bool
    """Whether the element state repeated between the end of both cycles."""


@dataclass
class SliderHistory:
    """Previous displacement and per-slider forces of an Iwan element."""

    displacement: float
    forces: np.ndarray


@dataclass(frozen=True, eq=False)
class IwanElement:
    """Four-parameter Iwan element discretized into parallel Jenkins sliders.

    Slider forces ``f_phi`` carry units of displacement and are clipped to the
    slider breakpoint ``phi``. The weights carry the slip-strength density so
    that ``weights @ f_phi`` is a force.
    """

    k_t: float
    F_s: float
    chi: float
    beta: float
    n_sliders: int
    breakpoints: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    history: SliderHistory | None = field(default=None, repr=False, compare=False)

    @property
    def phi_max(self) -> float:
        return iwan_phi_max(self.k_t, self.F_s, self.chi, self.beta)

    @property
    def stuck_stiffness(self) -> float:
        """Tangent stiffness while every slider sticks."""
        return float(self.weights.sum())

    @property
    def saturation_force(self) -> float:
        """Force once every slider slips."""
        return float(self.weights @ self.breakpoints)

    def with_history(self, x_static: float) -> IwanElement:
        history = SliderHistory(
            displacement=float(x_static), forces=np.zeros_like(self.breakpoints)
        )
        return dataclasses.replace(self, history=history)

    def step(self, x: float) -> float:
        if self.history is None:
            raise ValueError(
                "Iwan element history is not initialized, call init_history first"
            )
        trial = self.history.forces + (x - self.history.displacement)
        forces = np.where(
            np.abs(trial) < self.breakpoints,
            trial,
            np.copysign(self.breakpoints, trial),
        )
        self.history.displacement = float(x)
        self.history.forces = forces
        return float(self.weights @ forces)

    def virgin_force(self, x: float) -> tuple[float, float]:
        """Force and tangent after loading from a relaxed state at 0 to ``x``."""
        forces = np.clip(x, -self.breakpoints, self.breakpoints)
        stuck = np.abs(x) < self.breakpoints
        return float(self.weights @ forces), float(self.weights[stuck].sum())

    def march(
        self, u: np.ndarray, x_static: float = 0.0, tangent: bool = True
    ) -> LocalResponse:
        """March one period of displacements twice from a relaxed state.

        The derivative of each slider force with respect to the samples follows
        from the last sample at which the slider slipped: a stuck slider carries
        ``u[j] - u[anchor]`` plus a constant, a slipping slider is constant.
        Sliders that never slipped are anchored to ``x_static``.
        """
        n_time = u.size
        phi = self.breakpoints
        forces = np.zeros_like(phi)
        previous = float(x_static)
        last_slip = np.full(phi.size, -1, dtype=np.intp)
        stuck = np.empty((n_time, phi.size), dtype=bool)
        anchor = np.empty((n_time, phi.size), dtype=np.intp)
        series = np.empty(n_time)
        end_of_first = forces
        for cycle in range(2):
            for j in range(n_time):
                trial = forces + (u[j] - previous)
                slipping = np.abs(trial) >= phi
                forces = np.where(slipping, np.copysign(phi, trial), trial)
                previous = u[j]
                last_slip[slipping] = j
                if cycle == 1:
                    stuck[j] = ~slipping
                    anchor[j] = last_slip
                    series[j] = self.weights @ forces
            if cycle == 0:
                end_of_first = forces
        settled = bool(
            np.allclose(forces, end_of_first, rtol=0.0, atol=1e-12 * (1.0 + phi[-1]))
        )
        if not tangent:
            return LocalResponse(force=series, tangent=None, settled=settled)
        stuck_weights = stuck * self.weights
        rows = np.broadcast_to(np.arange(n_time)[:, np.newaxis], anchor.shape)
        anchored = stuck & (anchor >= 0)
        derivative = np.zeros((n_time, n_time))
        np.add.at(
            derivative, (rows[anchored], anchor[anchored]), -stuck_weights[anchored]
        )
        derivative[np.diag_indices(n_time)] += stuck_weights.sum(axis=1)
        return LocalResponse(force=series, tangent=derivative, settled=settled)


@dataclass(frozen=True)
class LinearSpring:
    """Memoryless linear spring, useful as a reference element."""

    stiffness: float

    @property
    def stuck_stiffness(self) -> float:
        return self.stiffness

    def with_history(self, x_static: float) -> LinearSpring:
        return self

    def step(self, x: float) -> float:
        return self.stiffness * x

    def virgin_force(self, x: float) -> tuple[float, float]:
        return self.stiffness * x, self.stiffness

    def march(
        self, u: np.ndarray, x_static: float = 0.0, tangent: bool = True
    ) -> LocalResponse:
        return LocalResponse(
            force=self.stiffness * u,
            tangent=self.stiffness * np.eye(u.size) if tangent else None,
            settled=True,
        )


HystereticElement = IwanElement | LinearSpring


@dataclass(frozen=True, eq=False)
class ElementSlot:
    """An element attached to the structure.

    The local displacement is ``q_row @ x`` and the element force is
    distributed to the DOFs as ``t_col * f``.
    """

    element: HystereticElement
    q_row: np.ndarray
    t_col: np.ndarray
    label: str = ''
    tangential: bool = False
    """Tangential elements carry no force in the static prestress solution."""

    def __post_init__(self) -> None:
        q_row = np.asarray(self.q_row, dtype=float).ravel()
        t_col = np.asarray(self.t_col, dtype=float).ravel()
        if q_row.shape != t_col.shape:
            raise ValueError(
                f"q_row and t_col must have the same length, got {q_row.size} "
                f"and {t_col.size}"
            )
        object.__setattr__(self, 'q_row', q_row)
        object.__setattr__(self, 't_col', t_col)

    @property
    def stiffness_matrix(self) -> np.ndarray:
        """Stuck stiffness distributed to the DOFs, ``k T Q``."""
        return self.element.stuck_stiffness * np.outer(self.t_col, self.q_row)

    def with_t_col(self, t_col: np.ndarray) -> ElementSlot:
        return dataclasses.replace(self, t_col=t_col)


def iwan_phi_max(k_t: float, F_s: float, chi: float, beta: float) -> float:
    """Largest slider breakpoint of the four-parameter Iwan distribution."""
    return F_s * (1 + beta) / (k_t * (beta + (chi + 1) / (chi + 2)))


def build_iwan(
    k_t: float, F_s: float, chi: float, beta: float = 0.0, n_sliders: int = 100
) -> IwanElement:
    """Discretize the four-parameter Iwan model into Jenkins sliders.

    The interval ``(0, phi_max]`` is split into ``n_sliders`` uniform intervals.
    The weight of each slider is the exact integral of the power-law density
    over its interval and the slider sits at the density-weighted centroid of
    the interval, so the saturation force is ``F_s`` for any ``chi``. For
    ``beta > 0`` one more slider at ``phi_max`` carries the lumped part of the
    distribution.

    Parameters
    ----------
    k_t:
        Stiffness at small displacements in N/m.
    F_s:
        Force at which every slider slips in N.
    chi:
        Exponent of the power-law density, larger than -1.
    beta:
        Ratio of the lumped to the distributed slip strength.
    n_sliders:
        Number of sliders discretizing the power-law part.

    Returns
    -------
    :
        An element without history.
    """
    if k_t <= 0 or F_s <= 0:
        raise ValueError(f"k_t and F_s must be positive, got k_t={k_t}, F_s={F_s}")
    if chi <= -1:
        raise ValueError(f"chi must be larger than -1 to be integrable, got {chi}")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    if n_sliders < 1:
        raise ValueError(f"n_sliders must be at least 1, got {n_sliders}")
    phi_max = iwan_phi_max(k_t, F_s, chi, beta)
    scale = F_s / (phi_max * (beta + (chi + 1) / (chi + 2)))
    edges = np.linspace(0.0, 1.0, n_sliders + 1)
    mass = np.diff(edges ** (chi + 1))
    moment = (chi + 1) / (chi + 2) * np.diff(edges ** (chi + 2))
    breakpoints = moment / mass * phi_max
    weights = scale * mass
    if beta > 0:
        breakpoints = np.append(breakpoints, phi_max)
        weights = np.append(weights, scale * beta)
    return IwanElement(
        k_t=k_t,
        F_s=F_s,
        chi=chi,
        beta=beta,
        n_sliders=n_sliders,
        breakpoints=breakpoints,
        weights=weights,
    )


def init_history(element: HystereticElement, x_static: float) -> HystereticElement:
    """Copy of ``element`` with sliders at ``x_static`` and zero traction."""
    return element.with_history(x_static)


def local_force_step(element: HystereticElement, x: float) -> float:
    """Advance the element history to displacement ``x`` and return the force."""
    return element.step(x)


class AftResult(NamedTuple):
    forces: HarmonicSet
    """Harmonics of the nonlinear forces distributed to the DOFs."""
    jacobian: np.ndarray | None
    """Derivative of the force coefficients with respect to the motion coefficients."""
    settled: bool


def aft_force(
    slots: Sequence[ElementSlot],
    X: HarmonicSet,
    omega: float,
    n_time: int = 1024,
    x_static_local: Sequence[float] | np.ndarray | None = None,
    with_jacobian: bool = True,
) -> AftResult:
    """Nonlinear forces by alternating between frequency and time domain.

    Each local displacement series is marched through two identical cycles,
    starting from sliders relaxed at the static displacement, and the second
    cycle is transformed back.

    Parameters
    ----------
    slots:
        Elements and their attachment to the DOFs.
    X:
        Harmonics of the motion.
    omega:
        Fundamental frequency in rad/s. The supported elements depend on
        displacement only, so the result does not depend on it.
    n_time:
        Number of samples per cycle.
    x_static_local:
        Local static displacement of each slot, defaults to zeros.
    with_jacobian:
        Skip the tangents and return no Jacobian if false.

    Returns
    -------
    :
        Force harmonics (including the static force at harmonic 0), their
        Jacobian and whether all histories settled in one cycle.
    """
    basis = X.basis
    basis.validate_samples(n_time)
    if x_static_local is None:
        x_static_local = np.zeros(len(slots))
    if len(x_static_local) != len(slots):
        raise ValueError(
            f"Got {len(x_static_local)} static displacements for {len(slots)} slots"
        )
    to_time = time_basis(basis, n_time)
    to_frequency = projection_basis(basis, n_time)
    motion = X.as_matrix()
    forces = np.zeros_like(motion)
    jacobian = np.zeros((basis.size, basis.size)) if with_jacobian else None
    settled = True
    for slot, x_static in zip(slots, x_static_local, strict=True):
        if slot.q_row.size != basis.num_dof:
            raise ValueError(
                f"Slot {slot.label!r} acts on {slot.q_row.size} DOFs but the motion "
                f"has {basis.num_dof}"
            )
        response = slot.element.march(
            to_time @ (motion @ slot.q_row), x_static, tangent=with_jacobian
        )
        forces += np.outer(to_frequency @ response.force, slot.t_col)
        if jacobian is not None:
            local_jacobian = to_frequency @ response.tangent @ to_time
            jacobian += np.kron(local_jacobian, np.outer(slot.t_col, slot.q_row))
        if not response.settled:
            logger.warning(
                "Hysteresis of slot {!r} did not settle within one cycle", slot.label
            )
            settled = False
    return AftResult(
        forces=HarmonicSet(basis=basis, coefficients=forces.ravel()),
        jacobian=jacobian,
        settled=settled,
    )
