# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Reduced order models assembled from nonlinear mode backbones.

Single mode models give forced responses at constant force or at constant
amplitude. The superharmonic model combines a fundamental and a superharmonic
backbone with one phase resonant point to reconstruct internally resonant
forced responses without solving nonlinear equations.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from .epmc import Backbone, EpmcPoint, upsample_backbone
from .fourier import HarmonicBasis, HarmonicSet
from .hbm import ForcingState
from .utils import wrap_phase
from .vprnm import VprnmBackbone, VprnmPoint


@dataclass(frozen=True, eq=False)
class ComplexMode:
    """Complex first harmonic shape ``(X_1c - i X_1s) / q`` of a backbone point."""

    psi: np.ndarray
    q: float
    omega: float
    zeta: float

    @classmethod
    def from_point(cls, point: EpmcPoint) -> ComplexMode:
        return cls(psi=point.shape, q=point.q, omega=point.omega, zeta=point.zeta)

    @property
    def p2(self) -> float:
        return self.omega**2 - 2 * (self.omega * self.zeta) ** 2

    def modal_force(self, force: np.ndarray) -> complex:
        """``psi^H F``."""
        return complex(np.conj(self.psi) @ force)


def forcing_frequencies(mode: ComplexMode, modal_force: float) -> np.ndarray:
    """Real positive frequencies at which the mode reaches its amplitude ``q``.

    Both roots of the single mode amplitude equation, lower root first. Empty
    if the modal force cannot drive the mode to ``q``.
    """
    discriminant = mode.p2**2 - mode.omega**4 + modal_force**2 / mode.q**2
    if discriminant < 0:
        return np.array([])
    root = np.sqrt(discriminant)
    squares = np.array([mode.p2 - root, mode.p2 + root])
    return np.sqrt(squares[squares > 0])


def response_phase(mode: ComplexMode, modal_force: complex, omega: float) -> float:
    """Phase lag of the modal response behind the modal force at ``omega``."""
    dynamic = -(omega**2) + 2j * omega * mode.zeta * mode.omega + mode.omega**2
    return float(np.angle(np.conj(modal_force) * dynamic))


def constant_amplitude_force(
    mode: ComplexMode, modal_force: float, omega: float
) -> float:
    """Force magnitude holding the mode at amplitude ``q`` at ``omega``.

    ``modal_force`` is the modal force per unit force magnitude.
    """
    return float(
        mode.q
        * np.sqrt(omega**4 - 2 * omega**2 * mode.p2 + mode.omega**4)
        / modal_force
    )


@dataclass(frozen=True, eq=False)
class RomPoint:
    omega: float
    q: float
    phi: float
    X: HarmonicSet


@dataclass
class RomFrc:
    """Single mode forced response in frequency order."""

    points: list[RomPoint] = field(default_factory=list)
    unreached: list[float] = field(default_factory=list)
    """Modal amplitudes the force cannot reach."""

    def __len__(self) -> int:
        return len(self.points)

    @property
    def omega(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    @property
    def q(self) -> np.ndarray:
        return np.array([p.q for p in self.points])

    def amplitude(self, n: int, dof: int) -> np.ndarray:
        return np.array([p.X.amplitude(n)[dof] for p in self.points])

    def at(self, omega: float) -> RomPoint | None:
        """Point at ``omega`` on the segment with the largest modal amplitude.

        Coefficients are interpolated linearly in frequency. ``None`` if no
        segment spans ``omega``.
        """
        best = None
        for left, right in zip(self.points, self.points[1:], strict=False):
            low, high = sorted((left.omega, right.omega))
            if not low <= omega <= high:
                continue
            span = right.omega - left.omega
            w = 0.0 if span == 0 else (omega - left.omega) / span
            q = (1 - w) * left.q + w * right.q
            if best is None or q > best[0]:
                best = (q, left, right, w)
        if best is None:
            return None
        q, left, right, w = best
        if w == 0.0:
            return left
        if w == 1.0:
            return right
        return RomPoint(
            omega=omega,
            q=q,
            phi=float((1 - w) * left.phi + w * right.phi),
            X=left.X.with_coefficients(
                (1 - w) * left.X.coefficients + w * right.X.coefficients
            ),
        )


def _constant_force_curve(
    backbone: Backbone,
    q_list: Sequence[float],
    modal_force: Callable[[ComplexMode], complex],
) -> RomFrc:
    lower, upper = [], []
    result = RomFrc()
    for q in q_list:
        point = backbone.at(q)
        mode = ComplexMode.from_point(point)
        force = modal_force(mode)
        omegas = forcing_frequencies(mode, abs(force))
        if omegas.size == 0:
            result.unreached.append(float(q))
            continue
        # a single positive root is the upper one
        for omega, branch in zip(omegas[::-1], (upper, lower), strict=False):
            phi = response_phase(mode, force, omega)
            branch.append(RomPoint(float(omega), float(q), phi, point.X.rotated(phi)))
    result.points = lower + upper[::-1]
    return result


def epmc_frc_constant_force(
    backbone: Backbone, F_ext1: np.ndarray, q_list: Sequence[float] | None = None
) -> RomFrc:
    """Forced response at constant force from one nonlinear mode.

    Parameters
    ----------
    backbone:
        Nonlinear mode backbone.
    F_ext1:
        Complex first harmonic force ``(f_mag_c - i f_mag_s) F_ext``.
    q_list:
        Modal amplitudes to evaluate, defaults to the backbone samples.

    Returns
    -------
    :
        Points on the lower frequency root by increasing ``q`` followed by
        the upper root by decreasing ``q``. Each point is the backbone motion
        rotated to the response phase; the static row is kept.
    """
    q_list = backbone.q if q_list is None else q_list
    F_ext1 = np.asarray(F_ext1, dtype=complex)
    result = _constant_force_curve(
        backbone, q_list, lambda mode: mode.modal_force(F_ext1)
    )
    if result.unreached:
        logger.debug(
            "The force does not reach {} of {} modal amplitudes",
            len(result.unreached),
            len(q_list),
        )
    return result


def amplitude_to_q(
    backbone: Backbone, R: np.ndarray, amplitude: float, name: str = 'backbone'
) -> float:
    """Modal amplitude at which ``|R X_1|`` first reaches ``amplitude``."""
    values = np.array([abs(R @ p.X.complex_amplitude(1)) for p in backbone.points])
    i, w = _locate(values, amplitude, name)
    q = backbone.q
    return float(q[i] if w == 0.0 else (1 - w) * q[i] + w * q[i + 1])


def epmc_force_constant_amplitude(
    backbone: Backbone,
    A_1: float,
    R_1: np.ndarray,
    F_ext: np.ndarray,
    omega_list: Sequence[float] | np.ndarray,
    k: int = 0,
) -> np.ndarray:
    """Force magnitude holding ``Omega**k |R_1 X_1|`` at ``A_1``, one mode.

    Raises
    ------
    ValueError
        If the amplitude is outside the range covered by the backbone.
    """
    forces = []
    for omega in np.asarray(omega_list, dtype=float):
        target = A_1 / omega**k
        q = amplitude_to_q(backbone, R_1, target)
        mode = ComplexMode.from_point(backbone.at(q))
        per_unit = abs(mode.modal_force(F_ext))
        forces.append(constant_amplitude_force(mode, per_unit, omega))
    return np.array(forces)


def _locate(
    values: np.ndarray, target: float, name: str, last: bool = False
) -> tuple[int, float]:
    """First segment where ``values`` reaches ``target``; weight of the right end.

    With ``last`` the segments are scanned from the end instead.
    """
    order = range(values.size - 1, -1, -1) if last else range(values.size)
    for i in order:
        value = values[i]
        if value == target:
            return i, 0.0
        if i + 1 < values.size and (value - target) * (values[i + 1] - target) < 0:
            return i, float((target - value) / (values[i + 1] - value))
    raise ValueError(
        f"Amplitude {target:.6g} is outside the range "
        f"[{values.min():.6g}, {values.max():.6g}] of the {name}"
    )


def _blend(left: EpmcPoint, right: EpmcPoint, w: float) -> EpmcPoint:
    if w == 0.0:
        return left
    return EpmcPoint(
        q=(1 - w) * left.q + w * right.q,
        omega=(1 - w) * left.omega + w * right.omega,
        xi=(1 - w) * left.xi + w * right.xi,
        X=left.X.with_coefficients(
            (1 - w) * left.X.coefficients + w * right.X.coefficients
        ),
    )


def _at_amplitude(
    backbone: Backbone,
    R: np.ndarray,
    amplitude: float,
    name: str,
    last: bool = False,
) -> EpmcPoint:
    values = np.array([abs(R @ p.X.complex_amplitude(1)) for p in backbone.points])
    i, w = _locate(values, amplitude, name, last)
    right = backbone.points[min(i + 1, len(backbone) - 1)]
    return _blend(backbone.points[i], right, w)


def _phase(R: np.ndarray, X: HarmonicSet, n: int) -> float:
    return float(np.arctan2(R @ X.sine(n), R @ X.cosine(n)))


def _warn_near_node(
    R: np.ndarray, X: HarmonicSet, n: int, what: str, tol: float
) -> None:
    extracted = abs(R @ X.complex_amplitude(n))
    largest = np.abs(X.complex_amplitude(n)).max()
    if extracted < tol * largest:
        logger.warning(
            "The {} extraction row is near a node of harmonic {}: |R X| = {:.3e} "
            "against a largest component of {:.3e}",
            what,
            n,
            extracted,
            largest,
        )


@dataclass(frozen=True, eq=False)
class RomBundle:
    """Everything needed to evaluate the superharmonic reduced order model."""

    n: int
    A_rom: float
    R_1: np.ndarray
    R_n: np.ndarray
    F_ext: np.ndarray
    vprnm_point: VprnmPoint
    fundamental: EpmcPoint
    superharmonic: EpmcPoint
    super_backbone: Backbone
    """Superharmonic backbone with rescaled frequencies and the matched point."""
    modal_force: float
    """Approximate modal force ``|psi_S^H F_S|`` of the superharmonic mode."""
    apply_force_correction: bool = False

    @property
    def omega_vprnm(self) -> float:
        return self.vprnm_point.omega

    @property
    def f_mag_vprnm(self) -> float:
        return self.vprnm_point.forcing.magnitude

    @property
    def frequency_scale(self) -> float:
        """Factor from superharmonic mode frequencies to ``n Omega_VPRNM``."""
        return self.n * self.vprnm_point.omega / self.superharmonic.omega


def interpolate_vprnm(
    backbone: VprnmBackbone, R_1: np.ndarray, A_1: float
) -> VprnmPoint:
    """Phase resonant point whose first harmonic ``|R_1 X_1|`` equals ``A_1``."""
    values = np.array([abs(R_1 @ p.X.complex_amplitude(1)) for p in backbone.points])
    i, w = _locate(values, A_1, 'superharmonic resonance backbone')
    left = backbone.points[i]
    if w == 0.0:
        return left
    right = backbone.points[i + 1]

    def mix(a: np.ndarray | float, b: np.ndarray | float) -> np.ndarray:
        return (1 - w) * np.asarray(a) + w * np.asarray(b)

    return VprnmPoint(
        X=left.X.with_coefficients(mix(left.X.coefficients, right.X.coefficients)),
        omega=float(mix(left.omega, right.omega)),
        forcing=ForcingState(
            f_mag_c=float(mix(left.forcing.f_mag_c, right.forcing.f_mag_c)),
            f_mag_s=float(mix(left.forcing.f_mag_s, right.forcing.f_mag_s)),
        ),
        n=left.n,
        constraint_value=float(mix(left.constraint_value, right.constraint_value)),
        F_broad=(
            mix(left.F_broad[0], right.F_broad[0]),
            mix(left.F_broad[1], right.F_broad[1]),
        ),
        control_amplitude=float(mix(left.control_amplitude, right.control_amplitude)),
    )


def vprnm_rom_build(
    fund_backbone: Backbone,
    super_backbone: Backbone,
    vprnm_backbone: VprnmBackbone,
    A_rom: float,
    R_1: np.ndarray,
    R_n: np.ndarray,
    F_ext: np.ndarray,
    *,
    apply_force_correction: bool = False,
    upsample: int = 1,
    node_tolerance: float = 1e-3,
) -> RomBundle:
    """Interpolate the backbones at one controlled amplitude.

    Parameters
    ----------
    fund_backbone:
        Backbone of the mode driven at the forcing frequency, computed without
        harmonic ``n``.
    super_backbone:
        Backbone of the mode in superharmonic resonance.
    vprnm_backbone:
        Phase resonant superharmonic points.
    A_rom:
        Controlled first harmonic amplitude ``|R_1 X_1|``.
    R_1, R_n:
        Extraction rows of the fundamental and superharmonic amplitudes.
    F_ext:
        Force shape of the structure.
    apply_force_correction:
        Add the force difference at the phase resonant point, weighted by the
        superharmonic modal amplitude.
    upsample:
        Densify the superharmonic backbone by this factor first.
    node_tolerance:
        Warn if an extraction row picks up less than this fraction of the
        largest component.

    Raises
    ------
    ValueError
        If an amplitude is outside the range of one of the backbones.
    """
    n = vprnm_backbone.n
    if n in fund_backbone.basis.harmonics:
        logger.warning(
            "The fundamental backbone includes harmonic {}, its internal resonance "
            "is counted twice",
            n,
        )
    R_1 = np.asarray(R_1, dtype=float)
    R_n = np.asarray(R_n, dtype=float)
    point = interpolate_vprnm(vprnm_backbone, R_1, A_rom)
    _warn_near_node(R_1, point.X, 1, 'fundamental', node_tolerance)
    _warn_near_node(R_n, point.X, n, 'superharmonic', node_tolerance)
    super_amplitude = abs(R_n @ point.X.complex_amplitude(n))
    dense = upsample_backbone(super_backbone, upsample)
    # largest q wins where the amplitude is reached more than once
    matched = _at_amplitude(
        dense, R_n, super_amplitude, 'superharmonic backbone', last=True
    )
    modal_force = 2 * matched.q * (n * point.omega) ** 2 * matched.zeta

    scale = n * point.omega / matched.omega
    samples = [p for p in dense.points if p.q != matched.q] + [matched]
    samples.sort(key=lambda p: p.q)
    # xi scales with omega so that the damping fraction is unchanged
    rescaled = dense.with_points(
        [EpmcPoint(p.q, p.omega * scale, p.xi * scale, p.X) for p in samples]
    )
    fundamental = _at_amplitude(fund_backbone, R_1, A_rom, 'fundamental backbone')
    logger.info(
        "Reduced model at A={:.4g}: Omega_VPRNM={:.5g} rad/s, q_S={:.4g}, "
        "q_F={:.4g}, |psi_S^H F_S|={:.4g}",
        A_rom,
        point.omega,
        matched.q,
        fundamental.q,
        modal_force,
    )
    return RomBundle(
        n=n,
        A_rom=A_rom,
        R_1=R_1,
        R_n=R_n,
        F_ext=np.asarray(F_ext, dtype=float),
        vprnm_point=point,
        fundamental=fundamental,
        superharmonic=matched,
        super_backbone=rescaled,
        modal_force=float(modal_force),
        apply_force_correction=apply_force_correction,
    )


@dataclass
class RomEvaluation:
    """Reduced order forced response at constant first harmonic amplitude."""

    omega: np.ndarray
    X: list[HarmonicSet]
    f_mag: np.ndarray
    q_super: np.ndarray
    """Superharmonic modal amplitude, zero where no superharmonic root exists."""
    has_super: np.ndarray

    def amplitude(self, n: int, dof: int) -> np.ndarray:
        return np.array([X.amplitude(n)[dof] for X in self.X])

    def phase(self, n: int, dof: int) -> np.ndarray:
        return np.array([X.phase(n)[dof] for X in self.X])

    def phase_difference(self, n: int, dof: int) -> np.ndarray:
        """``phi_n - n phi_1`` wrapped to ``(-pi, pi]``."""
        return wrap_phase(self.phase(n, dof) - n * self.phase(1, dof))


def assembled_basis(bundle: RomBundle) -> HarmonicBasis:
    fundamental = bundle.fundamental.X.basis
    harmonics = set(fundamental.harmonics) | {0}
    harmonics |= {k * bundle.n for k in bundle.super_backbone.basis.harmonics if k}
    return fundamental.with_harmonics(tuple(sorted(harmonics)))


def vprnm_rom_evaluate(
    bundle: RomBundle, omega_list: Sequence[float] | np.ndarray
) -> RomEvaluation:
    """Assemble the reduced order response at the forcing frequencies.

    The superharmonic mode is evaluated at constant real modal force at
    ``n Omega`` and rotated to the phase of the phase resonant point. The
    fundamental motion is the single interpolated backbone point rotated to
    the phase resonant point. Frequencies without a superharmonic root keep
    the fundamental part only.
    """
    n = bundle.n
    omega_list = np.asarray(omega_list, dtype=float)
    curve = _constant_force_curve(
        bundle.super_backbone, bundle.super_backbone.q, lambda mode: bundle.modal_force
    )
    X_vprnm = bundle.vprnm_point.X
    at_resonance = curve.at(n * bundle.omega_vprnm)
    if at_resonance is None:
        raise ValueError(
            f"The superharmonic response does not reach n Omega_VPRNM = "
            f"{n * bundle.omega_vprnm:.6g} rad/s"
        )
    phi_super = _phase(bundle.R_n, X_vprnm, n) - _phase(bundle.R_n, at_resonance.X, 1)
    phi_fund = _phase(bundle.R_1, X_vprnm, 1) - _phase(
        bundle.R_1, bundle.fundamental.X, 1
    )
    fundamental = bundle.fundamental.X.rotated(phi_fund)

    basis = assembled_basis(bundle)
    base = np.zeros(basis.size)
    if 0 in X_vprnm.basis.harmonics:
        base[basis.block(0)] = X_vprnm.static
    for h in fundamental.basis.harmonics:
        if h == 0:
            continue
        for part in ('c', 's'):
            base[basis.block(h, part)] += fundamental.coefficients[
                fundamental.basis.block(h, part)
            ]

    mode_F = ComplexMode.from_point(bundle.fundamental)
    per_unit = abs(mode_F.modal_force(bundle.F_ext))
    q_max = curve.q.max() if len(curve) else 0.0
    results, forces, q_super, has_super = [], [], [], []
    for omega in omega_list:
        coefficients = base.copy()
        point = curve.at(n * omega)
        if point is not None:
            sup = point.X.rotated(phi_super)
            for k in sup.basis.harmonics:
                if k == 0:
                    continue
                for part in ('c', 's'):
                    coefficients[basis.block(k * n, part)] += sup.coefficients[
                        sup.basis.block(k, part)
                    ]
        results.append(HarmonicSet(basis=basis, coefficients=coefficients))
        q_super.append(point.q if point is not None else 0.0)
        has_super.append(point is not None)
        forces.append(constant_amplitude_force(mode_F, per_unit, omega))
    f_mag = np.array(forces)
    q_super_arr = np.array(q_super)
    if bundle.apply_force_correction and q_max > 0:
        delta = bundle.f_mag_vprnm - constant_amplitude_force(
            mode_F, per_unit, bundle.omega_vprnm
        )
        f_mag = f_mag + delta * q_super_arr / q_max
    return RomEvaluation(
        omega=omega_list,
        X=results,
        f_mag=f_mag,
        q_super=q_super_arr,
        has_super=np.array(has_super, dtype=bool),
    )
