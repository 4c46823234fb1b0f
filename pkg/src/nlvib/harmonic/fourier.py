# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Truncated Fourier representations of multi-DOF periodic motion.

Coefficients are stacked as ``[X_0, X_1c, X_1s, X_2c, X_2s, ...]`` where each
block holds one value per degree of freedom, so that

.. math::

    x(t) = X_0 + \\sum_n X_{nc} \\cos(n \\Omega t) + X_{ns} \\sin(n \\Omega t)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class HarmonicBasis:
    """Harmonics retained in a truncated Fourier series and the number of DOFs."""

    harmonics: tuple[int, ...]
    num_dof: int

    def __post_init__(self) -> None:
        harmonics = tuple(int(h) for h in self.harmonics)
        object.__setattr__(self, 'harmonics', harmonics)
        if not harmonics:
            raise ValueError("A harmonic basis needs at least one harmonic")
        if harmonics[0] < 0:
            raise ValueError(f"Harmonics must be non-negative, got {harmonics}")
        if any(b <= a for a, b in zip(harmonics, harmonics[1:], strict=False)):
            raise ValueError(
                f"Harmonics must be strictly increasing without duplicates, "
                f"got {harmonics}"
            )
        if self.num_dof < 1:
            raise ValueError(f"num_dof must be positive, got {self.num_dof}")

    @property
    def n_components(self) -> int:
        """Number of Fourier components per DOF (1 for harmonic 0, 2 otherwise)."""
        return sum(1 if h == 0 else 2 for h in self.harmonics)

    @property
    def size(self) -> int:
        return self.n_components * self.num_dof

    @property
    def max_harmonic(self) -> int:
        return self.harmonics[-1]

    @property
    def component_harmonics(self) -> np.ndarray:
        """Harmonic number of every component, e.g. ``[0, 1, 1, 3, 3]``."""
        return np.array([h for h in self.harmonics for _ in range(1 if h == 0 else 2)])

    def component(self, n: int, part: str = 'c') -> int:
        """Component index of harmonic ``n``.

        Parameters
        ----------
        n:
            Harmonic number.
        part:
            ``'c'`` for the cosine and ``'s'`` for the sine coefficient.
            Ignored for harmonic 0.

        Returns
        -------
        :
            Position of the component in the stacked layout.
        """
        if n not in self.harmonics:
            raise ValueError(f"Harmonic {n} is not in the basis {self.harmonics}")
        index = 0
        for h in self.harmonics:
            if h == n:
                break
            index += 1 if h == 0 else 2
        if n == 0:
            return index
        if part not in ('c', 's'):
            raise ValueError(f"part must be 'c' or 's', got {part!r}")
        return index + (0 if part == 'c' else 1)

    def block(self, n: int, part: str = 'c') -> slice:
        """Slice of the coefficient vector holding harmonic ``n`` for all DOFs."""
        start = self.component(n, part) * self.num_dof
        return slice(start, start + self.num_dof)

    def with_harmonics(self, harmonics: tuple[int, ...]) -> HarmonicBasis:
        return HarmonicBasis(harmonics=harmonics, num_dof=self.num_dof)

    def validate_samples(self, n_time: int) -> None:
        """Raise if ``n_time`` samples would alias the basis."""
        if n_time < 1 or n_time & (n_time - 1):
            raise ValueError(
                f"The number of time samples must be a power of two, got {n_time}"
            )
        minimum = 4 * self.max_harmonic + 2
        if n_time < minimum:
            raise ValueError(
                f"{n_time} time samples alias harmonic {self.max_harmonic}, "
                f"at least {minimum} are required"
            )


@dataclass(frozen=True, eq=False)
class HarmonicSet:
    """Stacked Fourier coefficients conforming to a :class:`HarmonicBasis`."""

    basis: HarmonicBasis
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        coefficients = np.asarray(self.coefficients, dtype=float)
        if coefficients.shape != (self.basis.size,):
            raise ValueError(
                f"Expected {self.basis.size} coefficients for {self.basis}, "
                f"got shape {coefficients.shape}"
            )
        object.__setattr__(self, 'coefficients', coefficients)

    @classmethod
    def zeros(cls, basis: HarmonicBasis) -> HarmonicSet:
        return cls(basis=basis, coefficients=np.zeros(basis.size))

    @property
    def static(self) -> np.ndarray:
        """Static offsets ``X_0``, zero if the basis has no harmonic 0."""
        if 0 not in self.basis.harmonics:
            return np.zeros(self.basis.num_dof)
        return self.coefficients[self.basis.block(0)]

    def cosine(self, n: int) -> np.ndarray:
        return self.coefficients[self.basis.block(n, 'c')]

    def sine(self, n: int) -> np.ndarray:
        return self.coefficients[self.basis.block(n, 's')]

    def amplitude(self, n: int) -> np.ndarray:
        """Per-DOF amplitude ``sqrt(X_nc**2 + X_ns**2)`` (``|X_0|`` for n=0)."""
        if n == 0:
            return np.abs(self.static)
        return np.hypot(self.cosine(n), self.sine(n))

    def phase(self, n: int) -> np.ndarray:
        """Per-DOF four-quadrant phase of ``(X_nc, X_ns)``."""
        return np.arctan2(self.sine(n), self.cosine(n))

    def complex_amplitude(self, n: int) -> np.ndarray:
        """``X_nc - i X_ns`` so that ``x_n(t) = Re(z exp(i n Omega t))``."""
        return self.cosine(n) - 1j * self.sine(n)

    def with_coefficients(self, coefficients: np.ndarray) -> HarmonicSet:
        return HarmonicSet(basis=self.basis, coefficients=coefficients)

    def select(self, keep: set[int] | frozenset[int]) -> HarmonicSet:
        """Copy with every harmonic not in ``keep`` set to zero."""
        out = np.zeros_like(self.coefficients)
        for h in self.basis.harmonics:
            if h in keep:
                for part in ('c', 's') if h else ('c',):
                    sl = self.basis.block(h, part)
                    out[sl] = self.coefficients[sl]
        return self.with_coefficients(out)

    def truncated(self, below: int) -> HarmonicSet:
        """Copy keeping only harmonics strictly below ``below``."""
        return self.select({h for h in self.basis.harmonics if h < below})

    def rotated(self, phi: float) -> HarmonicSet:
        """Rotate harmonic ``k`` by ``k * phi``; the static row is left as is.

        ``[Xc', Xs'] = [[cos k phi, -sin k phi], [sin k phi, cos k phi]] [Xc, Xs]``
        which delays the motion of harmonic ``k`` by ``k * phi / Omega``.
        """
        out = self.coefficients.copy()
        for h in self.basis.harmonics:
            if h == 0:
                continue
            c, s = self.cosine(h), self.sine(h)
            cos, sin = np.cos(h * phi), np.sin(h * phi)
            out[self.basis.block(h, 'c')] = cos * c - sin * s
            out[self.basis.block(h, 's')] = sin * c + cos * s
        return self.with_coefficients(out)

    def as_matrix(self) -> np.ndarray:
        """Coefficients as an array of shape ``(n_components, num_dof)``."""
        return self.coefficients.reshape(self.basis.n_components, self.basis.num_dof)


def time_basis(
    basis: HarmonicBasis, n_time: int, omega: float = 1.0, derivative: int = 0
) -> np.ndarray:
    """Matrix mapping per-DOF coefficients to samples of the k-th derivative.

    Parameters
    ----------
    basis:
        Harmonic basis of the coefficients.
    n_time:
        Number of samples over one period, ``t_j = 2 pi j / (Omega n_time)``.
    omega:
        Fundamental frequency in rad/s.
    derivative:
        Order of the time derivative, 0, 1 or 2.

    Returns
    -------
    :
        Array of shape ``(n_time, basis.n_components)``.
    """
    if derivative not in (0, 1, 2):
        raise ValueError(f"Derivative order must be 0, 1 or 2, got {derivative}")
    theta = 2 * np.pi * np.arange(n_time) / n_time
    columns = []
    for h in basis.harmonics:
        if h == 0:
            columns.append(np.full(n_time, 1.0 if derivative == 0 else 0.0))
            continue
        scale = (h * omega) ** derivative
        cos, sin = np.cos(h * theta), np.sin(h * theta)
        if derivative == 0:
            columns += [cos, sin]
        elif derivative == 1:
            columns += [-scale * sin, scale * cos]
        else:
            columns += [-scale * cos, -scale * sin]
    return np.stack(columns, axis=1)


def projection_basis(basis: HarmonicBasis, n_time: int) -> np.ndarray:
    """Matrix of correlation sums mapping samples to Fourier coefficients.

    The constant term is the mean and the cosine and sine terms are
    ``2/n_time`` times the correlation sums. The result has shape
    ``(basis.n_components, n_time)``.
    """
    theta = 2 * np.pi * np.arange(n_time) / n_time
    rows = []
    for h in basis.harmonics:
        if h == 0:
            rows.append(np.full(n_time, 1.0 / n_time))
        else:
            rows += [2.0 / n_time * np.cos(h * theta), 2.0 / n_time * np.sin(h * theta)]
    return np.stack(rows, axis=0)


def time_series_from_harmonics(
    X: HarmonicSet, omega: float, n_time: int, derivative: int = 0
) -> np.ndarray:
    """Sample the k-th time derivative of the motion over one period.

    Parameters
    ----------
    X:
        Harmonic coefficients.
    omega:
        Fundamental frequency in rad/s.
    n_time:
        Number of samples, a power of two of at least ``4 * max_harmonic + 2``.
    derivative:
        Order of the time derivative, 0, 1 or 2.

    Returns
    -------
    :
        Array of shape ``(n_time, num_dof)``, one row per sample.
    """
    if derivative not in (0, 1, 2):
        raise ValueError(f"Derivative order must be 0, 1 or 2, got {derivative}")
    basis = X.basis
    basis.validate_samples(n_time)
    spectrum = np.zeros((n_time // 2 + 1, basis.num_dof), dtype=complex)
    for h in basis.harmonics:
        if h == 0:
            spectrum[0] = n_time * X.static if derivative == 0 else 0.0
            continue
        factor = (1j * h * omega) ** derivative
        spectrum[h] = 0.5 * n_time * X.complex_amplitude(h) * factor
    return np.fft.irfft(spectrum, n=n_time, axis=0)


def harmonics_from_time_series(series: np.ndarray, basis: HarmonicBasis) -> HarmonicSet:
    """Fourier coefficients of a series sampled uniformly over one period.

    Parameters
    ----------
    series:
        Array of shape ``(n_time, num_dof)`` (or ``(n_time,)`` for one DOF).
    basis:
        Harmonics to extract.

    Returns
    -------
    :
        Coefficients with the constant term equal to the mean and harmonic
        ``n`` equal to ``2/n_time`` times the cosine and sine correlation sums.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, np.newaxis]
    n_time = series.shape[0]
    if series.shape[1] != basis.num_dof:
        raise ValueError(
            f"Series has {series.shape[1]} columns but the basis has "
            f"{basis.num_dof} DOFs"
        )
    basis.validate_samples(n_time)
    spectrum = np.fft.rfft(series, axis=0)
    coefficients = np.empty(basis.size)
    for h in basis.harmonics:
        if h == 0:
            coefficients[basis.block(0)] = spectrum[0].real / n_time
            continue
        coefficients[basis.block(h, 'c')] = 2.0 * spectrum[h].real / n_time
        coefficients[basis.block(h, 's')] = -2.0 * spectrum[h].imag / n_time
    return HarmonicSet(basis=basis, coefficients=coefficients)
