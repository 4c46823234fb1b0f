# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors

import numpy as np


def interval_index(
    samples: np.ndarray, x: float, name: str = 'value'
) -> tuple[int, float]:
    """Segment and weight of ``x`` in increasing ``samples``.

    Parameters
    ----------
    samples:
        Strictly increasing sample locations.
    x:
        Location to interpolate at.
    name:
        Used in the error message.

    Returns
    -------
    :
        Index ``i`` of the left end of the segment and the weight of the right
        end so that the interpolant is ``(1 - w) v[i] + w v[i + 1]``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError(f"Cannot interpolate {name} without samples")
    if not samples[0] <= x <= samples[-1]:
        raise ValueError(
            f"{name} {x:.6g} is outside the sampled range "
            f"[{samples[0]:.6g}, {samples[-1]:.6g}]"
        )
    if samples.size == 1:
        return 0, 0.0
    i = int(np.clip(np.searchsorted(samples, x, side='right') - 1, 0, samples.size - 2))
    return i, float((x - samples[i]) / (samples[i + 1] - samples[i]))


def piecewise_linear(
    samples: np.ndarray, values: np.ndarray, x: float, name: str = 'value'
) -> np.ndarray:
    """Linear interpolation of ``values`` (one row per sample) at ``x``.

    Interpolating at a sample returns that sample's row exactly.
    """
    values = np.asarray(values)
    i, w = interval_index(samples, x, name)
    if w == 0.0:
        return values[i].copy()
    return (1.0 - w) * values[i] + w * values[i + 1]


def crossings(x: np.ndarray, y: np.ndarray, level: float = 0.0) -> np.ndarray:
    """Locations where the polyline ``(x, y)`` crosses ``level``.

    Samples exactly at the level count once. Segments touching a NaN are skipped.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(y, dtype=float) - level
    found = []
    for i in range(d.size - 1):
        if np.isnan(d[i + 1]):
            continue
        if d[i] == 0.0:
            found.append(x[i])
        elif d[i] * d[i + 1] < 0.0:
            found.append(x[i] - d[i] * (x[i + 1] - x[i]) / (d[i + 1] - d[i]))
    if d.size and d[-1] == 0.0:
        found.append(x[-1])
    return np.array(found)


def wrap_phase(phase: np.ndarray | float) -> np.ndarray:
    """Wrap angles to ``(-pi, pi]``."""
    return np.angle(np.exp(1j * np.asarray(phase)))
