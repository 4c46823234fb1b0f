# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Result tables with one row per branch point.

Every table is a :class:`scipp.Dataset` along the ``point`` dimension. The
branch parameter (frequency or modal amplitude) is the coordinate and every
other column is a data item carrying its unit.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import scipp as sc

from .epmc import Backbone
from .fourier import HarmonicSet
from .hbm import FrcBranch
from .rom import RomEvaluation, RomFrc
from .vprnm import VprnmBackbone

DIM = 'point'


def _column(values: Sequence[float] | np.ndarray, unit: str) -> sc.Variable:
    return sc.array(dims=[DIM], values=np.asarray(values, dtype=float), unit=unit)


def _component(X: HarmonicSet, h: int, what: str) -> np.ndarray:
    if h not in X.basis.harmonics:
        return np.zeros(X.basis.num_dof)
    if what == 'static':
        return X.static
    return X.amplitude(h) if what == 'amplitude' else X.phase(h)


def harmonic_columns(
    motions: Sequence[HarmonicSet], labels: Sequence[str]
) -> dict[str, sc.Variable]:
    """Static offset, amplitude and phase of every DOF and harmonic.

    Columns are named ``X0_<dof>``, ``A<n>_<dof>`` and ``phi<n>_<dof>``.
    Harmonics missing from the basis of a motion are filled with zeros.
    """
    harmonics = sorted({h for X in motions for h in X.basis.harmonics})
    columns = {}
    for h in harmonics:
        kinds = (
            [('X0', 'static', 'm')]
            if h == 0
            else [(f'A{h}', 'amplitude', 'm'), (f'phi{h}', 'phase', 'rad')]
        )
        for prefix, what, unit in kinds:
            values = np.array([_component(X, h, what) for X in motions])
            values = values.reshape(len(motions), len(labels))
            for dof, label in enumerate(labels):
                columns[f'{prefix}_{label}'] = _column(values[:, dof], unit)
    return columns


def frc_table(
    branch: FrcBranch,
    labels: Sequence[str],
    *,
    residuals: np.ndarray | None = None,
    constraint: np.ndarray | None = None,
) -> sc.Dataset:
    """Forced response curve with optional re-checked residuals and constraint."""
    data = {
        'f_mag_c': _column(branch.f_mag_c, 'N'),
        'f_mag_s': _column(branch.f_mag_s, 'N'),
        **harmonic_columns([p.X for p in branch.points], labels),
    }
    if residuals is not None:
        data['residual'] = _column(residuals, 'dimensionless')
    if constraint is not None:
        data['constraint'] = _column(constraint, 'dimensionless')
    return sc.Dataset(data=data, coords={'omega': _column(branch.omega, 'rad/s')})


def backbone_table(
    backbone: Backbone, labels: Sequence[str], *, residuals: np.ndarray | None = None
) -> sc.Dataset:
    # q is the modal amplitude of the mass normalized mode
    data = {
        'omega': _column(backbone.omega, 'rad/s'),
        'xi': _column(backbone.xi, '1/s'),
        'zeta': _column(backbone.zeta, 'dimensionless'),
        **harmonic_columns([p.X for p in backbone.points], labels),
    }
    if residuals is not None:
        data['residual'] = _column(residuals, 'dimensionless')
    return sc.Dataset(data=data, coords={'q': _column(backbone.q, 'dimensionless')})


def vprnm_table(
    backbone: VprnmBackbone,
    labels: Sequence[str],
    *,
    residuals: np.ndarray | None = None,
) -> sc.Dataset:
    points = backbone.points
    data = {
        'f_mag_c': _column([p.forcing.f_mag_c for p in points], 'N'),
        'f_mag_s': _column([p.forcing.f_mag_s for p in points], 'N'),
        'control_amplitude': _column([p.control_amplitude for p in points], 'm'),
        'constraint': _column(backbone.constraint_values, 'dimensionless'),
        **harmonic_columns([p.X for p in points], labels),
    }
    if residuals is not None:
        data['residual'] = _column(residuals, 'dimensionless')
    return sc.Dataset(data=data, coords={'omega': _column(backbone.omega, 'rad/s')})


def rom_frc_table(frc: RomFrc, labels: Sequence[str]) -> sc.Dataset:
    """Single mode forced response at constant force."""
    return sc.Dataset(
        data={
            'q': _column(frc.q, 'dimensionless'),
            'phi': _column([p.phi for p in frc.points], 'rad'),
            **harmonic_columns([p.X for p in frc.points], labels),
        },
        coords={'omega': _column(frc.omega, 'rad/s')},
    )


def rom_evaluation_table(
    evaluation: RomEvaluation, labels: Sequence[str]
) -> sc.Dataset:
    """Superharmonic reduced order response and its force curve."""
    return sc.Dataset(
        data={
            'f_mag': _column(evaluation.f_mag, 'N'),
            'q_super': _column(evaluation.q_super, 'dimensionless'),
            'has_super': _column(evaluation.has_super.astype(float), 'dimensionless'),
            **harmonic_columns(evaluation.X, labels),
        },
        coords={'omega': _column(evaluation.omega, 'rad/s')},
    )


def column_header(name: str, var: sc.Variable) -> str:
    """``name [unit]``, with ``1`` for dimensionless columns."""
    unit = var.unit
    if unit is None or unit == sc.units.one:
        return f'{name} [1]'
    return f'{name} [{unit}]'


def table_columns(table: sc.Dataset) -> tuple[list[str], np.ndarray]:
    """Headers and a ``(rows, columns)`` array, coordinates first."""
    headers, columns = [], []
    for name, coord in table.coords.items():
        headers.append(column_header(name, coord))
        columns.append(coord.values)
    for name, item in table.items():
        headers.append(column_header(name, item.data))
        columns.append(item.values)
    return headers, np.column_stack(columns) if columns else np.empty((0, 0))
