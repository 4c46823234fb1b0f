# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Domain types shared by pipelines built on the harmonic balance toolkit."""

from typing import NewType

import numpy as np
import scipp as sc

from .fourier import HarmonicBasis
from .hbm import SystemModel
from .solvers import ContinuationOptions, SolverOptions


def make_scipp_named_typer(scipp_type):
    def typer(named: str) -> type[scipp_type]:
        return NewType(named, scipp_type)

    return typer


dataset_type = make_scipp_named_typer(sc.Dataset)

Model = NewType('Model', SystemModel)
"""The structure under analysis."""
StaticState = NewType('StaticState', np.ndarray)
"""Static displacement ``x_static`` after the prestress solve."""
TimeSamples = NewType('TimeSamples', int)
"""Samples per cycle of the nonlinear force evaluation."""
FrcBasis = NewType('FrcBasis', HarmonicBasis)
"""Harmonics of forced responses."""
SolverSettings = NewType('SolverSettings', SolverOptions)
ContinuationSettings = NewType('ContinuationSettings', ContinuationOptions)