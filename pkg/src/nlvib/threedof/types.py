# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
from typing import NamedTuple, NewType

from nlvib.harmonic import types as harmonic_t
from nlvib.harmonic.epmc import Backbone
from nlvib.harmonic.hbm import FrcBranch, SystemModel
from nlvib.harmonic.rom import RomBundle, RomEvaluation
from nlvib.harmonic.vprnm import VprnmBackbone

ContinuationSettings = harmonic_t.ContinuationSettings
FrcBasis = harmonic_t.FrcBasis
Model = harmonic_t.Model
SolverSettings = harmonic_t.SolverSettings
StaticState = harmonic_t.StaticState
TimeSamples = harmonic_t.TimeSamples

NoSrModel = NewType('NoSrModel', SystemModel)
"""Variant without superharmonic excitation of the second mode."""

FundamentalModeRange = NewType('FundamentalModeRange', tuple[float, float])
"""Modal amplitudes of the first mode backbone."""
SuperharmonicModeRange = NewType('SuperharmonicModeRange', tuple[float, float])
"""Modal amplitudes of the second mode backbone."""
ResonanceForceRange = NewType('ResonanceForceRange', tuple[float, float])
"""Force magnitudes of the 3:1 superharmonic resonance backbone in N."""
FrcFrequencyRange = NewType('FrcFrequencyRange', tuple[float, float])
ForceLevels = NewType('ForceLevels', tuple[float, ...])
AmplitudeLevels = NewType('AmplitudeLevels', tuple[float, ...])
"""Controlled first harmonic amplitudes of DOF 1 in m."""
NullTestAmplitude = NewType('NullTestAmplitude', float)
RomFrequencies = NewType('RomFrequencies', int)
"""Number of forcing frequencies of the reduced order model evaluation."""

FundamentalBackbone = NewType('FundamentalBackbone', Backbone)
SuperharmonicBackbone = NewType('SuperharmonicBackbone', Backbone)
ResonanceBackbone = NewType('ResonanceBackbone', VprnmBackbone)
ForceFrcs = NewType('ForceFrcs', list[FrcBranch])
AmplitudeFrcs = NewType('AmplitudeFrcs', list[FrcBranch])
RomBundles = NewType('RomBundles', list[RomBundle])


class TimedRomEvaluation(NamedTuple):
    level: float
    """Controlled first harmonic amplitude of the bundle."""
    evaluation: RomEvaluation
    elapsed: float
    """Wall-clock seconds of the evaluation."""


RomEvaluations = NewType('RomEvaluations', list[TimedRomEvaluation])

NullTestTable = harmonic_t.dataset_type('NullTestTable')
ComparisonTable = harmonic_t.dataset_type('ComparisonTable')
