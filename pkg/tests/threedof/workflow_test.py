# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors

from pathlib import Path

import numpy as np
import pytest

from nlvib.harmonic.hbm import SystemModel, linear_modes
from nlvib.harmonic.io import read_metadata
from nlvib.threedof import ReproduceWorkflow, reproduce_3dof
from nlvib.threedof.types import (
    AmplitudeLevels,
    ForceLevels,
    FundamentalBackbone,
    FundamentalModeRange,
    Model,
    NoSrModel,
    NullTestAmplitude,
    ResonanceForceRange,
    StaticState,
    SuperharmonicModeRange,
)


def test_workflow_builds_both_variants():
    workflow = ReproduceWorkflow()
    model = workflow.compute(Model)
    nosr = workflow.compute(NoSrModel)
    assert isinstance(model, SystemModel)
    assert isinstance(nosr, SystemModel)
    np.testing.assert_allclose(model.M, nosr.M, atol=1e-14)
    assert not np.array_equal(model.K, nosr.K)
    np.testing.assert_array_equal(workflow.compute(StaticState), np.zeros(3))


def test_failed_stages_are_recorded_and_dependents_skipped(tmp_path: Path):
    workflow = ReproduceWorkflow()
    workflow[FundamentalModeRange] = (1.0, 0.1)
    workflow[SuperharmonicModeRange] = (1.0, 0.1)
    workflow[ResonanceForceRange] = (5.0, 1.0)
    workflow[ForceLevels] = ()
    workflow[AmplitudeLevels] = (-1.0,)
    workflow[NullTestAmplitude] = -1.0
    summary = reproduce_3dof(tmp_path, workflow)
    assert not summary.stopped
    assert set(summary.failures) == {
        'epmc_mode1',
        'epmc_mode2',
        'vprnm',
        'amplitude_frcs',
        'rom_build',
        'rom_evaluation',
        'null_test',
        'comparison',
    }
    assert summary.failures['rom_build'] == 'skipped'
    assert 'Invalid modal amplitude range' in summary.failures['epmc_mode1']
    assert 'static' in summary.timings
    assert 'force_frcs' in summary.timings
    (path,) = summary.files
    metadata = read_metadata(path)
    assert path == tmp_path / 'reproduce-3dof.meta.json'
    assert metadata.status['completed'] is False
    assert metadata.config['ForceLevels'] == []
    assert metadata.config['TimeSamples'] == 1024
    assert metadata.config['NullTestAmplitude'] == -1.0
    assert 'failed_vprnm' in metadata.status


@pytest.mark.slow
def test_fundamental_backbone_softens():
    workflow = ReproduceWorkflow()
    model = workflow.compute(Model)
    backbone = workflow.compute(FundamentalBackbone)
    stuck, _ = linear_modes(model, 'stuck')
    assert backbone.omega[0] == pytest.approx(stuck[0], rel=1e-6)
    assert backbone.omega[-1] < backbone.omega[0]
    assert backbone.xi.max() > backbone.xi[0]
