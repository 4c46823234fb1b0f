# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""End to end reproduction of the three DOF superharmonic resonance study."""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import sciline
import scipp as sc
from loguru import logger
from tqdm import tqdm

from nlvib.harmonic.epmc import epmc_backbone
from nlvib.harmonic.fourier import HarmonicBasis
from nlvib.harmonic.hbm import (
    ControlSpec,
    ForcingState,
    FrcBranch,
    frc,
    harmonic_phase_difference,
    prestress_solve,
)
from nlvib.harmonic.io import RunMetadata, save_bundle, write_metadata, write_table
from nlvib.harmonic.rom import vprnm_rom_build, vprnm_rom_evaluate
from nlvib.harmonic.solvers import (
    ContinuationOptions,
    ConvergenceError,
    SingularJacobianError,
    SolverOptions,
)
from nlvib.harmonic.tables import (
    DIM,
    backbone_table,
    frc_table,
    rom_evaluation_table,
    vprnm_table,
)
from nlvib.harmonic.vprnm import (
    ForceContinuation,
    excitation_decomposition,
    modal_filter_shape,
    vprnm_backbone,
)
from nlvib.harmonic.workflow import package_versions

from .system import LABELS, ThreeDofSpec, build_3dof
from .types import (
    AmplitudeFrcs,
    AmplitudeLevels,
    ComparisonTable,
    ContinuationSettings,
    ForceFrcs,
    ForceLevels,
    FrcBasis,
    FrcFrequencyRange,
    FundamentalBackbone,
    FundamentalModeRange,
    Model,
    NoSrModel,
    NullTestAmplitude,
    NullTestTable,
    ResonanceBackbone,
    ResonanceForceRange,
    RomBundles,
    RomEvaluations,
    RomFrequencies,
    SolverSettings,
    StaticState,
    SuperharmonicBackbone,
    SuperharmonicModeRange,
    TimedRomEvaluation,
    TimeSamples,
)

SUPERHARMONIC = 3
"""Index of the superharmonic resonance studied with the benchmark."""
RESPONSE_DOF = 0


def _drive_row(model: Model | NoSrModel) -> np.ndarray:
    R = np.zeros(model.num_dof)
    R[RESPONSE_DOF] = 1.0
    return R


def sr_model() -> Model:
    return Model(build_3dof(ThreeDofSpec(variant='sr')))


def nosr_model() -> NoSrModel:
    return NoSrModel(build_3dof(ThreeDofSpec(variant='nosr')))


def static_state(model: Model, sopts: SolverSettings) -> StaticState:
    return StaticState(prestress_solve(model, sopts))


def fundamental_backbone(
    model: Model,
    q_range: FundamentalModeRange,
    n_time: TimeSamples,
    sopts: SolverSettings,
    copts: ContinuationSettings,
) -> FundamentalBackbone:
    """Backbone of the first mode with harmonics 0 to 2."""
    basis = HarmonicBasis(harmonics=(0, 1, 2), num_dof=model.num_dof)
    return FundamentalBackbone(
        epmc_backbone(
            model, 1, q_range, basis, n_time=n_time, sopts=sopts, copts=copts
        )
    )


def superharmonic_backbone(
    model: Model,
    q_range: SuperharmonicModeRange,
    n_time: TimeSamples,
    sopts: SolverSettings,
    copts: ContinuationSettings,
) -> SuperharmonicBackbone:
    """Backbone of the second mode with harmonics 0 to 3."""
    basis = HarmonicBasis(harmonics=(0, 1, 2, 3), num_dof=model.num_dof)
    return SuperharmonicBackbone(
        epmc_backbone(
            model, 2, q_range, basis, n_time=n_time, sopts=sopts, copts=copts
        )
    )


def resonance_backbone(
    model: Model,
    f_range: ResonanceForceRange,
    basis: FrcBasis,
    n_time: TimeSamples,
    sopts: SolverSettings,
    copts: ContinuationSettings,
) -> ResonanceBackbone:
    """Phase resonant 3:1 superharmonic points continued in force."""
    return ResonanceBackbone(
        vprnm_backbone(
            model,
            SUPERHARMONIC,
            ForceContinuation(f_range=f_range),
            basis,
            n_time=n_time,
            sopts=sopts,
            copts=copts,
        )
    )


def _branches(
    model: Model | NoSrModel,
    controls: list[tuple[float, ControlSpec, ForcingState | None]],
    omega_range: tuple[float, float],
    basis: HarmonicBasis,
    n_time: int,
    sopts: SolverOptions,
    copts: ContinuationOptions,
    desc: str,
) -> list[FrcBranch]:
    branches = []
    for level, control, forcing in tqdm(controls, desc=desc):
        logger.info("{} at level {:g}", desc, level)
        branches.append(
            frc(
                model,
                control,
                omega_range,
                basis,
                forcing=forcing,
                n_time=n_time,
                sopts=sopts,
                copts=copts,
            )
        )
    return branches


def force_frcs(
    model: Model,
    levels: ForceLevels,
    omega_range: FrcFrequencyRange,
    basis: FrcBasis,
    n_time: TimeSamples,
    sopts: SolverSettings,
    copts: ContinuationSettings,
) -> ForceFrcs:
    controls = [(f, ControlSpec(), ForcingState(f_mag_c=f)) for f in levels]
    return ForceFrcs(
        _branches(
            model, controls, omega_range, basis, n_time, sopts, copts, 'Force FRCs'
        )
    )


def amplitude_frcs(
    model: Model,
    levels: AmplitudeLevels,
    omega_range: FrcFrequencyRange,
    basis: FrcBasis,
    n_time: TimeSamples,
    sopts: SolverSettings,
    copts: ContinuationSettings,
) -> AmplitudeFrcs:
    """Responses with the first harmonic amplitude of DOF 1 held fixed."""
    R_1 = _drive_row(model)
    controls = [(A, ControlSpec.amplitude(R_1, A), None) for A in levels]
    return AmplitudeFrcs(
        _branches(
            model,
            controls,
            omega_range,
            basis,
            n_time,
            sopts,
            copts,
            'Amplitude FRCs',
        )
    )


def rom_bundles(
    model: Model,
    fundamental: FundamentalBackbone,
    superharmonic: SuperharmonicBackbone,
    resonances: ResonanceBackbone,
    levels: AmplitudeLevels,
) -> RomBundles:
    R = _drive_row(model)
    return RomBundles(
        [
            vprnm_rom_build(
                fundamental, superharmonic, resonances, level, R, R, model.F_ext
            )
            for level in levels
        ]
    )


def rom_evaluations(
    bundles: RomBundles, omega_range: FrcFrequencyRange, n_omega: RomFrequencies
) -> RomEvaluations:
    """Evaluate every bundle on a uniform grid and time each evaluation."""
    omega = np.linspace(*omega_range, n_omega)
    timed = []
    for bundle in bundles:
        tic = time.perf_counter()
        evaluation = vprnm_rom_evaluate(bundle, omega)
        elapsed = time.perf_counter() - tic
        timed.append(TimedRomEvaluation(bundle.A_rom, evaluation, elapsed))
    return RomEvaluations(timed)


def null_test_table(
    model: NoSrModel,
    amplitude: NullTestAmplitude,
    omega_range: FrcFrequencyRange,
    basis: FrcBasis,
    n_time: TimeSamples,
    sopts: SolverSettings,
    copts: ContinuationSettings,
) -> NullTestTable:
    """Modal superharmonic forcing of the second mode without superharmonic coupling.

    The second mode of the ``nosr`` variant leaves the Iwan element at rest, so
    its modal forcing by the broadband excitation vanishes along the whole
    curve and the third harmonic shows no phase shift across 3 rad/s.
    """
    control = ControlSpec.amplitude(_drive_row(model), amplitude)
    (branch,) = _branches(
        model,
        [(amplitude, control, None)],
        omega_range,
        basis,
        n_time,
        sopts,
        copts,
        'Null test',
    )
    psi = modal_filter_shape(model, 2)
    x_static = prestress_solve(model, sopts)
    shares = [
        excitation_decomposition(
            p.X, p.omega, SUPERHARMONIC, model, psi, n_time=n_time, x_static=x_static
        )
        for p in branch.points
    ]

    def column(values: list[float], unit: str) -> sc.Variable:
        return sc.array(dims=[DIM], values=values, unit=unit)

    return NullTestTable(
        sc.Dataset(
            data={
                'eta_c': column([s.eta_c for s in shares], 'N'),
                'eta_s': column([s.eta_s for s in shares], 'N'),
                'eta': column([s.magnitude for s in shares], 'N'),
                'A3_x1': column(list(branch.amplitude(SUPERHARMONIC, 0)), 'm'),
                'phase_difference': column(
                    [
                        harmonic_phase_difference(p.X, RESPONSE_DOF, SUPERHARMONIC)
                        for p in branch.points
                    ],
                    'rad',
                ),
            },
            coords={'omega': column(list(branch.omega), 'rad/s')},
        )
    )


def comparison_table(
    levels: AmplitudeLevels,
    branches: AmplitudeFrcs,
    evaluations: RomEvaluations,
) -> ComparisonTable:
    """Peak third harmonic response of DOF 1 from harmonic balance and the ROM."""
    hbm_peak = np.array(
        [branch.amplitude(SUPERHARMONIC, RESPONSE_DOF).max() for branch in branches]
    )
    rom_peak = np.array(
        [
            timed.evaluation.amplitude(SUPERHARMONIC, RESPONSE_DOF).max()
            for timed in evaluations
        ]
    )
    return ComparisonTable(
        sc.Dataset(
            data={
                'hbm_peak_A3': sc.array(dims=[DIM], values=hbm_peak, unit='m'),
                'rom_peak_A3': sc.array(dims=[DIM], values=rom_peak, unit='m'),
                'relative_error': sc.array(
                    dims=[DIM], values=np.abs(rom_peak - hbm_peak) / hbm_peak
                ),
                'hbm_time': sc.array(
                    dims=[DIM], values=[b.elapsed for b in branches], unit='s'
                ),
                'rom_time': sc.array(
                    dims=[DIM], values=[t.elapsed for t in evaluations], unit='s'
                ),
            },
            coords={'level': sc.array(dims=[DIM], values=list(levels), unit='m')},
        )
    )


providers = (
    sr_model,
    nosr_model,
    static_state,
    fundamental_backbone,
    superharmonic_backbone,
    resonance_backbone,
    force_frcs,
    amplitude_frcs,
    rom_bundles,
    rom_evaluations,
    null_test_table,
    comparison_table,
)


def default_parameters() -> dict[type, Any]:
    return {
        TimeSamples: 1024,
        SolverSettings: SolverOptions(),
        ContinuationSettings: ContinuationOptions(),
        FrcBasis: HarmonicBasis(harmonics=tuple(range(8)), num_dof=3),
        FundamentalModeRange: (1e-2, 1e3),
        SuperharmonicModeRange: (1e-2, 5e2),
        ResonanceForceRange: (0.4, 60.0),
        FrcFrequencyRange: (0.8, 1.2),
        ForceLevels: (1.6, 8.0, 16.0),
        AmplitudeLevels: (10.0, 20.0, 30.0, 40.0, 50.0, 70.0),
        NullTestAmplitude: 30.0,
        RomFrequencies: 400,
    }


def ReproduceWorkflow() -> sciline.Pipeline:
    """Backbones, forced responses and reduced order models of the benchmark."""
    workflow = sciline.Pipeline(providers)
    for key, val in default_parameters().items():
        workflow[key] = val
    return workflow


@dataclass
class ReproduceSummary:
    files: list[Path] = field(default_factory=list)
    truncated: bool = False
    """A continuation stopped early or a solver failed."""
    stopped: dict[str, str] = field(default_factory=dict)
    """Stages whose solver did not converge."""
    failures: dict[str, str] = field(default_factory=dict)
    """Stages that raised anything else, or were skipped."""
    timings: dict[str, float] = field(default_factory=dict)


Writer = Callable[[Any, Path], list[Path]]


def _tag(level: float) -> str:
    return f'{level:g}'.replace('.', 'p')


def _write_fundamental(backbone: FundamentalBackbone, out: Path) -> list[Path]:
    return [write_table(backbone_table(backbone, LABELS), out / 'epmc_mode1.csv')]


def _write_superharmonic(backbone: SuperharmonicBackbone, out: Path) -> list[Path]:
    return [write_table(backbone_table(backbone, LABELS), out / 'epmc_mode2.csv')]


def _write_resonances(backbone: ResonanceBackbone, out: Path) -> list[Path]:
    return [write_table(vprnm_table(backbone, LABELS), out / 'vprnm.csv')]


def _branch_writer(prefix: str, unit: str) -> Writer:
    def write(branches: list[FrcBranch], out: Path) -> list[Path]:
        files = []
        for branch in branches:
            level = (
                branch.control.A_1
                if branch.control.R_1 is not None
                else branch.points[0].forcing.magnitude
            )
            table = frc_table(
                branch,
                LABELS,
                residuals=np.array([p.residual_norm for p in branch.points]),
            )
            path = out / f'{prefix}_{_tag(level)}{unit}.csv'
            files.append(write_table(table, path))
        return files

    return write


def _write_bundles(bundles: RomBundles, out: Path) -> list[Path]:
    files = []
    for bundle in bundles:
        path = out / f'rom_bundle_{_tag(bundle.A_rom)}m.json'
        save_bundle(bundle, path)
        files.append(path)
    return files


def _write_evaluations(evaluations: RomEvaluations, out: Path) -> list[Path]:
    return [
        write_table(
            rom_evaluation_table(timed.evaluation, LABELS),
            out / f'rom_frc_{_tag(timed.level)}m.csv',
        )
        for timed in evaluations
    ]


def _write_dataset(name: str) -> Writer:
    def write(table: sc.Dataset, out: Path) -> list[Path]:
        return [write_table(table, out / f'{name}.csv')]

    return write


@dataclass(frozen=True)
class _Stage:
    name: str
    target: type
    needs: tuple[type, ...]
    write: Writer | None = None


STAGES = (
    _Stage('static', StaticState, ()),
    _Stage('epmc_mode1', FundamentalBackbone, (StaticState,), _write_fundamental),
    _Stage(
        'epmc_mode2', SuperharmonicBackbone, (StaticState,), _write_superharmonic
    ),
    _Stage('vprnm', ResonanceBackbone, (StaticState,), _write_resonances),
    _Stage('force_frcs', ForceFrcs, (StaticState,), _branch_writer('frc_force', 'N')),
    _Stage(
        'amplitude_frcs',
        AmplitudeFrcs,
        (StaticState,),
        _branch_writer('frc_amplitude', 'm'),
    ),
    _Stage(
        'rom_build',
        RomBundles,
        (FundamentalBackbone, SuperharmonicBackbone, ResonanceBackbone),
        _write_bundles,
    ),
    _Stage('rom_evaluation', RomEvaluations, (RomBundles,), _write_evaluations),
    _Stage('null_test', NullTestTable, (), _write_dataset('null_test')),
    _Stage(
        'comparison',
        ComparisonTable,
        (AmplitudeFrcs, RomEvaluations),
        _write_dataset('comparison'),
    ),
)


def _is_truncated(result: Any) -> bool:
    if isinstance(result, list):
        return any(getattr(item, 'truncated', False) for item in result)
    return bool(getattr(result, 'truncated', False))


def reproduce_3dof(
    out_dir: str | Path, workflow: sciline.Pipeline | None = None
) -> ReproduceSummary:
    """Run every stage of the benchmark study and write its results.

    Each stage result is pinned in the pipeline once computed, so later stages
    reuse it. A failing stage is logged and recorded, and the stages that need
    its result are skipped.

    Parameters
    ----------
    out_dir:
        Directory of the result tables, bundles and ``reproduce-3dof.meta.json``.
    workflow:
        Pipeline with custom parameters, :func:`ReproduceWorkflow` by default.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workflow = ReproduceWorkflow() if workflow is None else workflow
    summary = ReproduceSummary()
    # Read before any stage result is pinned into the pipeline.
    parameters = {key: workflow.compute(key) for key in default_parameters()}
    failed: set[type] = set()
    for stage in STAGES:
        missing = [need for need in stage.needs if need in failed]
        if missing:
            logger.warning("Skipping stage {!r}, an upstream stage failed", stage.name)
            summary.failures.setdefault(stage.name, 'skipped')
            failed.add(stage.target)
            continue
        logger.info("Stage {!r}", stage.name)
        tic = time.perf_counter()
        try:
            result = workflow.compute(stage.target)
        except (ConvergenceError, SingularJacobianError) as err:
            logger.error("Stage {!r} stopped: {}", stage.name, err)
            summary.truncated = True
            summary.stopped[stage.name] = f'{type(err).__name__}: {err}'
            failed.add(stage.target)
            continue
        except Exception as err:
            logger.exception("Stage {!r} failed", stage.name)
            summary.failures[stage.name] = f'{type(err).__name__}: {err}'
            failed.add(stage.target)
            continue
        summary.timings[stage.name] = time.perf_counter() - tic
        workflow[stage.target] = result
        if _is_truncated(result):
            logger.warning("Stage {!r} was truncated", stage.name)
            summary.truncated = True
        if stage.write is not None:
            summary.files.extend(stage.write(result, out))

    metadata = RunMetadata(
        job='reproduce-3dof',
        kind='reproduce',
        config={
            key.__name__: _echo(value)
            for key, value in parameters.items()
            if key not in (SolverSettings, ContinuationSettings)
        },
        tolerances={
            'abs_tol': parameters[SolverSettings].abs_tol,
            'rel_tol': parameters[SolverSettings].rel_tol,
        },
        versions=package_versions(),
        timings=summary.timings,
        status={
            'completed': not (summary.failures or summary.stopped),
            'truncated': summary.truncated,
            **{f'stopped_{name}': message for name, message in summary.stopped.items()},
            **{f'failed_{name}': message for name, message in summary.failures.items()},
        },
    )
    path = out / 'reproduce-3dof.meta.json'
    write_metadata(metadata, path)
    summary.files.append(path)
    return summary


def _echo(value: Any) -> Any:
    if isinstance(value, HarmonicBasis):
        return list(value.harmonics)
    if isinstance(value, tuple):
        return list(value)
    return value
