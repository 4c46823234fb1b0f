# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Execution of the jobs of a run configuration."""

from __future__ import annotations

import importlib.metadata
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipp as sc
from loguru import logger
from tqdm import tqdm

from .config import (
    DecomposeJob,
    EpmcJob,
    FrcJob,
    ModelSection,
    RomBuildJob,
    RomEvalJob,
    RunConfig,
    VprnmJob,
)
from .epmc import Backbone, epmc_backbone, point_residual_norm
from .fourier import HarmonicBasis
from .hbm import (
    ControlMode,
    ControlSpec,
    ForcingState,
    FrcBranch,
    SystemModel,
    frc,
    hbm_residual,
    prestress_solve,
)
from .io import (
    RunMetadata,
    load_bundle,
    load_model,
    save_bundle,
    write_metadata,
    write_table,
)
from .rom import (
    RomBundle,
    epmc_frc_constant_force,
    vprnm_rom_build,
    vprnm_rom_evaluate,
)
from .solvers import ContinuationOptions, SolverOptions
from .tables import (
    DIM,
    backbone_table,
    frc_table,
    rom_evaluation_table,
    rom_frc_table,
    vprnm_table,
)
from .vprnm import (
    AmplitudeContinuation,
    ForceContinuation,
    VprnmBackbone,
    constraint_along_branch,
    excitation_decomposition,
    modal_filter_shape,
    paired_mode,
    vprnm_backbone,
)
from .vprnm import point_residual_norm as vprnm_point_residual_norm

VERSIONED_PACKAGES = ('nlvib', 'numpy', 'scipy', 'scipp', 'sciline', 'pydantic')


def package_versions() -> dict[str, str]:
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = importlib.metadata.version(name)
        except importlib.metadata.PackageNotFoundError:
            versions[name] = 'unknown'
    return versions


def resolve_model(section: ModelSection, base_dir: Path) -> SystemModel:
    """Load the model file or build a builtin benchmark."""
    if section.builtin is not None:
        from nlvib.threedof.system import ThreeDofSpec, build_3dof

        variant = 'sr' if section.builtin == '3dof-sr' else 'nosr'
        return build_3dof(ThreeDofSpec(variant=variant))
    assert section.path is not None  # noqa: S101
    path = section.path if section.path.is_absolute() else base_dir / section.path
    return load_model(path)


def forced_row(model: SystemModel, row: list[float] | None) -> np.ndarray:
    """Extraction row, defaulting to the DOF with the largest force."""
    if row is not None:
        R = np.asarray(row, dtype=float)
        if R.shape != (model.num_dof,):
            raise ValueError(
                f"Extraction rows need {model.num_dof} entries, got {len(row)}"
            )
        return R
    R = np.zeros(model.num_dof)
    R[int(np.argmax(np.abs(model.F_ext)))] = 1.0
    return R


@dataclass
class JobOutcome:
    name: str
    kind: str
    files: list[Path] = field(default_factory=list)
    truncated: bool = False
    message: str = ''
    timings: dict[str, float] = field(default_factory=dict)
    max_residual: float | None = None


@dataclass
class RunReport:
    outcomes: list[JobOutcome] = field(default_factory=list)

    @property
    def truncated(self) -> bool:
        return any(outcome.truncated for outcome in self.outcomes)

    @property
    def files(self) -> list[Path]:
        return [f for outcome in self.outcomes for f in outcome.files]


@dataclass
class RunContext:
    config: RunConfig
    model: SystemModel
    x_static: np.ndarray
    out_dir: Path
    base_dir: Path
    sopts: SolverOptions
    results: dict[str, Any] = field(default_factory=dict)

    @property
    def n_time(self) -> int:
        return self.config.n_time

    def copts(self, **overrides: object) -> ContinuationOptions:
        return self.config.continuation.options(**overrides)

    def basis(self, harmonics: list[int]) -> HarmonicBasis:
        basis = HarmonicBasis(harmonics=tuple(harmonics), num_dof=self.model.num_dof)
        basis.validate_samples(self.n_time)
        return basis


def _max(values: list[float] | np.ndarray) -> float | None:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    return float(values.max()) if values.size else None


def _level_tag(level: float) -> str:
    return f'{level:g}'.replace('.', 'p')


def _write(
    ctx: RunContext, outcome: JobOutcome, stem: str, table: sc.Dataset
) -> None:
    outcome.files.append(write_table(table, ctx.out_dir / f'{stem}.csv'))


def _frc_residuals(
    ctx: RunContext, branch: FrcBranch, control: ControlSpec
) -> np.ndarray:
    return np.array(
        [
            np.linalg.norm(
                hbm_residual(
                    p.X,
                    p.omega,
                    p.forcing,
                    ctx.model,
                    control,
                    ctx.n_time,
                    ctx.x_static,
                ).residual
            )
            for p in branch.points
        ]
    )


def run_frc(ctx: RunContext, job: FrcJob, outcome: JobOutcome) -> None:
    basis = ctx.basis(job.harmonics)
    mode = ControlMode(job.control)
    R_1 = forced_row(ctx.model, job.R_1)
    psi = None
    if job.constraint_n is not None and job.constraint == 'modal':
        super_mode = job.super_mode or paired_mode(ctx.model, job.constraint_n)
        psi = modal_filter_shape(ctx.model, super_mode)
    branches = []
    residuals = []
    for level in tqdm(job.levels, desc=job.name, disable=len(job.levels) < 2):
        if mode is ControlMode.CONSTANT_FORCE:
            control, forcing = ControlSpec(), ForcingState(f_mag_c=level)
        else:
            control = ControlSpec(mode=mode, R_1=R_1, A_1=level, k=job.k)
            forcing = None
        branch = frc(
            ctx.model,
            control,
            job.omega_range,
            basis,
            forcing=forcing,
            n_time=ctx.n_time,
            sopts=ctx.sopts,
            copts=ctx.copts(direction=job.direction),
        )
        branches.append(branch)
        check = _frc_residuals(ctx, branch, control)
        residuals.extend(check)
        constraint = (
            None
            if job.constraint_n is None
            else constraint_along_branch(
                branch,
                job.constraint_n,
                ctx.model,
                psi=psi,
                n_time=ctx.n_time,
                x_static=ctx.x_static,
            )
        )
        table = frc_table(
            branch, ctx.model.labels, residuals=check, constraint=constraint
        )
        _write(ctx, outcome, f'{job.name}_{_level_tag(level)}', table)
        outcome.timings[f'continuation_{_level_tag(level)}'] = branch.elapsed
        if branch.truncated:
            outcome.truncated = True
            outcome.message += f'level {level:g}: {branch.message}; '
    outcome.max_residual = _max(residuals)
    ctx.results[job.name] = branches


def run_epmc(ctx: RunContext, job: EpmcJob, outcome: JobOutcome) -> None:
    backbone = epmc_backbone(
        ctx.model,
        job.mode,
        job.q_range,
        ctx.basis(job.harmonics),
        n_time=ctx.n_time,
        phase_dof=job.phase_dof,
        state=job.state,
        sopts=ctx.sopts,
        copts=ctx.copts(),
    )
    residuals = np.array(
        [
            point_residual_norm(
                p, ctx.model, backbone.phase_dof, ctx.n_time, ctx.x_static
            )
            for p in backbone.points
        ]
    )
    _write(
        ctx,
        outcome,
        job.name,
        backbone_table(backbone, ctx.model.labels, residuals=residuals),
    )
    outcome.timings['continuation'] = backbone.elapsed
    tic = time.perf_counter()
    for force in job.rom_forces:
        rom = epmc_frc_constant_force(backbone, force * ctx.model.F_ext)
        _write(
            ctx,
            outcome,
            f'{job.name}_rom_{_level_tag(force)}',
            rom_frc_table(rom, ctx.model.labels),
        )
    if job.rom_forces:
        outcome.timings['rom_evaluation'] = time.perf_counter() - tic
    outcome.truncated = backbone.truncated
    outcome.message = backbone.message
    outcome.max_residual = _max(residuals)
    ctx.results[job.name] = backbone


def run_vprnm(ctx: RunContext, job: VprnmJob, outcome: JobOutcome) -> None:
    control: ForceContinuation | AmplitudeContinuation
    if job.continuation == 'force':
        control = ForceContinuation(f_range=job.range)
    else:
        control = AmplitudeContinuation(
            R_1=forced_row(ctx.model, job.R_1), A_range=job.range, k=job.k
        )
    backbone = vprnm_backbone(
        ctx.model,
        job.n,
        control,
        ctx.basis(job.harmonics),
        constraint=job.constraint,
        fundamental_mode=job.fundamental_mode,
        super_mode=job.super_mode,
        filter_state=job.filter_state,
        n_time=ctx.n_time,
        sopts=ctx.sopts,
        copts=ctx.copts(),
    )
    residuals = np.array(
        [
            vprnm_point_residual_norm(
                p, ctx.model, control, backbone.psi, ctx.n_time, ctx.x_static
            )
            for p in backbone.points
        ]
    )
    _write(
        ctx,
        outcome,
        job.name,
        vprnm_table(backbone, ctx.model.labels, residuals=residuals),
    )
    outcome.timings['continuation'] = backbone.elapsed
    outcome.truncated = backbone.truncated
    outcome.message = backbone.message
    outcome.max_residual = _max(residuals)
    ctx.results[job.name] = backbone


def run_rom_build(ctx: RunContext, job: RomBuildJob, outcome: JobOutcome) -> None:
    fundamental: Backbone = ctx.results[job.fundamental]
    superharmonic: Backbone = ctx.results[job.superharmonic]
    resonances: VprnmBackbone = ctx.results[job.vprnm]
    R_1 = forced_row(ctx.model, job.R_1)
    R_n = forced_row(ctx.model, job.R_n)
    bundles = []
    tic = time.perf_counter()
    for level in job.levels:
        bundle = vprnm_rom_build(
            fundamental,
            superharmonic,
            resonances,
            level,
            R_1,
            R_n,
            ctx.model.F_ext,
            apply_force_correction=job.apply_force_correction,
            upsample=job.upsample,
        )
        path = ctx.out_dir / f'{job.name}_{_level_tag(level)}.json'
        save_bundle(bundle, path)
        outcome.files.append(path)
        bundles.append(bundle)
    outcome.timings['rom_build'] = time.perf_counter() - tic
    ctx.results[job.name] = bundles


def run_rom_eval(ctx: RunContext, job: RomEvalJob, outcome: JobOutcome) -> None:
    bundles: list[RomBundle] = []
    if job.source is not None:
        bundles.extend(ctx.results[job.source])
    for path in job.bundles:
        path = path if path.is_absolute() else ctx.base_dir / path
        bundles.append(load_bundle(path))
    omega = np.linspace(*job.omega_range, job.n_omega)
    tic = time.perf_counter()
    evaluations = [vprnm_rom_evaluate(bundle, omega) for bundle in bundles]
    outcome.timings['rom_evaluation'] = time.perf_counter() - tic
    for bundle, evaluation in zip(bundles, evaluations, strict=True):
        _write(
            ctx,
            outcome,
            f'{job.name}_{_level_tag(bundle.A_rom)}',
            rom_evaluation_table(evaluation, ctx.model.labels),
        )
    ctx.results[job.name] = evaluations


def run_decompose(ctx: RunContext, job: DecomposeJob, outcome: JobOutcome) -> None:
    branches: list[FrcBranch] = ctx.results[job.source]
    psi = modal_filter_shape(ctx.model, job.mode, job.state)
    subsets: dict[str, list[int] | None] = {'total': None, **job.subsets}
    for slots in job.subsets.values():
        for index in slots:
            if not 0 <= index < len(ctx.model.slots):
                raise ValueError(
                    f"Slot index {index} is out of range, the model has "
                    f"{len(ctx.model.slots)} slots"
                )
    dof_mask = None if job.dof_mask is None else np.asarray(job.dof_mask, dtype=bool)
    for i, branch in enumerate(branches):
        data = {}
        for name, subset in subsets.items():
            shares = [
                excitation_decomposition(
                    p.X,
                    p.omega,
                    job.n,
                    ctx.model,
                    psi,
                    subset=subset,
                    dof_mask=dof_mask,
                    n_time=ctx.n_time,
                    x_static=ctx.x_static,
                )
                for p in branch.points
            ]
            data[f'eta_{name}'] = sc.array(
                dims=[DIM], values=[s.magnitude for s in shares], unit='N'
            )
            data[f'eta_phase_{name}'] = sc.array(
                dims=[DIM], values=[s.phase for s in shares], unit='rad'
            )
        table = sc.Dataset(
            data=data,
            coords={'omega': sc.array(dims=[DIM], values=branch.omega, unit='rad/s')},
        )
        _write(ctx, outcome, f'{job.name}_{i}', table)


Handler = Callable[[RunContext, Any, JobOutcome], None]

HANDLERS: dict[str, Handler] = {
    'frc': run_frc,
    'epmc': run_epmc,
    'vprnm': run_vprnm,
    'rom-build': run_rom_build,
    'rom-eval': run_rom_eval,
    'decompose': run_decompose,
}


def run_jobs(config: RunConfig, base_dir: str | Path = '.') -> RunReport:
    """Run every job in order and write its results and metadata.

    Truncated continuation is recorded on the outcome, the remaining jobs still
    run. Exceptions of a job propagate after its metadata is written with the
    failure recorded.
    """
    base_dir = Path(base_dir)
    out_dir = config.output.directory
    out_dir = out_dir if out_dir.is_absolute() else base_dir / out_dir
    sopts = config.solver.options()
    tic = time.perf_counter()
    model = resolve_model(config.model, base_dir)
    x_static = prestress_solve(model, sopts)
    static_time = time.perf_counter() - tic
    ctx = RunContext(
        config=config,
        model=model,
        x_static=x_static,
        out_dir=out_dir,
        base_dir=base_dir,
        sopts=sopts,
    )
    report = RunReport()
    versions = package_versions()
    for job in config.jobs:
        logger.info("Running {} job {!r}", job.kind, job.name)
        outcome = JobOutcome(name=job.name, kind=job.kind)
        outcome.timings['static'] = static_time
        error: Exception | None = None
        tic = time.perf_counter()
        try:
            HANDLERS[job.kind](ctx, job, outcome)
        except Exception as err:
            error = err
        outcome.timings['total'] = time.perf_counter() - tic
        status: dict[str, bool | str] = {
            'completed': error is None,
            'truncated': outcome.truncated,
        }
        if outcome.message:
            status['message'] = outcome.message
        if error is not None:
            status['error'] = f'{type(error).__name__}: {error}'
        if outcome.max_residual is not None:
            status['residuals_within_tolerance'] = (
                outcome.max_residual <= config.solver.abs_tol
            )
        metadata = RunMetadata(
            job=job.name,
            kind=job.kind,
            config={
                'run': config.model_dump(mode='json', exclude={'jobs'}),
                'job': job.model_dump(mode='json'),
            },
            tolerances={
                'abs_tol': config.solver.abs_tol,
                'rel_tol': config.solver.rel_tol,
            },
            versions=versions,
            timings=outcome.timings,
            status=status,
            max_residual=outcome.max_residual,
        )
        path = out_dir / f'{job.name}.meta.json'
        write_metadata(metadata, path)
        outcome.files.append(path)
        report.outcomes.append(outcome)
        if error is not None:
            raise error
        if outcome.truncated:
            logger.warning("Job {!r} was truncated: {}", job.name, outcome.message)
    return report
