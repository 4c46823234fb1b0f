# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Run configuration files.

A run configuration is a TOML document with a model, output settings, solver
and continuation settings and a list of jobs. Jobs may use the results of
earlier jobs by name. Unknown keys are rejected.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .io import format_validation_error
from .solvers import ContinuationOptions, SolverOptions

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BUILTIN_MODELS = ('3dof-sr', '3dof-nosr')


class ConfigError(ValueError):
    """The run configuration is invalid."""


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class ModelSection(_Section):
    builtin: Literal['3dof-sr', '3dof-nosr'] | None = None
    path: Path | None = None

    @model_validator(mode='after')
    def _exactly_one_source(self) -> ModelSection:
        if (self.builtin is None) == (self.path is None):
            raise ValueError("Give exactly one of 'builtin' and 'path'")
        return self


class OutputSection(_Section):
    directory: Path = Path('results')
    seed: int = 0
    """Echoed to the metadata, all computations are deterministic."""


class SolverSection(_Section):
    abs_tol: float = 1e-9
    rel_tol: float = 1e-12
    max_iter: int = 30
    line_search: bool = False
    backtrack_factor: float = 0.5
    max_backtracks: int = 8
    jacobian_refresh_period: int = 1

    def options(self) -> SolverOptions:
        return SolverOptions(**self.model_dump())


class ContinuationSection(_Section):
    initial_step: float = 0.05
    min_step: float = 1e-5
    max_step: float = 0.5
    target_corrector_iters: int = 4
    scale_floor: float = 1e-2
    max_corrector_distance: float = 1.0
    direction: Literal[1, -1] = 1
    max_steps: int = 2000

    def options(self, **overrides: object) -> ContinuationOptions:
        return ContinuationOptions(**{**self.model_dump(), **overrides})


Harmonics = Annotated[list[Annotated[int, Field(ge=0)]], Field(min_length=1)]
Range = tuple[float, float]
State = Literal['stuck', 'half', 'free']


class _Job(_Section):
    name: str = Field(pattern=r'^[A-Za-z0-9_.-]+$')


class FrcJob(_Job):
    """Forced response curves, one per level."""

    kind: Literal['frc'] = 'frc'
    harmonics: Harmonics
    omega_range: Range
    control: Literal['constant_force', 'amplitude', 'amplitude_phase'] = (
        'constant_force'
    )
    levels: list[Annotated[float, Field(gt=0)]] = Field(min_length=1)
    """Force magnitudes, or controlled amplitudes under amplitude control."""
    R_1: list[float] | None = None
    """Extraction row, defaults to the forced DOF."""
    k: Literal[0, 1, 2] = 0
    direction: Literal[1, -1] = 1
    constraint_n: int | None = Field(default=None, ge=2)
    """Record the phase resonance constraint of this harmonic at every point."""
    constraint: Literal['basic', 'modal'] = 'basic'
    super_mode: int | None = Field(default=None, ge=1)


class EpmcJob(_Job):
    """Nonlinear mode backbone, optionally with single mode forced responses."""

    kind: Literal['epmc'] = 'epmc'
    mode: int = Field(ge=1)
    harmonics: Harmonics
    q_range: Range
    phase_dof: int | None = Field(default=None, ge=0)
    state: State = 'stuck'
    rom_forces: list[Annotated[float, Field(gt=0)]] = Field(default_factory=list)
    """Force magnitudes of constant force responses from the backbone."""


class VprnmJob(_Job):
    """Superharmonic resonance backbone."""

    kind: Literal['vprnm'] = 'vprnm'
    n: int = Field(ge=2)
    harmonics: Harmonics
    continuation: Literal['force', 'amplitude'] = 'force'
    range: Range
    """Force magnitudes or controlled amplitudes."""
    R_1: list[float] | None = None
    k: Literal[0, 1, 2] = 0
    constraint: Literal['basic', 'modal'] = 'basic'
    fundamental_mode: int = Field(default=1, ge=1)
    super_mode: int | None = Field(default=None, ge=1)
    filter_state: State = 'stuck'


class RomBuildJob(_Job):
    """Superharmonic reduced order models, one per amplitude level."""

    kind: Literal['rom-build'] = 'rom-build'
    fundamental: str
    """Name of the epmc job of the fundamental mode."""
    superharmonic: str
    """Name of the epmc job of the superharmonic mode."""
    vprnm: str
    """Name of the vprnm job."""
    levels: list[Annotated[float, Field(gt=0)]] = Field(min_length=1)
    R_1: list[float] | None = None
    R_n: list[float] | None = None
    apply_force_correction: bool = False
    upsample: int = Field(default=1, ge=1)


class RomEvalJob(_Job):
    """Evaluate the reduced order models of a rom-build job or bundle files."""

    kind: Literal['rom-eval'] = 'rom-eval'
    source: str | None = None
    """Name of the rom-build job."""
    bundles: list[Path] = Field(default_factory=list)
    omega_range: Range
    n_omega: int = Field(default=400, ge=2)

    @model_validator(mode='after')
    def _has_source(self) -> RomEvalJob:
        if self.source is None and not self.bundles:
            raise ValueError("Give a rom-build 'source' or 'bundles' files")
        return self


class DecomposeJob(_Job):
    """Modal superharmonic excitation along the curves of an frc job."""

    kind: Literal['decompose'] = 'decompose'
    source: str
    """Name of the frc job."""
    n: int = Field(ge=2)
    mode: int = Field(ge=1)
    """Mode the excitation is projected on."""
    state: State = 'stuck'
    subsets: dict[str, list[int]] = Field(default_factory=dict)
    """Named subsets of element slot indices, each decomposed separately."""
    dof_mask: list[bool] | None = None
    """Keep only these entries of the force distribution."""


Job = Annotated[
    FrcJob | EpmcJob | VprnmJob | RomBuildJob | RomEvalJob | DecomposeJob,
    Field(discriminator='kind'),
]

_REFERENCES = {
    'rom-build': (
        ('fundamental', 'epmc'),
        ('superharmonic', 'epmc'),
        ('vprnm', 'vprnm'),
    ),
    'rom-eval': (('source', 'rom-build'),),
    'decompose': (('source', 'frc'),),
}


class RunConfig(_Section):
    model: ModelSection
    output: OutputSection = OutputSection()
    n_time: int = 1024
    solver: SolverSection = SolverSection()
    continuation: ContinuationSection = ContinuationSection()
    jobs: list[Job] = Field(min_length=1)

    @model_validator(mode='after')
    def _check_jobs(self) -> RunConfig:
        if self.n_time < 1 or self.n_time & (self.n_time - 1):
            raise ValueError(f"n_time must be a power of two, got {self.n_time}")
        kinds: dict[str, str] = {}
        for job in self.jobs:
            if job.name in kinds:
                raise ValueError(f"Duplicate job name {job.name!r}")
            for field_name, kind in _REFERENCES.get(job.kind, ()):
                target = getattr(job, field_name)
                if target is None:
                    continue
                if kinds.get(target) != kind:
                    raise ValueError(
                        f"Job {job.name!r} refers to {target!r} in {field_name!r}, "
                        f"which is not an earlier {kind} job"
                    )
            kinds[job.name] = job.kind
        return self


def parse_config(text: str, source: str = '<string>') -> RunConfig:
    """Validate a TOML run configuration.

    Raises
    ------
    ConfigError
        With the location of every problem.
    """
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"Invalid TOML in {source}: {err}") from err
    try:
        config = RunConfig.model_validate(document)
    except ValidationError as err:
        raise ConfigError(
            f"Invalid configuration {source}: {format_validation_error(err)}"
        ) from err
    try:
        config.solver.options()
        config.continuation.options()
    except ValueError as err:
        raise ConfigError(f"Invalid configuration {source}: {err}") from err
    return config


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"Cannot read configuration {path}: {err}") from err
    return parse_config(text, str(path))
