# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Model files, reduced order model bundles and result tables.

Models and bundles are JSON documents with a ``format`` tag and a ``version``
field, validated by pydantic. Floats are written in their shortest round-trip
form so that saving and loading is bit-exact.
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Literal, TypeVar

import numpy as np
import scipp as sc
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .epmc import Backbone, EpmcPoint
from .fourier import HarmonicBasis, HarmonicSet
from .hbm import ForcingState, SystemModel
from .nlforces import ElementSlot, IwanElement, LinearSpring, build_iwan
from .rom import RomBundle
from .tables import table_columns
from .vprnm import VprnmPoint

MODEL_FORMAT = 'nlvib-model'
BUNDLE_FORMAT = 'nlvib-rom-bundle'
FORMAT_VERSION = 1


class _Record(BaseModel):
    model_config = ConfigDict(extra='forbid', ser_json_inf_nan='constants')


class IwanRecord(_Record):
    kind: Literal['iwan'] = 'iwan'
    k_t: float
    F_s: float
    chi: float
    beta: float = 0.0
    n_sliders: int = 100
    q_row: list[float]
    t_col: list[float]
    label: str = ''
    tangential: bool = False


class LinearSpringRecord(_Record):
    kind: Literal['linear_spring'] = 'linear_spring'
    stiffness: float
    q_row: list[float]
    t_col: list[float]
    label: str = ''
    tangential: bool = False


ElementRecord = Annotated[IwanRecord | LinearSpringRecord, Field(discriminator='kind')]


class ModelFile(_Record):
    """Schema of a model file."""

    format: Literal['nlvib-model'] = MODEL_FORMAT
    version: Literal[1] = FORMAT_VERSION
    labels: list[str] | None = None
    M: list[list[float]]
    C: list[list[float]]
    K: list[list[float]]
    F_ext: list[float]
    F_ext0: list[float] | None = None
    elements: list[ElementRecord] = Field(default_factory=list)

    @classmethod
    def from_model(cls, model: SystemModel) -> ModelFile:
        elements: list[IwanRecord | LinearSpringRecord] = []
        for slot in model.slots:
            common = {
                'q_row': slot.q_row.tolist(),
                't_col': slot.t_col.tolist(),
                'label': slot.label,
                'tangential': slot.tangential,
            }
            element = slot.element
            if isinstance(element, IwanElement):
                elements.append(
                    IwanRecord(
                        k_t=element.k_t,
                        F_s=element.F_s,
                        chi=element.chi,
                        beta=element.beta,
                        n_sliders=element.n_sliders,
                        **common,
                    )
                )
            else:
                elements.append(
                    LinearSpringRecord(stiffness=element.stiffness, **common)
                )
        F_ext0 = model.F_ext0.tolist() if np.any(model.F_ext0) else None
        return cls(
            labels=list(model.labels),
            M=model.M.tolist(),
            C=model.C.tolist(),
            K=model.K.tolist(),
            F_ext=model.F_ext.tolist(),
            F_ext0=F_ext0,
            elements=elements,
        )

    def to_model(self) -> SystemModel:
        slots = []
        for record in self.elements:
            element: IwanElement | LinearSpring
            if isinstance(record, IwanRecord):
                element = build_iwan(
                    record.k_t, record.F_s, record.chi, record.beta, record.n_sliders
                )
            else:
                element = LinearSpring(stiffness=record.stiffness)
            slots.append(
                ElementSlot(
                    element=element,
                    q_row=np.array(record.q_row),
                    t_col=np.array(record.t_col),
                    label=record.label,
                    tangential=record.tangential,
                )
            )
        return SystemModel(
            M=np.array(self.M),
            C=np.array(self.C),
            K=np.array(self.K),
            F_ext=np.array(self.F_ext),
            F_ext0=None if self.F_ext0 is None else np.array(self.F_ext0),
            slots=tuple(slots),
            labels=tuple(self.labels or ()),
        )


Schema = TypeVar('Schema', bound=BaseModel)


def format_validation_error(err: ValidationError) -> str:
    """One line per problem, each prefixed with its location in the document."""
    return '; '.join(
        f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}"
        for error in err.errors()
    )


def _parse(schema: type[Schema], path: Path) -> Schema:
    try:
        return schema.model_validate_json(path.read_text())
    except ValidationError as err:
        message = format_validation_error(err)
        raise ValueError(f"Invalid file {path}: {message}") from err


def load_model(path: str | Path) -> SystemModel:
    """Read a model file.

    Raises
    ------
    ValueError
        If the file does not follow the schema, naming the offending fields, or
        if its matrices are inconsistent.
    """
    path = Path(path)
    model = _parse(ModelFile, path).to_model()
    logger.debug("Loaded model with {} DOFs from {}", model.num_dof, path)
    return model


def save_model(model: SystemModel, path: str | Path) -> None:
    _write_json(ModelFile.from_model(model), Path(path))


def _write_json(document: BaseModel, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=2) + '\n')


class HarmonicSetRecord(_Record):
    harmonics: list[int]
    num_dof: int
    coefficients: list[float]

    @classmethod
    def from_set(cls, X: HarmonicSet) -> HarmonicSetRecord:
        return cls(
            harmonics=list(X.basis.harmonics),
            num_dof=X.basis.num_dof,
            coefficients=X.coefficients.tolist(),
        )

    def to_set(self) -> HarmonicSet:
        basis = HarmonicBasis(harmonics=tuple(self.harmonics), num_dof=self.num_dof)
        return HarmonicSet(basis=basis, coefficients=np.array(self.coefficients))


class EpmcPointRecord(_Record):
    q: float
    omega: float
    xi: float
    X: HarmonicSetRecord

    @classmethod
    def from_point(cls, point: EpmcPoint) -> EpmcPointRecord:
        return cls(
            q=point.q,
            omega=point.omega,
            xi=point.xi,
            X=HarmonicSetRecord.from_set(point.X),
        )

    def to_point(self) -> EpmcPoint:
        return EpmcPoint(q=self.q, omega=self.omega, xi=self.xi, X=self.X.to_set())


class VprnmPointRecord(_Record):
    X: HarmonicSetRecord
    omega: float
    f_mag_c: float
    f_mag_s: float
    n: int
    constraint_value: float
    F_broad_c: list[float]
    F_broad_s: list[float]
    control_amplitude: float

    @classmethod
    def from_point(cls, point: VprnmPoint) -> VprnmPointRecord:
        return cls(
            X=HarmonicSetRecord.from_set(point.X),
            omega=point.omega,
            f_mag_c=point.forcing.f_mag_c,
            f_mag_s=point.forcing.f_mag_s,
            n=point.n,
            constraint_value=point.constraint_value,
            F_broad_c=np.asarray(point.F_broad[0]).tolist(),
            F_broad_s=np.asarray(point.F_broad[1]).tolist(),
            control_amplitude=point.control_amplitude,
        )

    def to_point(self) -> VprnmPoint:
        return VprnmPoint(
            X=self.X.to_set(),
            omega=self.omega,
            forcing=ForcingState(f_mag_c=self.f_mag_c, f_mag_s=self.f_mag_s),
            n=self.n,
            constraint_value=self.constraint_value,
            F_broad=(np.array(self.F_broad_c), np.array(self.F_broad_s)),
            control_amplitude=self.control_amplitude,
        )


class BackboneRecord(_Record):
    harmonics: list[int]
    num_dof: int
    mode: int
    phase_dof: int
    points: list[EpmcPointRecord]

    @classmethod
    def from_backbone(cls, backbone: Backbone) -> BackboneRecord:
        return cls(
            harmonics=list(backbone.basis.harmonics),
            num_dof=backbone.basis.num_dof,
            mode=backbone.mode,
            phase_dof=backbone.phase_dof,
            points=[EpmcPointRecord.from_point(p) for p in backbone.points],
        )

    def to_backbone(self) -> Backbone:
        return Backbone(
            basis=HarmonicBasis(harmonics=tuple(self.harmonics), num_dof=self.num_dof),
            mode=self.mode,
            phase_dof=self.phase_dof,
            points=[p.to_point() for p in self.points],
        )


class BundleFile(_Record):
    """Schema of a reduced order model bundle."""

    format: Literal['nlvib-rom-bundle'] = BUNDLE_FORMAT
    version: Literal[1] = FORMAT_VERSION
    n: int
    A_rom: float
    R_1: list[float]
    R_n: list[float]
    F_ext: list[float]
    vprnm_point: VprnmPointRecord
    fundamental: EpmcPointRecord
    superharmonic: EpmcPointRecord
    super_backbone: BackboneRecord
    modal_force: float
    apply_force_correction: bool = False

    @classmethod
    def from_bundle(cls, bundle: RomBundle) -> BundleFile:
        return cls(
            n=bundle.n,
            A_rom=bundle.A_rom,
            R_1=bundle.R_1.tolist(),
            R_n=bundle.R_n.tolist(),
            F_ext=bundle.F_ext.tolist(),
            vprnm_point=VprnmPointRecord.from_point(bundle.vprnm_point),
            fundamental=EpmcPointRecord.from_point(bundle.fundamental),
            superharmonic=EpmcPointRecord.from_point(bundle.superharmonic),
            super_backbone=BackboneRecord.from_backbone(bundle.super_backbone),
            modal_force=bundle.modal_force,
            apply_force_correction=bundle.apply_force_correction,
        )

    def to_bundle(self) -> RomBundle:
        return RomBundle(
            n=self.n,
            A_rom=self.A_rom,
            R_1=np.array(self.R_1),
            R_n=np.array(self.R_n),
            F_ext=np.array(self.F_ext),
            vprnm_point=self.vprnm_point.to_point(),
            fundamental=self.fundamental.to_point(),
            superharmonic=self.superharmonic.to_point(),
            super_backbone=self.super_backbone.to_backbone(),
            modal_force=self.modal_force,
            apply_force_correction=self.apply_force_correction,
        )


def load_bundle(path: str | Path) -> RomBundle:
    return _parse(BundleFile, Path(path)).to_bundle()


def save_bundle(bundle: RomBundle, path: str | Path) -> None:
    _write_json(BundleFile.from_bundle(bundle), Path(path))


class RunMetadata(_Record):
    """Sidecar written next to every result table."""

    job: str
    kind: str
    config: dict[str, Any]
    tolerances: dict[str, float]
    versions: dict[str, str]
    timings: dict[str, float] = Field(default_factory=dict)
    """Wall-clock seconds per phase."""
    status: dict[str, bool | str] = Field(default_factory=dict)
    max_residual: float | None = None


def write_metadata(metadata: RunMetadata, path: str | Path) -> None:
    _write_json(metadata, Path(path))


def read_metadata(path: str | Path) -> RunMetadata:
    return _parse(RunMetadata, Path(path))


def write_table(table: sc.Dataset, path: str | Path) -> Path:
    """Write a result table as comma separated values.

    The header row names every column as ``name [unit]``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    headers, values = table_columns(table)
    np.savetxt(
        path,
        values.reshape(-1, len(headers)),
        delimiter=',',
        header=','.join(headers),
        comments='',
        fmt='%.17g',
    )
    return path


def read_table(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Headers and values of a table written by :func:`write_table`."""
    path = Path(path)
    with path.open() as f:
        headers = f.readline().strip().split(',')
    values = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    return headers, values.reshape(-1, len(headers))
