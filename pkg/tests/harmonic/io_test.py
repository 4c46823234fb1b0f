# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors

import json
from pathlib import Path

import numpy as np
import pytest
import scipp as sc

from nlvib.harmonic.epmc import Backbone, EpmcPoint
from nlvib.harmonic.fourier import HarmonicBasis, HarmonicSet
from nlvib.harmonic.hbm import ForcingState, SystemModel
from nlvib.harmonic.io import (
    RunMetadata,
    load_bundle,
    load_model,
    read_metadata,
    read_table,
    save_bundle,
    save_model,
    write_metadata,
    write_table,
)
from nlvib.harmonic.nlforces import ElementSlot, LinearSpring
from nlvib.harmonic.rom import RomBundle, vprnm_rom_build, vprnm_rom_evaluate
from nlvib.harmonic.vprnm import VprnmBackbone, VprnmPoint
from nlvib.threedof.system import ThreeDofSpec, build_3dof, example_model_path


def assert_same_model(a: SystemModel, b: SystemModel) -> None:
    for name in ('M', 'C', 'K', 'F_ext', 'F_ext0'):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.labels == b.labels
    assert len(a.slots) == len(b.slots)
    for first, second in zip(a.slots, b.slots, strict=True):
        np.testing.assert_array_equal(first.q_row, second.q_row)
        np.testing.assert_array_equal(first.t_col, second.t_col)
        assert first.label == second.label
        assert first.tangential == second.tangential
        assert type(first.element) is type(second.element)


def test_model_round_trip_is_exact(tmp_path: Path):
    model = build_3dof()
    path = tmp_path / 'model.json'
    save_model(model, path)
    loaded = load_model(path)
    assert_same_model(model, loaded)
    np.testing.assert_array_equal(
        loaded.slots[0].element.weights, model.slots[0].element.weights
    )
    np.testing.assert_array_equal(
        loaded.slots[0].element.breakpoints, model.slots[0].element.breakpoints
    )


def test_model_round_trip_with_spring_and_preload(tmp_path: Path):
    spring = ElementSlot(
        LinearSpring(2.5), q_row=[1.0, -1.0], t_col=[1.0, -1.0], tangential=True
    )
    model = SystemModel(
        M=np.eye(2),
        C=0.1 * np.eye(2),
        K=np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0,
        F_ext=[0.1, 0.0],
        F_ext0=[0.0, -9.81],
        slots=(spring,),
        labels=('a', 'b'),
    )
    path = tmp_path / 'nested' / 'model.json'
    save_model(model, path)
    assert_same_model(model, load_model(path))


@pytest.mark.parametrize('variant', ['sr', 'nosr'])
def test_bundled_model_files_match_benchmark(variant):
    loaded = load_model(example_model_path(variant))
    built = build_3dof(ThreeDofSpec(variant=variant))
    for name in ('M', 'C', 'K', 'F_ext'):
        np.testing.assert_allclose(
            getattr(loaded, name), getattr(built, name), rtol=1e-12, atol=1e-14
        )
    assert loaded.labels == built.labels


def test_missing_field_is_named(tmp_path: Path):
    document = json.loads(example_model_path('sr').read_text())
    del document['M']
    path = tmp_path / 'model.json'
    path.write_text(json.dumps(document))
    with pytest.raises(ValueError, match='M: Field required'):
        load_model(path)


def test_unknown_element_kind_is_rejected(tmp_path: Path):
    document = json.loads(example_model_path('sr').read_text())
    document['elements'][0]['kind'] = 'bouc_wen'
    path = tmp_path / 'model.json'
    path.write_text(json.dumps(document))
    with pytest.raises(ValueError, match='elements.0'):
        load_model(path)


def test_inconsistent_matrices_are_rejected(tmp_path: Path):
    document = json.loads(example_model_path('sr').read_text())
    document['K'][0][1] += 1.0
    path = tmp_path / 'model.json'
    path.write_text(json.dumps(document))
    with pytest.raises(ValueError, match='K must be symmetric'):
        load_model(path)


def modal_backbone(shape, omega, xi, q) -> Backbone:
    basis = HarmonicBasis(harmonics=(0, 1), num_dof=shape.size)
    points = []
    for value in q:
        coefficients = np.zeros(basis.size)
        coefficients[basis.block(1, 's')] = value * shape
        points.append(EpmcPoint(value, omega, xi, HarmonicSet(basis, coefficients)))
    return Backbone(basis=basis, mode=1, phase_dof=0, points=points)


def resonance_point(X1: float, X3: complex, f_mag: float) -> VprnmPoint:
    basis = HarmonicBasis(harmonics=(0, 1, 3), num_dof=2)
    coefficients = np.zeros(basis.size)
    coefficients[basis.block(1, 'c')] = [X1, 0.0]
    coefficients[basis.block(3, 'c')] = [0.0, X3.real]
    coefficients[basis.block(3, 's')] = [0.0, -X3.imag]
    return VprnmPoint(
        X=HarmonicSet(basis, coefficients),
        omega=1.0,
        forcing=ForcingState(f_mag_c=f_mag),
        n=3,
        constraint_value=0.0,
        F_broad=(np.zeros(2), np.array([0.0, 0.1])),
    )


@pytest.fixture
def bundle() -> RomBundle:
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    first = resonance_point(0.5, 0.03 - 0.04j, 0.012)
    resonances = VprnmBackbone(
        n=3,
        basis=first.X.basis,
        continuation='force',
        super_mode=2,
        points=[first, resonance_point(1.5, 0.06 - 0.02j, 0.03)],
    )
    return vprnm_rom_build(
        modal_backbone(e1, 1.0, 0.02, (0.01, 1.0, 10.0)),
        modal_backbone(e2, 3.1, 0.06, (0.01, 0.1, 1.0)),
        resonances,
        0.7,
        e1,
        e2,
        e1,
    )


def test_bundle_round_trip_gives_same_evaluation(tmp_path: Path, bundle: RomBundle):
    path = tmp_path / 'bundle.json'
    save_bundle(bundle, path)
    loaded = load_bundle(path)
    assert loaded.A_rom == bundle.A_rom
    assert loaded.modal_force == bundle.modal_force
    np.testing.assert_array_equal(loaded.super_backbone.q, bundle.super_backbone.q)
    np.testing.assert_array_equal(
        loaded.vprnm_point.X.coefficients, bundle.vprnm_point.X.coefficients
    )
    assert np.isnan(loaded.vprnm_point.control_amplitude)
    omega = np.linspace(0.8, 1.2, 9)
    expected = vprnm_rom_evaluate(bundle, omega)
    actual = vprnm_rom_evaluate(loaded, omega)
    np.testing.assert_array_equal(actual.f_mag, expected.f_mag)
    np.testing.assert_array_equal(actual.q_super, expected.q_super)


def test_bundle_with_wrong_format_tag_is_rejected(tmp_path: Path, bundle: RomBundle):
    path = tmp_path / 'bundle.json'
    save_bundle(bundle, path)
    document = json.loads(path.read_text())
    document['format'] = 'nlvib-model'
    path.write_text(json.dumps(document))
    with pytest.raises(ValueError, match='format: Input should be'):
        load_bundle(path)


def test_table_headers_carry_units(tmp_path: Path):
    table = sc.Dataset(
        data={
            'A1_x1': sc.array(dims=['point'], values=[0.1, 0.2, 0.3], unit='m'),
            'zeta': sc.array(dims=['point'], values=[1e-3, 2e-3, 1 / 3]),
        },
        coords={'omega': sc.array(dims=['point'], values=[1.0, 1.1, 1.2], unit='s')},
    )
    path = write_table(table, tmp_path / 'out' / 'table.csv')
    headers, values = read_table(path)
    assert headers[0] == 'omega [s]'
    assert sorted(headers[1:]) == ['A1_x1 [m]', 'zeta [1]']
    np.testing.assert_array_equal(values[:, 0], [1.0, 1.1, 1.2])
    zeta = values[:, headers.index('zeta [1]')]
    np.testing.assert_array_equal(zeta, [1e-3, 2e-3, 1 / 3])


def test_single_row_table(tmp_path: Path):
    table = sc.Dataset(
        data={'q': sc.array(dims=['point'], values=[2.0])},
        coords={'omega': sc.array(dims=['point'], values=[1.0], unit='s')},
    )
    headers, values = read_table(write_table(table, tmp_path / 'table.csv'))
    assert values.shape == (1, 2)


def test_metadata_round_trip(tmp_path: Path):
    metadata = RunMetadata(
        job='sweep',
        kind='frc',
        config={'job': {'levels': [1.0, 2.0]}},
        tolerances={'abs_tol': 1e-9, 'rel_tol': 1e-12},
        versions={'nlvib': '0.0.0'},
        timings={'continuation': 1.25},
        status={'completed': True, 'truncated': False},
        max_residual=3e-11,
    )
    path = tmp_path / 'sweep.meta.json'
    write_metadata(metadata, path)
    assert read_metadata(path) == metadata
