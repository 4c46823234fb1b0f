# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors

import numpy as np
import pytest

from nlvib.harmonic.hbm import linear_modes
from nlvib.threedof.system import (
    LABELS,
    ThreeDofSpec,
    build_3dof,
    example_model_path,
    mass_matrix,
)


@pytest.mark.parametrize('variant', ['sr', 'nosr'])
def test_half_stiffness_modes_are_prescribed(variant):
    spec = ThreeDofSpec(variant=variant)
    model = build_3dof(spec)
    omega, shapes = linear_modes(model, 'half')
    np.testing.assert_allclose(omega, [1.0, 3.0, 7.5], rtol=1e-10)
    np.testing.assert_allclose(shapes.T @ model.M @ shapes, np.eye(3), atol=1e-10)
    _, prescribed = spec.half_stiffness_modes()
    np.testing.assert_allclose(np.abs(shapes), np.abs(prescribed), atol=1e-10)


def test_mass_normalizes_prescribed_shapes():
    spec = ThreeDofSpec()
    shapes = spec.shapes
    np.testing.assert_allclose(
        shapes.T @ mass_matrix(spec) @ shapes, np.eye(3), atol=1e-12
    )


def test_only_sr_variant_strains_the_joint_in_mode_two():
    for variant, strained in (('sr', True), ('nosr', False)):
        spec = ThreeDofSpec(variant=variant)
        _, shapes = linear_modes(build_3dof(spec), 'half')
        relative = abs(spec.Q @ shapes[:, 1])
        assert bool(relative > 1e-6) is strained
        assert abs(spec.Q @ shapes[:, 0]) > 1e-6


def test_stuck_joint_stiffens_the_structure():
    model = build_3dof()
    stuck, _ = linear_modes(model, 'stuck')
    free, _ = linear_modes(model, 'free')
    assert np.all(stuck >= free)
    assert stuck[0] > 1.0 > free[0]


def test_benchmark_model_layout():
    model = build_3dof(ThreeDofSpec(forced_dof=2))
    assert model.labels == LABELS
    np.testing.assert_array_equal(model.F_ext, [0.0, 0.0, 1.0])
    np.testing.assert_allclose(model.C, 0.01 * model.M)
    (slot,) = model.slots
    assert slot.element.stuck_stiffness == pytest.approx(0.6)
    np.testing.assert_array_equal(slot.q_row, [0.0, 1.0, -1.0])


def test_invalid_variant_and_forced_dof_are_rejected():
    with pytest.raises(ValueError, match='Unknown variant'):
        ThreeDofSpec(variant='both')
    with pytest.raises(ValueError, match='forced_dof'):
        ThreeDofSpec(forced_dof=3)


def test_example_models_are_packaged():
    for variant in ('sr', 'nosr'):
        assert example_model_path(variant).is_file()
