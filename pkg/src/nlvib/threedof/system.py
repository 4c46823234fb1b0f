# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Three degree of freedom benchmark with one Iwan element.

The mass and stiffness matrices are built from prescribed linear modes. With
half of the Iwan stiffness engaged the modes are at 1, 3 and 7.5 rad/s, so that
the second mode is in 3:1 superharmonic resonance with the first. The ``nosr``
variant swaps the second and third shapes, which leaves the Iwan element at
rest in the 3 rad/s mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Literal

import numpy as np

from nlvib.harmonic.hbm import SystemModel
from nlvib.harmonic.nlforces import ElementSlot, build_iwan

Variant = Literal['sr', 'nosr']
LABELS = ('x1', 'x2', 'x3')


@dataclass(frozen=True)
class ThreeDofSpec:
    variant: Variant = 'sr'
    frequencies: tuple[float, float, float] = (1.0, 3.0, 7.5)
    phi_1: tuple[float, float, float] = (1.0, 2.0, 3.0)
    phi_a: tuple[float, float, float] = (2.0, 1.0, -1.0)
    phi_b: tuple[float, float, float] = (-2.0, 1.0, 1.0)
    damping: float = 0.01
    """Factor of the mass proportional damping."""
    k_t: float = 0.6
    F_s: float = 10.0
    chi: float = -0.5
    beta: float = 0.0
    n_sliders: int = 100
    forced_dof: int = 0

    def __post_init__(self) -> None:
        if self.variant not in ('sr', 'nosr'):
            raise ValueError(f"Unknown variant {self.variant!r}, use 'sr' or 'nosr'")
        if not 0 <= self.forced_dof < 3:
            raise ValueError(f"forced_dof must be 0, 1 or 2, got {self.forced_dof}")

    @property
    def shapes(self) -> np.ndarray:
        """Mode shapes as columns, ordered like :attr:`frequencies`."""
        second, third = (
            (self.phi_a, self.phi_b)
            if self.variant == 'sr'
            else (self.phi_b, self.phi_a)
        )
        return np.column_stack([self.phi_1, second, third])

    @property
    def Q(self) -> np.ndarray:
        """Relative displacement of DOFs 2 and 3 across the Iwan element."""
        return np.array([0.0, 1.0, -1.0])

    @property
    def T(self) -> np.ndarray:
        return self.Q

    def half_stiffness_modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Frequencies and mass normalized shapes with half the Iwan stiffness.

        These are the prescribed modes. Shapes are scaled so that their largest
        component is positive.
        """
        shapes = self.shapes
        M = mass_matrix(self)
        shapes = shapes / np.sqrt(np.einsum('ij,ik,kj->j', shapes, M, shapes))
        signs = np.sign(shapes[np.argmax(np.abs(shapes), axis=0), np.arange(3)])
        return np.array(self.frequencies), shapes * signs


def mass_matrix(spec: ThreeDofSpec) -> np.ndarray:
    inverse = np.linalg.inv(spec.shapes)
    M = inverse.T @ inverse
    return 0.5 * (M + M.T)


def tuned_stiffness(spec: ThreeDofSpec) -> np.ndarray:
    """Stiffness whose modes are the prescribed ones, ``Phi^-T Lambda Phi^-1``."""
    inverse = np.linalg.inv(spec.shapes)
    K = inverse.T @ np.diag(np.square(spec.frequencies)) @ inverse
    return 0.5 * (K + K.T)


def build_3dof(spec: ThreeDofSpec | None = None) -> SystemModel:
    """Assemble the benchmark.

    Half of the stuck Iwan stiffness is subtracted from the tuned stiffness so
    that the prescribed modes hold at the half-slipped linearization.
    """
    spec = ThreeDofSpec() if spec is None else spec
    element = build_iwan(spec.k_t, spec.F_s, spec.chi, spec.beta, spec.n_sliders)
    M = mass_matrix(spec)
    K = tuned_stiffness(spec) - 0.5 * spec.k_t * np.outer(spec.T, spec.Q)
    F_ext = np.zeros(3)
    F_ext[spec.forced_dof] = 1.0
    return SystemModel(
        M=M,
        C=spec.damping * M,
        K=K,
        F_ext=F_ext,
        slots=(
            ElementSlot(element=element, q_row=spec.Q, t_col=spec.T, label='iwan'),
        ),
        labels=LABELS,
    )


def example_model_path(variant: Variant) -> Path:
    """Bundled model file of a variant."""
    return Path(str(files('nlvib.threedof') / 'data' / f'3dof_{variant}.json'))
