# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
# ruff: noqa: E402, F401

"""Three degree of freedom benchmark with superharmonic resonance."""

import importlib.metadata

from .system import ThreeDofSpec, build_3dof
from .workflow import ReproduceWorkflow, reproduce_3dof

try:
    __version__ = importlib.metadata.version("nlvib")
except importlib.metadata.PackageNotFoundError:
    __version__ = "0.0.0"

del importlib

__all__ = ['ReproduceWorkflow', 'ThreeDofSpec', 'build_3dof', 'reproduce_3dof']
