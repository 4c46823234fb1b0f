# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
# ruff: noqa: E402, F401

"""Harmonic balance analysis of structures with hysteretic joints."""

import importlib.metadata

try:
    __version__ = importlib.metadata.version("nlvib")
except importlib.metadata.PackageNotFoundError:
    __version__ = "0.0.0"

del importlib
