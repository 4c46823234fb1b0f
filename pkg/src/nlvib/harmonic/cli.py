# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2024 nlvib contributors
"""Command line entry point ``nlvib``.

Exit codes are 0 on success, 1 for an invalid configuration, 2 if a solver
stopped early and 3 for any other error.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from loguru import logger

from .config import ConfigError, load_config
from .solvers import ConvergenceError, SingularJacobianError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TRUNCATED = 2
EXIT_INTERNAL = 3


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='nlvib',
        description='Harmonic balance, nonlinear modes and superharmonic '
        'resonance tracking',
    )
    parser.add_argument(
        '--log-level',
        default='INFO',
        choices=['TRACE', 'DEBUG', 'INFO', 'SUCCESS', 'WARNING', 'ERROR'],
        type=str.upper,
    )
    commands = parser.add_subparsers(dest='command', required=True)
    run = commands.add_parser('run', help='Run the jobs of a TOML configuration')
    run.add_argument('config', type=Path)
    reproduce = commands.add_parser(
        'reproduce-3dof', help='Reproduce the three DOF benchmark end to end'
    )
    reproduce.add_argument('--out', type=Path, default=Path('results-3dof'))
    return parser


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level)


def _run(config_path: Path) -> int:
    from .workflow import run_jobs

    config = load_config(config_path)
    report = run_jobs(config, base_dir=config_path.parent)
    logger.info("Wrote {} files", len(report.files))
    return EXIT_TRUNCATED if report.truncated else EXIT_OK


def _reproduce(out: Path) -> int:
    from nlvib.threedof.workflow import reproduce_3dof

    summary = reproduce_3dof(out)
    logger.info("Wrote {} files to {}", len(summary.files), out)
    if summary.failures:
        return EXIT_INTERNAL
    return EXIT_TRUNCATED if summary.truncated else EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        if args.command == 'run':
            return _run(args.config)
        return _reproduce(args.out)
    except ConfigError as err:
        logger.error("{}", err)
        return EXIT_CONFIG
    except (ConvergenceError, SingularJacobianError) as err:
        logger.error("Solver failure: {}", err)
        return EXIT_TRUNCATED
    except Exception:
        logger.exception("Internal error")
        return EXIT_INTERNAL


if __name__ == '__main__':
    sys.exit(main())
