"""
HDG-IP Solver - Command Line Entry Point

Subcommands:
- run                  convergence studies and adaptive runs
- mesh                 write mesh files for the test geometries
- stabilization-table  tabulate the amplification functions

Exit status: 0 success, 2 invalid configuration, 3 solver failure, 1 other errors.
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from hdg_ip import __version__
from hdg_ip.commands import mesh, run, stabilization_table
from hdg_ip.config import get_settings
from hdg_ip.errors import (
    ClassificationError,
    CoefficientError,
    ConfigurationError,
    ConvergenceError,
    DegenerateFaceError,
    HdgError,
    InvalidArgumentError,
    LocalSolvabilityError,
    SingularityError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

CONFIG_ERRORS = (ConfigurationError, InvalidArgumentError, ClassificationError, CoefficientError)
SOLVER_ERRORS = (LocalSolvabilityError, SingularityError, ConvergenceError, DegenerateFaceError)


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser with all subcommands."""
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="hdg-ip",
        description=f"{settings.app_name}: hybridizable interior penalty DG for "
        "degenerate advection-diffusion-reaction problems",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", dest="log_level", help="Override HDG_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    run.add_parser(subparsers)
    mesh.add_parser(subparsers)
    stabilization_table.add_parser(subparsers)
    return parser


def _format_validation(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        field = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{field}: {item['msg']}")
    return "; ".join(parts)


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return int(args.func(args))
    except ValidationError as e:
        message = _format_validation(e)
        logger.error(f"Invalid configuration: {message}")
        print(f"error: invalid configuration: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except CONFIG_ERRORS as e:
        field = getattr(e, "field", None)
        prefix = f"{field}: " if field else ""
        logger.error(f"Invalid configuration: {prefix}{e}")
        print(f"error: {prefix}{e}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as e:
        logger.error(f"Solver failure: {e}", exc_info=True)
        print(f"error: solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except HdgError as e:
        logger.error(f"Run failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
