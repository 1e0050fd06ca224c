"""
Anisopede - Command-Line Entry Point
====================================
Primitive-equations solver, inequality lab and estimate monitors.

This module:
- Configures logging
- Validates environment settings
- Registers the subcommands
- Maps every failure to exit status 1

Usage:
    python -m anisopede.main --workdir runs simulate --config taylor.ini
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from anisopede.commands import register_monitor, register_simulate, register_verify
from anisopede.config import settings

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL, logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description="Primitive-equations solver, inequality lab and estimate monitors")
    parser.add_argument("--workdir", default=".", help="Base directory for every relative path")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_simulate(subparsers)
    register_verify(subparsers)
    register_monitor(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    for error in settings.validate():
        logger.warning(f"Configuration warning: {error}")

    logger.info(f"{settings.APP_NAME} {settings.APP_VERSION}: {args.command} ({settings.workers()} worker(s))")
    try:
        return args.handler(args)
    except KeyboardInterrupt:
        logger.error("✗ Interrupted")
        return 1
    except Exception as e:
        logger.error(f"✗ {args.command} failed: {e}", exc_info=settings.LOG_LEVEL == "DEBUG")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
