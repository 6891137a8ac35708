#!/usr/bin/env python3
"""
adiabatlab command line: gap checks, adiabatic sweeps, response and
thermodynamic-limit runs on small lattice fermion models.
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from .errors import ConfigError, LabError
from .handlers.command import DRIVERS, CommandHandler
from .handlers.context import RunContext
from .models.config import ModelConfig, load_model_config, parse_model_json
from .models.gallery import GALLERY, gallery_config
from .monitors.budget import BudgetMonitor
from .settings import get_settings

logger = logging.getLogger(__name__)


def _override(text: str):
    """KEY=VALUE with VALUE parsed as JSON when possible."""
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adiabatlab", description="Adiabatic theory numerics for gapped lattice fermions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DRIVERS:
        p = sub.add_parser(name)
        p.add_argument("model", help="model JSON path, gallery name (m1, m2, m3) or '-' for stdin")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", type=Path, default=Path("results"))
        p.add_argument("--budget-seconds", type=float, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--plots", action="store_true", help="write SVG figures")
        p.add_argument("--commands", default=None, help="commands.json with the sub-command defaults")
        p.add_argument("--set", dest="overrides", action="append", type=_override, default=[], metavar="KEY=VALUE")
    return parser


def read_config(source: str) -> ModelConfig:
    if source == "-":
        return parse_model_json(sys.stdin.read(), "<stdin>")
    if source.lower() in GALLERY or source in GALLERY.values():
        return gallery_config(source)
    return load_model_config(source)


async def run(args: argparse.Namespace) -> int:
    if args.budget_seconds is not None and args.budget_seconds <= 0:
        raise ConfigError("--budget-seconds must be positive", "--budget-seconds")
    config = read_config(args.model)
    overrides: Dict[str, Any] = dict(args.overrides)
    handler = CommandHandler(args.commands)
    ctx = RunContext(
        config,
        args.out_dir,
        seed=args.seed,
        plots=args.plots,
        budget=BudgetMonitor(args.budget_seconds),
        threads=args.threads,
    )
    await handler.handle_command(args.command, ctx, overrides)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        level = get_settings().log_level
    except LabError as e:
        print(json.dumps(e.to_dict(), ensure_ascii=False), file=sys.stderr)
        return e.exit_code

    # Configure logging
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        return asyncio.run(run(args))
    except LabError as e:
        logger.error(f"❌ {type(e).__name__}: {e.message}")
        print(json.dumps(e.to_dict(), ensure_ascii=False), file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Received interrupt, shutting down...")
        return 130
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
