"""Command-line entry point: rolepersona <generate|filter|export|eval|report> CONFIG."""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from typing import Sequence

from .config import RunConfig, load_config
from .const import (
    EVAL_METRICS,
    EXIT_CONFIG_ERROR,
    EXIT_HARD_FAILURE,
    EXIT_OK,
    EXIT_PARTIAL_FAILURE,
    SUBSETS,
)
from .coordinator import cmd_eval, cmd_export, cmd_filter, cmd_generate, cmd_report
from .errors import ConfigError, RolePersonaError
from .pyllm import LLMGatewayError

_LOGGER = logging.getLogger(__name__)


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="rolepersona",
        description="Build personality-grounded role-play datasets and evaluate role-play models.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log requests and responses (DEBUG)")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only warnings and errors")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="Run configuration YAML file")
    common.add_argument("--seed", type=int, help="Override the run seed")
    common.add_argument("--output-dir", help="Override the output directory")
    common.add_argument("--mock-script", help="Answer every model call from this mock script")
    common.add_argument("--concurrency", type=int, help="Maximum requests in flight")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="Screen questions and interview training characters")
    filter_parser = sub.add_parser("filter", parents=[common], help="Assess responses and drop mismatches")
    filter_parser.add_argument("--policy", choices=["per_dimension", "strict"], help="Filter policy")
    export_parser = sub.add_parser("export", parents=[common], help="Write the fine-tuning subsets")
    export_parser.add_argument(
        "--subset", action="append", choices=list(SUBSETS), help="Subset to export (repeatable)"
    )
    eval_parser = sub.add_parser("eval", parents=[common], help="Run evaluation metrics")
    eval_parser.add_argument(
        "--metric", action="append", choices=list(EVAL_METRICS), help="Metric to run (repeatable)"
    )
    sub.add_parser("report", parents=[common], help="Summarize the manifest and metric reports")
    return parser.parse_args(argv)


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "seed": args.seed,
        "output_dir": args.output_dir,
        "gateway.mock_script": args.mock_script,
        "gateway.concurrency": args.concurrency,
        "filter.policy": getattr(args, "policy", None),
        "export.subsets": getattr(args, "subset", None),
    }


async def _run(args: argparse.Namespace, config: RunConfig) -> int:
    if args.command == "generate":
        manifest = await cmd_generate(config)
        return EXIT_PARTIAL_FAILURE if manifest.counts.failed else EXIT_OK
    if args.command == "filter":
        await cmd_filter(config)
        return EXIT_OK
    if args.command == "export":
        await cmd_export(config)
        return EXIT_OK
    if args.command == "eval":
        status = await cmd_eval(config, args.metric)
        return EXIT_OK if all(value == "ok" for value in status.values()) else EXIT_PARTIAL_FAILURE
    frame = await cmd_report(config)
    print(frame.to_string(index=False))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"Config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        return asyncio.run(_run(args, config))
    except ConfigError as exc:
        print(f"Config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (RolePersonaError, LLMGatewayError) as exc:
        _LOGGER.error("%s failed: %s", args.command, exc)
        return EXIT_HARD_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
