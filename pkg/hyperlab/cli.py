"""
Command-line front end.

    python -m hyperlab.main <command> [--config PATH] [--seed U64] [--workers INT] [--out DIR]

Exit codes: 0 success, 1 failed selftest, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from hyperlab import __version__
from hyperlab.core.errors import ConfigError, HyperlabError
from hyperlab.schemas import Command, RunConfig
from hyperlab.services import pipeline, storage
from hyperlab.services.utils import format_table

LOG = logging.getLogger("hyperlab.cli")

EXTRA_COMMANDS = ("history", "dump-config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperlab", description="Desk-scale lab for non-Hermitian random matrices.")
    parser.add_argument("--version", action="version", version=f"hyperlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for cmd in Command:
        p = sub.add_parser(cmd.value, help=f"run the {cmd.value} experiment")
        p.add_argument("--config", help="YAML run config")
        p.add_argument("--seed", type=int, help="base seed (u64)")
        p.add_argument("--workers", type=int, help="worker processes for sample sharding")
        p.add_argument("--out", help="output directory")
        p.add_argument("--N", dest="N", type=int, help="matrix size (ensemble.N)")
        p.add_argument("--samples", type=int, help="samples per cell")

    h = sub.add_parser("history", help="list stored runs")
    h.add_argument("--limit", type=int, default=20)

    d = sub.add_parser("dump-config", help="print the fully defaulted config for a command")
    d.add_argument("--for", dest="target", default=Command.SELFTEST.value, choices=[c.value for c in Command])
    d.add_argument("--out", help="write to this file instead of stdout")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    raw: Dict[str, Any] = pipeline.read_config(args.config) if args.config else {}
    raw["command"] = args.command
    for key in ("seed", "workers", "out", "samples"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    if args.N is not None:
        ens = dict(raw.get("ensemble") or {})
        ens["N"] = args.N
        raw["ensemble"] = ens
    return pipeline.build_config(raw, args.config)


def _history(limit: int) -> int:
    records = storage.get_history(limit)
    if not records:
        print("no runs recorded")
        return 0
    rows = [r.model_dump() for r in records]
    print(format_table(rows, ["id", "timestamp", "command", "config_hash", "base_seed", "status", "summary"]))
    return 0


def _dump_config(target: str, out: Optional[str]) -> int:
    text = pipeline.dump_config(RunConfig(command=Command(target)))
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        LOG.info("Reference config written to %s", out)
    else:
        sys.stdout.write(text)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "history":
        return _history(args.limit)
    if args.command == "dump-config":
        return _dump_config(args.target, args.out)

    cfg = None
    try:
        cfg = config_from_args(args)
        outcome = pipeline.run(cfg)
    except HyperlabError as e:
        LOG.error("%s failed: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        if cfg is not None:
            storage.save_run(cfg.command.value, pipeline.config_hash(cfg), cfg.base_seed, "error", summary=str(e))
        return e.exit_code

    print(f"{outcome.command}: {outcome.status} -> {outcome.out_dir}")
    if outcome.status != "ok":
        for check in outcome.result.failures:
            print(f"  FAILED {check.name}: residual {check.residual:.3g} > {check.tolerance:.3g} {check.detail}")
    return outcome.exit_code
