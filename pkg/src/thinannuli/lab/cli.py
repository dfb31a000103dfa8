"""Command line: ``run``, ``validate``, ``list-systems`` and ``version``."""
from __future__ import annotations

import argparse
import json
import sys

from .. import __version__
from .config import ConfigError, load_config

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinannuli-lab", description="Run thin-annuli and return-time experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    run.add_argument("--workers", type=int, default=None, help="worker processes (overrides THINANNULI_WORKERS)")
    val = sub.add_parser("validate", help="validate a config without running it")
    val.add_argument("config")
    sub.add_parser("list-systems", help="list gallery systems")
    sub.add_parser("version", help="print the library version")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "list-systems":
        from ..gallery import list_systems

        print("\n".join(list_systems()))
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "validate":
        print(f"ok: {cfg.kind} on {cfg.system.name}")
        return EXIT_OK
    from .runner import run_experiment

    try:
        rep = run_experiment(cfg, args.out, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"csv": str(rep.csv_path), "json": str(rep.json_path), "counts": rep.summary["counts"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
