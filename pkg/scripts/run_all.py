"""Run every config under ``configs/`` and print one summary line per run."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from thinannuli.lab import ConfigError, load_config, run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--configs", default=str(ROOT / "configs"))
    p.add_argument("--out", default=str(ROOT / "results"))
    p.add_argument("--workers", type=int, default=None)
    args = p.parse_args(argv)
    status = 0
    for path in sorted(Path(args.configs).glob("*")):
        if path.suffix not in (".json", ".yaml", ".yml"):
            continue
        try:
            rep = run_experiment(load_config(path), args.out, args.workers)
        except ConfigError as exc:
            print(f"{path.name}: config error: {exc}", file=sys.stderr)
            status = 2
            continue
        c = rep.summary["counts"]
        print(f"{path.name:32s} pass={c['pass']:4d} fail={c['fail']:4d} inconclusive={c['inconclusive']:4d} "
              f"{rep.summary['wall_time_s']:7.2f} s")
    return status


if __name__ == "__main__":
    sys.exit(main())
