"""Regenerate ``docs/csv_schema.md`` from the frozen per-kind column lists."""
from __future__ import annotations

import argparse
from pathlib import Path

from thinannuli.lab.runner import CLAIMS, COLUMNS, SCHEMA_VERSION

ROOT = Path(__file__).resolve().parent.parent

FORMAT = """\
Floats are written with ``repr`` (shortest round-trip form), ``None`` as an
empty field and booleans as ``true``/``false``.  ``status`` is one of
``pass``, ``fail``, ``inconclusive`` or ``n/a``.  Rows are ordered by
``cell``; a cell may produce several rows.
"""


def render() -> str:
    lines = [f"# CSV schema, version {SCHEMA_VERSION}", "", FORMAT]
    for kind, cols in COLUMNS.items():
        lines += [f"## {kind}", "", f"Claim: {CLAIMS[kind]}.", "", "`" + ",".join(cols) + "`", ""]
    return "\n".join(lines)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default=str(ROOT / "docs" / "csv_schema.md"))
    args = p.parse_args(argv)
    Path(args.out).write_text(render())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
