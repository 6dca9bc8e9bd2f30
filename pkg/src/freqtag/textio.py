"""Byte-reproducible text output: float formatting, CSV and JSON writers.

Every CSV/JSON artifact the pipeline emits goes through these helpers so that
reruns with identical inputs produce byte-identical files regardless of worker
count or platform locale.
"""

from __future__ import annotations

import json
import math
from pathlib import Path


def fmt_float(x: float) -> str:
    """Format a float with 9 significant digits (round-half-to-even)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:  # avoid "-0"
        return "0"
    return format(x, ".9g")


def write_csv(path, header, rows) -> None:
    """Write rows of already-stringified cells with a fixed newline convention."""
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def dump_json(obj) -> str:
    """Canonical JSON: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dump_json(obj), encoding="utf-8", newline="\n")


def canonical_json(obj) -> str:
    """Compact canonical JSON used for content hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
