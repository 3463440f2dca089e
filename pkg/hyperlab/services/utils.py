# hyperlab/services/utils.py
"""
Utility helpers for hyperlab.

Provides:
- to_hash(*parts) -> str      : stable short hash for cache keys and config ids.
- sanitize(obj) -> Any        : numpy/complex/pydantic -> plain JSON types.
- write_csv(path, rows)       : RFC-4180 CSV with a schema_version column.
- write_json(path, obj)       : UTF-8 JSON with stable key order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from hyperlab.core.config import CSV_SCHEMA_VERSION

LOG = logging.getLogger("hyperlab.utils")


# ---------------------------------------------------------------------
# Hash helper
# ---------------------------------------------------------------------
def to_hash(*parts: Any, algo: str = "sha256") -> str:
    """
    Build a stable hash string from multiple parts.

    Each part is converted with repr() and separated by '||'.
    Only the first 16 hex characters are returned.
    """
    h = hashlib.new(algo)
    for p in parts:
        s = "None" if p is None else repr(p)
        h.update(s.encode("utf-8", errors="ignore"))
        h.update(b"||")
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------
# JSON-safe conversion
# ---------------------------------------------------------------------
def sanitize(obj: Any) -> Any:
    """
    Recursively convert numpy types, complex numbers and pydantic models
    into plain Python types (int, float, str, list, dict, None).
    Complex values become [re, im].
    """
    if isinstance(obj, Enum):
        return obj.value
    if obj is None or isinstance(obj, (bool, str, int, float)):
        return obj
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return sanitize(obj.item())
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if hasattr(obj, "model_dump"):
        return sanitize(obj.model_dump())
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set)):
        return [sanitize(x) for x in obj]
    if hasattr(obj, "__dict__"):
        return sanitize(vars(obj))
    return str(obj)


def _cell(v: Any) -> Any:
    v = sanitize(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return json.dumps(v)
    return v


# ---------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------
def write_csv(path: Path, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> Path:
    """One row per cell; every row carries ``schema_version``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for row in rows:
            for k in row:
                if k not in columns:
                    columns.append(k)
    header = ["schema_version"] + [c for c in columns if c != "schema_version"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([CSV_SCHEMA_VERSION] + [_cell(row.get(c, "")) for c in header[1:]])
    return path


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(sanitize(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def format_table(rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> str:
    """Plain-text table for run summaries."""
    rows = list(rows)
    cells = [[_short(r.get(c, "")) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[k]) for row in cells]) for k, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


def _short(v: Any) -> str:
    if isinstance(v, complex):
        return f"{v.real:.6g}{v.imag:+.6g}i"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)
