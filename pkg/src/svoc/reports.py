"""Deterministic JSON/CSV emission: fixed key order, 17 significant digits.

json.dumps would also work, but float repr is version-sensitive; formatting
every number through one '%.17g' funnel makes identical inputs byte-identical
across platforms.  Non-finite numbers serialize as null.
"""

from __future__ import annotations

import math
from pathlib import Path


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def _encode(obj, parts: list) -> None:
    if obj is None:
        parts.append("null")
    elif isinstance(obj, bool):
        parts.append("true" if obj else "false")
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(fmt(obj) if math.isfinite(obj) else "null")
    elif isinstance(obj, str):
        parts.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                parts.append(", ")
            _encode(str(key), parts)
            parts.append(": ")
            _encode(value, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, value in enumerate(obj):
            if i:
                parts.append(", ")
            _encode(value, parts)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj, path: str | Path) -> Path:
    parts: list = []
    _encode(obj, parts)
    path = Path(path)
    path.write_text("".join(parts) + "\n", encoding="utf-8")
    return path


def trajectory_csv(path: str | Path, times, values) -> Path:
    lines = ["t,value"]
    for t, x in zip(times, values):
        lines.append(f"{fmt(t)},{fmt(x)}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def table_csv(path: str | Path, header: list[str], rows) -> Path:
    lines = [",".join(header)]
    for row in rows:
        cells = [cell if isinstance(cell, str) else fmt(cell) for cell in row]
        lines.append(",".join(cells))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
