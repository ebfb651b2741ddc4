"""Deterministic report serialization.

Reports are plain dicts with a fixed insertion order. The JSON emitter
below keeps that order and prints every float with 17 significant digits,
so equal configurations produce byte-identical output; the text renderer
walks the same structure.
"""

from __future__ import annotations

import json
import math
from typing import Any

REPORT_VERSION = "report/v1"


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot enter a report")
    # fixed 17-significant-digit form: enough to round-trip, stable across runs
    return format(float(x), ".17g")


def canonical_json(obj: Any, indent: int = 0) -> str:
    """Serialize with fixed key order and fixed float formatting."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key, value in obj.items():
            if not isinstance(key, str):
                raise TypeError(f"report keys must be strings, got {key!r}")
            parts.append(
                f"{inner}{json.dumps(key, ensure_ascii=True)}: "
                f"{canonical_json(value, indent + 1)}"
            )
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [f"{inner}{canonical_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    raise TypeError(f"unsupported report value {type(obj).__name__}")


def render_text(report: dict) -> str:
    """Human-readable rendering of the same structure, equally deterministic."""
    lines: list[str] = []

    def walk(obj: Any, depth: int, label: str | None) -> None:
        pad = "  " * depth
        head = f"{pad}{label}: " if label is not None else pad
        if isinstance(obj, dict):
            if label is not None:
                lines.append(f"{pad}{label}:")
            for key, value in obj.items():
                walk(value, depth + (0 if label is None else 1), key)
        elif isinstance(obj, (list, tuple)):
            if label is not None:
                lines.append(f"{pad}{label}:")
            for i, value in enumerate(obj):
                walk(value, depth + (0 if label is None else 1), f"[{i}]")
        elif isinstance(obj, float):
            lines.append(head + _format_float(obj))
        elif obj is None:
            lines.append(head + "-")
        else:
            lines.append(head + str(obj))

    walk(report, 0, None)
    return "\n".join(lines) + "\n"


def check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def all_passed(checks: list[dict]) -> bool:
    return all(c["passed"] for c in checks)
