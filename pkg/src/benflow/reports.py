"""Bit-stable JSON reports and CSV tables."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["ReportValidationError", "format_float", "dumps_report", "emit_report", "write_csv"]


class ReportValidationError(ValueError):
    pass


def format_float(x: float) -> str:
    """``%.12e``; non-finite values become the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return "%.12e" % x


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _validate(obj):
    if isinstance(obj, dict):
        if "per_step_gaps" in obj and len(obj["per_step_gaps"]) == 0:
            raise ReportValidationError("per_step_gaps must not be empty")
        for v in obj.values():
            _validate(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _validate(v)


def dumps_report(report: dict, indent: int = 2) -> str:
    """Serialise with sorted keys and ``%.12e`` floats."""
    _validate(report)
    return _encode(report, indent, 0) + "\n"


def emit_report(report: dict, path) -> Path:
    """Write ``report`` as bit-stable JSON; raises ``OSError`` on I/O failure."""
    text = dumps_report(report)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer, str)) else "%.12e" % float(v) for v in row])
    return path
