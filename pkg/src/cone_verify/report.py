"""Bit-stable report serialization and the determinism hash.

Reports are plain dicts. JSON output sorts keys and prints every float
with 17 significant digits, so identical inputs yield identical bytes;
the determinism hash digests that canonical text with the volatile
timing fields removed.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

__all__ = [
    "canonical_json",
    "determinism_hash",
    "emit_report",
    "report_to_csv_text",
    "VOLATILE_KEYS",
]

#: keys excluded from the determinism hash (vary run to run)
VOLATILE_KEYS = ("timing_seconds", "determinism_hash")


def _format_float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = format(x, ".17g")
    if not any(c in text for c in ".eE"):
        text += ".0"
    return text


def _encode(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError("report keys must be strings")
            if not first:
                out.append(",")
            first = False
            out.append(json.dumps(key))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        first = True
        for item in np.asarray(obj).tolist() if isinstance(obj, np.ndarray) else obj:
            if not first:
                out.append(",")
            first = False
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} in a report")


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    out = []
    _encode(obj, out)
    return "".join(out)


def determinism_hash(report):
    """SHA-256 of the canonical JSON with volatile fields stripped."""
    stripped = {k: v for k, v in report.items() if k not in VOLATILE_KEYS}
    return hashlib.sha256(canonical_json(stripped).encode("utf-8")).hexdigest()


def report_to_csv_text(report):
    """Per-sample CSV rendering of a region report."""
    samples = report.get("samples", [])
    dim = 0
    for sample in samples:
        dim = max(dim, len(sample.get("x", [])))
    header = ["index"] + [f"x{i+1}" for i in range(dim)] + [
        "r_minus", "r_plus", "delta", "margin", "verdict", "j_of_flow"]
    lines = [",".join(header)]
    for i, sample in enumerate(samples):
        row = [str(i)]
        coords = list(sample.get("x", []))
        coords += [float("nan")] * (dim - len(coords))
        row += [_format_float(float(c)) for c in coords]
        for key in ("r_minus", "r_plus", "delta", "margin"):
            row.append(_format_float(float(sample.get(key, float("nan")))))
        row.append(str(sample.get("verdict", "")))
        row.append(_format_float(float(sample.get("j_of_flow", float("nan")))))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_report(report, fmt="json", path=None):
    """Write a report as canonical JSON or per-sample CSV.

    ``path=None`` returns the text instead of writing a file.
    """
    if fmt == "json":
        text = canonical_json(report) + "\n"
    elif fmt == "csv":
        text = report_to_csv_text(report)
    else:
        raise ValueError(f"unknown report format '{fmt}'")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
