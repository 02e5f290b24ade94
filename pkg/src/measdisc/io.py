"""Matrix files, deterministic JSON and CSV output.

Matrix files are ``{"d": n, "re": [[...]], "im": [[...]]}``, row-major.
Floats are written with 17 significant digits, which round-trips every
double exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .errors import NotSquare, ValidationError
from .qmat import Unitary, make_unitary


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValidationError(f"cannot serialise non-finite value {x!r}")
    s = f"{x + 0.0:.17g}"
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, enum.Enum):
        obj = obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode({"re": obj.real, "im": obj.imag}, indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise ValidationError(f"cannot serialise object of type {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats and insertion-ordered keys."""
    return _encode(obj, indent, 0) + "\n"


def matrix_to_dict(m) -> dict:
    a = np.asarray(m.matrix if isinstance(m, Unitary) else m, dtype=complex)
    return {"d": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def _rows(part, name: str) -> np.ndarray:
    if not isinstance(part, list) or not all(isinstance(r, list) for r in part):
        raise ValidationError(f"'{name}' must be a list of rows")
    widths = {len(r) for r in part}
    if len(widths) > 1:
        raise NotSquare(f"'{name}' is ragged")
    try:
        arr = np.array(part, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"'{name}' has non-numeric entries") from exc
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NotSquare(f"'{name}' has shape {arr.shape}, expected square")
    return arr


def matrix_from_dict(obj) -> np.ndarray:
    if not isinstance(obj, dict) or not {"d", "re", "im"} <= set(obj):
        raise ValidationError("matrix object needs keys 'd', 're', 'im'")
    re, im = _rows(obj["re"], "re"), _rows(obj["im"], "im")
    d = obj["d"]
    if not isinstance(d, int) or isinstance(d, bool) or re.shape != (d, d) or im.shape != (d, d):
        raise NotSquare(f"declared d={d!r} does not match array shapes {re.shape}, {im.shape}")
    return re + 1j * im


def read_matrix(path) -> np.ndarray:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
    return matrix_from_dict(obj)


def read_unitary(path) -> Unitary:
    return make_unitary(read_matrix(path))


def write_matrix(path, m) -> None:
    Path(path).write_text(dumps(matrix_to_dict(m)), encoding="utf-8")


def to_csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
