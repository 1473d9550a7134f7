"""JSON encoding shared by the command line.

Floats are written with 17 significant digits so that parsing and
re-serializing reproduces the text exactly. Complex numbers are ``[re, im]``;
the point at infinity is the string ``"inf"``.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .hardy import TruncatedLaurent


class InputError(ValueError):
    """Malformed input data."""


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    # keep floats recognizable as floats after a round trip
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def to_jsonable(obj: Any) -> Any:
    """Plain containers, with numpy scalars/arrays and complex numbers unpacked."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, TruncatedLaurent):
        return series_to_dict(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(obj: Any, indent: int, level: int) -> str:
    pad = "" if indent <= 0 else "\n" + " " * (indent * (level + 1))
    end = "" if indent <= 0 else "\n" + " " * (indent * level)
    sep = "," if indent <= 0 else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        # short numeric lists stay on one line
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj) and len(obj) <= 4:
            return "[" + ", ".join(_dump(v, 0, 0) for v in obj) + "]"
        items = [f"{pad}{_dump(v, indent, level + 1)}" for v in obj]
        return "[" + sep.join(items) + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    return _dump(to_jsonable(obj), indent, 0)


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from exc


def load_file(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def parse_complex(v: Any) -> complex:
    """``[re, im]``, a number, or a string ``"re,im"``."""
    try:
        if isinstance(v, str):
            parts = [p for p in v.replace(" ", "").split(",") if p]
            if len(parts) == 1:
                return complex(float(parts[0]), 0.0)
            if len(parts) == 2:
                return complex(float(parts[0]), float(parts[1]))
            raise ValueError(v)
        if isinstance(v, (list, tuple)):
            if len(v) != 2:
                raise ValueError(v)
            return complex(float(v[0]), float(v[1]))
        return complex(v)
    except (TypeError, ValueError) as exc:
        raise InputError(f"not a complex number: {v!r}") from exc


def series_to_dict(z: TruncatedLaurent) -> dict:
    """``{"N": N, "coeffs": [[n, re, im], ...]}`` listing nonzero modes."""
    return {
        "N": z.N,
        "coeffs": [[int(n), float(c.real), float(c.imag)] for n, c in zip(z.modes, z.coeffs) if c != 0],
    }


def series_from_dict(data: Any) -> TruncatedLaurent:
    try:
        N = int(data["N"])
        modes = {}
        for entry in data.get("coeffs", []):
            n, re, im = entry
            modes[int(n)] = complex(float(re), float(im))
        return TruncatedLaurent.from_modes(modes, N)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed series JSON: {exc}") from exc
