"""Reading and writing problem files (JSON, see ``docs/problem_file.md``).

A matrix is written as ``{"rows": r, "cols": c, "data": [...]}`` with ``data``
in row-major order. Errors carry either a ``line L, column C`` location (for
malformed JSON) or a field path such as ``$.B.data[2]``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ProblemFileError
from .problem import ProblemData

__all__ = ["ProblemFile", "parse_problem", "load_problem", "dump_problem", "matrix_to_json"]

REQUIRED = ("A", "B", "Q", "S", "R")
SETTING_KEYS = ("rank_tol", "ode_tol", "stat_tol", "t_max")
KNOWN = set(REQUIRED) | {"H", "T", "x0", "settings", "name"}


@dataclass(frozen=True, eq=False)
class ProblemFile:
    sigma: ProblemData
    H: np.ndarray = None
    T: float = None
    x0: np.ndarray = None
    settings: dict = field(default_factory=dict)
    name: str = None


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _dim(obj, key, path):
    v = obj.get(key)
    if v is None:
        raise ProblemFileError(f"missing '{key}'", path)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise ProblemFileError(f"'{key}' must be a non-negative integer", f"{path}.{key}")
    return v


def _matrix(obj, path):
    if not isinstance(obj, dict):
        raise ProblemFileError("expected an object with rows, cols and data", path)
    extra = set(obj) - {"rows", "cols", "data"}
    if extra:
        raise ProblemFileError(f"unknown key '{sorted(extra)[0]}'", path)
    r, c = _dim(obj, "rows", path), _dim(obj, "cols", path)
    data = obj.get("data")
    if not isinstance(data, list):
        raise ProblemFileError("'data' must be an array", f"{path}.data")
    if len(data) != r * c:
        raise ProblemFileError(
            f"'data' has {len(data)} entries, expected rows*cols = {r * c}", f"{path}.data")
    for i, v in enumerate(data):
        if not _is_number(v):
            raise ProblemFileError("expected a finite number", f"{path}.data[{i}]")
    return np.array(data, dtype=float).reshape(r, c)


def _vector(v, n, path):
    if not isinstance(v, list):
        raise ProblemFileError("expected an array", path)
    if len(v) != n:
        raise ProblemFileError(f"has {len(v)} entries, expected n = {n}", path)
    for i, e in enumerate(v):
        if not _is_number(e):
            raise ProblemFileError("expected a finite number", f"{path}[{i}]")
    return np.array(v, dtype=float)


def parse_problem(text):
    """Parse problem-file text into a :class:`ProblemFile`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ProblemFileError("top level must be an object", "$")
    unknown = set(doc) - KNOWN
    if unknown:
        raise ProblemFileError("unknown key", f"$.{sorted(unknown)[0]}")
    mats = {}
    for key in REQUIRED:
        if key not in doc:
            raise ProblemFileError(f"missing matrix '{key}'", "$")
        mats[key] = _matrix(doc[key], f"$.{key}")
    try:
        sigma = ProblemData(**mats)
    except DimensionMismatch as exc:
        raise ProblemFileError(str(exc), "$") from None
    n = sigma.n
    H = None
    if "H" in doc:
        H = _matrix(doc["H"], "$.H")
        if H.shape != (n, n):
            raise ProblemFileError(f"H has shape {H.shape}, expected {(n, n)}", "$.H")
    T = doc.get("T")
    if T is not None and not (_is_number(T) and T > 0):
        raise ProblemFileError("T must be a positive number", "$.T")
    x0 = _vector(doc["x0"], n, "$.x0") if "x0" in doc else None
    settings = doc.get("settings", {})
    if not isinstance(settings, dict):
        raise ProblemFileError("expected an object", "$.settings")
    for k, v in settings.items():
        if k not in SETTING_KEYS:
            raise ProblemFileError("unknown setting", f"$.settings.{k}")
        if not (_is_number(v) and v > 0):
            raise ProblemFileError("must be a positive number", f"$.settings.{k}")
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise ProblemFileError("expected a string", "$.name")
    return ProblemFile(sigma, H, None if T is None else float(T), x0, dict(settings), name)


def load_problem(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"cannot read file: {exc.strerror}", str(path)) from None
    return parse_problem(text)


def matrix_to_json(M):
    M = np.asarray(M, dtype=float)
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]),
            "data": [float(v) for v in M.ravel()]}


def dump_problem(pf):
    """JSON-ready dict that :func:`parse_problem` maps back to the same data."""
    out = {k: matrix_to_json(getattr(pf.sigma, k)) for k in REQUIRED}
    if pf.H is not None:
        out["H"] = matrix_to_json(pf.H)
    if pf.T is not None:
        out["T"] = float(pf.T)
    if pf.x0 is not None:
        out["x0"] = [float(v) for v in pf.x0]
    if pf.settings:
        out["settings"] = dict(pf.settings)
    if pf.name is not None:
        out["name"] = pf.name
    return out
