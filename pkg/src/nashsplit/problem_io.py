"""JSON problem files.

A problem file is one JSON object with a ``"kind"`` discriminator::

    {"kind": "zero_sum", "L": [[1, -1], [-1, 1]]}
    {"kind": "saddle", "Q1": ..., "M": ..., "Q2": ..., "f": <set>}
    {"kind": "gne", "dims": [1, 1], "A": ..., "c": ..., "set": <set>}
    {"kind": "cyclic_prox", "parts": [<set>, ...]}
    {"kind": "cyclic_projection", "sets": [<set>, ...]}
    {"kind": "custom_linear", "dims": [...], "A": ..., "c": ..., "f": <set>}

Set descriptors are objects with a ``"type"`` among ``zero``, ``box``,
``ball``, ``halfspace``, ``affine``, ``simplex``, ``product`` and
``separable``; ``null`` box bounds mean infinity. Optional top-level keys:
``"chi"`` (Lipschitz override), ``"x0"`` (list of blocks) and ``"solver"``
(defaults for the solver configuration). Custom nonlinear gradients cannot
be stored in files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import games
from .operators import AffineOperator, CustomOperator
from .prox import (
    IndicatorAffine,
    IndicatorBall,
    IndicatorBox,
    IndicatorHalfspace,
    IndicatorSimplex,
    InvalidDescriptor,
    ProductSet,
    ProxFunction,
    SeparableSum,
    Zero,
)
from .space import BlockVector, DimensionError, SpaceLayout

KINDS = ("zero_sum", "saddle", "gne", "cyclic_prox", "cyclic_projection", "custom_linear")
SOLVER_KEYS = ("method", "gamma", "epsilon", "tol", "max_iters", "trace_every", "seed", "errors")


class ProblemFileError(ValueError):
    """Parse, schema or dimension error in a problem file."""


class ProblemDimensionError(ProblemFileError, DimensionError):
    """Shape mismatch in a problem file; the message names the offending row or block."""


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ProblemFileError(f"{where}: missing required field '{key}'")
    return d[key]


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProblemFileError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _vector(v, where: str, allow_null: float | None = None) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ProblemFileError(f"{where}: expected a nonempty list of numbers")
    out = []
    for k, e in enumerate(v):
        if e is None and allow_null is not None:
            out.append(allow_null)
        else:
            out.append(_number(e, f"{where}[{k}]"))
    return np.array(out)


def _matrix(v, where: str, shape: tuple[int | None, int | None] = (None, None)) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ProblemFileError(f"{where}: expected a nonempty list of rows")
    ncols = shape[1] if shape[1] is not None else len(v[0])
    for k, row in enumerate(v):
        if len(row) != ncols:
            raise ProblemDimensionError(f"{where}: row {k} has {len(row)} entries, expected {ncols}")
    if shape[0] is not None and len(v) != shape[0]:
        raise ProblemDimensionError(f"{where}: has {len(v)} rows, expected {shape[0]}")
    return np.array([[_number(e, f"{where}[{i}][{j}]") for j, e in enumerate(row)] for i, row in enumerate(v)])


def _dims(v, where: str) -> SpaceLayout:
    if not isinstance(v, list) or not v or not all(isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in v):
        raise ProblemFileError(f"{where}: expected a list of positive integers")
    return SpaceLayout(tuple(v))


def parse_set(d, where: str = "set") -> ProxFunction:
    """Build a :class:`ProxFunction` from a set descriptor."""
    if not isinstance(d, dict):
        raise ProblemFileError(f"{where}: expected an object")
    t = _require(d, "type", where)
    try:
        if t == "zero":
            return Zero(int(_number(_require(d, "dim", where), f"{where}.dim")))
        if t == "box":
            lo = _vector(_require(d, "lo", where), f"{where}.lo", allow_null=-math.inf)
            hi = _vector(_require(d, "hi", where), f"{where}.hi", allow_null=math.inf)
            return IndicatorBox(lo, hi)
        if t == "ball":
            return IndicatorBall(_vector(_require(d, "center", where), f"{where}.center"),
                                 _number(_require(d, "radius", where), f"{where}.radius"))
        if t in ("halfspace", "affine"):
            cls = IndicatorHalfspace if t == "halfspace" else IndicatorAffine
            return cls(_vector(_require(d, "a", where), f"{where}.a"), _number(_require(d, "b", where), f"{where}.b"))
        if t == "simplex":
            return IndicatorSimplex(int(_number(_require(d, "dim", where), f"{where}.dim")),
                                    inequality=bool(d.get("inequality", False)))
        if t in ("product", "separable"):
            parts = _require(d, "parts", where)
            if not isinstance(parts, list) or not parts:
                raise ProblemFileError(f"{where}.parts: expected a nonempty list")
            fns = [parse_set(p, f"{where}.parts[{k}]") for k, p in enumerate(parts)]
            return ProductSet(fns) if t == "product" else SeparableSum(fns)
    except InvalidDescriptor as exc:
        raise ProblemFileError(f"{where}: {exc}") from exc
    raise ProblemFileError(f"{where}.type: unknown set type {t!r}")


def describe_set(f: ProxFunction) -> dict:
    """Inverse of :func:`parse_set`."""
    if isinstance(f, Zero):
        return {"type": "zero", "dim": f.dim}
    if isinstance(f, IndicatorBox):
        return {"type": "box", "lo": [None if math.isinf(v) else float(v) for v in f.lo],
                "hi": [None if math.isinf(v) else float(v) for v in f.hi]}
    if isinstance(f, IndicatorBall):
        return {"type": "ball", "center": f.center.tolist(), "radius": f.radius}
    if isinstance(f, (IndicatorHalfspace, IndicatorAffine)):
        return {"type": f.kind, "a": f.a.tolist(), "b": f.b}
    if isinstance(f, IndicatorSimplex):
        out = {"type": "simplex", "dim": f.dim}
        if f.inequality:
            out["inequality"] = True
        return out
    if isinstance(f, SeparableSum):
        return {"type": "product" if isinstance(f, ProductSet) else "separable",
                "parts": [describe_set(p) for p in f.parts]}
    raise ValueError(f"cannot serialize {f!r}")


def _check_total(f: ProxFunction, n: int, where: str):
    if f.dim != n:
        raise ProblemDimensionError(f"{where}: acts on {f.dim} coordinates, problem has {n}")


def problem_from_dict(d: dict) -> games.ProblemSpec:
    """Validate a decoded problem object and build its ProblemSpec."""
    if not isinstance(d, dict):
        raise ProblemFileError("top level: expected a JSON object")
    kind = _require(d, "kind", "top level")
    if kind not in KINDS:
        raise ProblemFileError(f"kind: unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    chi = None if d.get("chi") is None else _number(d["chi"], "chi")

    if kind == "zero_sum":
        L = _matrix(_require(d, "L", kind), "L")
        spec = games.build_zero_sum(L, chi=chi)
    elif kind == "saddle":
        M = _matrix(_require(d, "M", kind), "M")
        n1, n2 = M.shape
        Q1 = _matrix(_require(d, "Q1", kind), "Q1", (n1, n1))
        Q2 = _matrix(_require(d, "Q2", kind), "Q2", (n2, n2))
        f = parse_set(d["f"], "f") if "f" in d else None
        if f is not None:
            _check_total(f, n1 + n2, "f")
        try:
            spec = games.build_saddle(Q1, M, Q2, f, chi=chi)
        except ValueError as exc:
            raise ProblemFileError(f"saddle: {exc}") from exc
    elif kind in ("gne", "custom_linear"):
        layout = _dims(_require(d, "dims", kind), "dims")
        n = layout.total_dim
        A = _matrix(_require(d, "A", kind), "A", (n, n))
        c = _vector(d["c"], "c") if "c" in d else np.zeros(n)
        if c.size != n:
            raise ProblemDimensionError(f"c: has {c.size} entries, expected {n}")
        if kind == "gne":
            C = parse_set(_require(d, "set", kind), "set")
            _check_total(C, n, "set")
            try:
                spec = games.build_gne(C, AffineOperator(A, c, layout=layout, chi=chi))
            except ValueError as exc:
                raise ProblemFileError(f"gne: {exc}") from exc
        else:
            f = parse_set(d["f"], "f") if "f" in d else None
            if f is not None:
                _check_total(f, n, "f")
            spec = games.build_custom_linear(A, c, f, layout=layout, chi=chi)
    else:
        key = "parts" if kind == "cyclic_prox" else "sets"
        items = _require(d, key, kind)
        if not isinstance(items, list) or len(items) < 2:
            raise ProblemFileError(f"{key}: expected a list of at least two set descriptors")
        fns = [parse_set(s, f"{key}[{k}]") for k, s in enumerate(items)]
        dims = [fn.dim for fn in fns]
        if "maps" in d:
            maps = [_matrix(M, f"maps[{k}]") for k, M in enumerate(d["maps"])]
        else:
            maps = None
            if len(set(dims)) != 1:
                raise ProblemDimensionError(f"{key}: all players must share one dimension, got block sizes {dims}")
        try:
            if kind == "cyclic_prox":
                spec = games.build_cyclic_prox(fns, maps, chi=chi)
            else:
                spec = games.build_cyclic_projection(fns, chi=chi)
        except ValueError as exc:
            raise ProblemFileError(f"{kind}: {exc}") from exc

    meta = spec.metadata
    if "x0" in d:
        blocks = d["x0"]
        if not isinstance(blocks, list) or len(blocks) != spec.m:
            raise ProblemFileError(f"x0: expected {spec.m} blocks")
        arrs = [_vector(b, f"x0[{k}]") for k, b in enumerate(blocks)]
        for k, (a, n) in enumerate(zip(arrs, spec.layout.dims)):
            if a.size != n:
                raise ProblemDimensionError(f"x0[{k}]: block has {a.size} entries, expected {n}")
        meta["x0"] = BlockVector(spec.layout, np.concatenate(arrs))
    if "solver" in d:
        s = d["solver"]
        if not isinstance(s, dict):
            raise ProblemFileError("solver: expected an object")
        unknown = set(s) - set(SOLVER_KEYS)
        if unknown:
            raise ProblemFileError(f"solver: unknown field(s) {sorted(unknown)}")
        meta["solver"] = dict(s)
    return spec


def load_problem(path) -> games.ProblemSpec:
    """Read, validate and build a problem file. Lipschitz constants are computed on load."""
    path = Path(path)
    text = path.read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}") from exc
    return problem_from_dict(d)


def problem_to_dict(spec: games.ProblemSpec) -> dict:
    """Serialize a spec; callback-based operators are rejected."""
    B = spec.operator
    if isinstance(B, CustomOperator):
        raise ValueError("custom gradient callbacks cannot be written to a problem file")
    kind = spec.kind
    meta = spec.metadata
    if kind == games.ZERO_SUM:
        d = {"kind": "zero_sum", "L": meta["L"].entries.tolist()}
    elif kind == games.SADDLE:
        d = {"kind": "saddle", "Q1": meta["Q1"].entries.tolist(), "M": meta["M"].entries.tolist(),
             "Q2": meta["Q2"].entries.tolist(), "f": describe_set(spec.f)}
    elif kind in (games.GNE, games.CUSTOM):
        d = {"kind": "gne" if kind == games.GNE else "custom_linear", "dims": list(spec.layout.dims),
             "A": B.A.entries.tolist(), "c": B.c.tolist()}
        d["set" if kind == games.GNE else "f"] = describe_set(spec.f)
    else:
        key = "parts" if kind == games.CYCLIC_PROX else "sets"
        d = {"kind": kind, key: [describe_set(p) for p in meta["parts"]]}
        if not meta.get("identity", True):
            d["maps"] = [L.entries.tolist() for L in meta["maps"]]
    if B.chi_overridden:
        d["chi"] = B.chi
    if "x0" in meta:
        d["x0"] = meta["x0"].tolist()
    if "solver" in meta:
        d["solver"] = dict(meta["solver"])
    return d


def write_problem(spec: games.ProblemSpec, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(spec), indent=2) + "\n")
