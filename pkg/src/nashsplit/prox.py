"""Proximity operators and projections.

Every descriptor acts on the flat concatenation of the blocks of its
layout. The private ``_prox`` methods accept arrays of shape ``(..., n)``
so that projections can be evaluated on batches of points.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .space import BlockVector, DimensionError, SpaceLayout


class InvalidDescriptor(ValueError):
    """Raised for an ill-posed or empty set descriptor."""


def _vec(a, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.array(a, dtype=np.float64)).reshape(-1)
    if np.any(np.isnan(arr)):
        raise InvalidDescriptor(f"{name} contains NaN")
    arr.setflags(write=False)
    return arr


def _layout_for(dim: int, layout: SpaceLayout | None) -> SpaceLayout:
    if layout is None:
        return SpaceLayout((dim,))
    if layout.total_dim != dim:
        raise DimensionError(f"descriptor acts on {dim} coordinates, layout {layout.dims} has {layout.total_dim}")
    return layout


class ProxFunction:
    """Base class: a proper lsc convex function with a closed-form prox."""

    kind = "abstract"
    is_indicator = True

    layout: SpaceLayout

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def _prox(self, z: np.ndarray, gamma: float) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.layout.dims})"


class Zero(ProxFunction):
    """The zero function; its prox is the identity."""

    kind = "zero"
    is_indicator = False

    def __init__(self, dim: int | None = None, layout: SpaceLayout | None = None):
        if dim is None:
            if layout is None:
                raise InvalidDescriptor("Zero needs a dimension or a layout")
            dim = layout.total_dim
        self.layout = _layout_for(int(dim), layout)

    def _prox(self, z, gamma):
        return np.array(z, dtype=np.float64, copy=True)


class IndicatorBox(ProxFunction):
    """Indicator of ``{x : lo <= x <= hi}``; infinite bounds are allowed."""

    kind = "box"

    def __init__(self, lo, hi, layout: SpaceLayout | None = None):
        lo, hi = _vec(lo, "lo"), _vec(hi, "hi")
        if lo.shape != hi.shape:
            raise InvalidDescriptor(f"box bounds have different sizes {lo.size} and {hi.size}")
        if np.any(lo > hi):
            raise InvalidDescriptor("box is empty: lo > hi in some coordinate")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise InvalidDescriptor("box is empty: infinite bound on the wrong side")
        self.lo, self.hi = lo, hi
        self.layout = _layout_for(lo.size, layout)

    def _prox(self, z, gamma):
        return np.clip(z, self.lo, self.hi)


class IndicatorBall(ProxFunction):
    """Indicator of the closed Euclidean ball ``B(center, radius)``."""

    kind = "ball"

    def __init__(self, center, radius: float, layout: SpaceLayout | None = None):
        self.center = _vec(center, "center")
        self.radius = float(radius)
        if not np.all(np.isfinite(self.center)):
            raise InvalidDescriptor("ball center must be finite")
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise InvalidDescriptor(f"ball radius must be positive and finite, got {radius}")
        self.layout = _layout_for(self.center.size, layout)

    def _prox(self, z, gamma):
        d = z - self.center
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > self.radius, self.radius / r, 1.0)
        return self.center + scale * d


class _Hyperplane(ProxFunction):
    def __init__(self, a, b: float, layout: SpaceLayout | None = None):
        self.a = _vec(a, "a")
        self.b = float(b)
        if not np.all(np.isfinite(self.a)) or not np.isfinite(self.b):
            raise InvalidDescriptor("normal vector and offset must be finite")
        self._aa = float(self.a @ self.a)
        if self._aa == 0.0:
            raise InvalidDescriptor("normal vector must be nonzero")
        self.layout = _layout_for(self.a.size, layout)


class IndicatorHalfspace(_Hyperplane):
    """Indicator of ``{x : <a, x> <= b}``."""

    kind = "halfspace"

    def _prox(self, z, gamma):
        excess = np.maximum(z @ self.a - self.b, 0.0)
        return z - (excess / self._aa)[..., None] * self.a


class IndicatorAffine(_Hyperplane):
    """Indicator of the hyperplane ``{x : <a, x> = b}``."""

    kind = "affine"

    def _prox(self, z, gamma):
        excess = z @ self.a - self.b
        return z - (excess / self._aa)[..., None] * self.a


class IndicatorSimplex(ProxFunction):
    """Indicator of the probability simplex in ``R^dim``.

    With ``inequality=True`` the set is ``{x >= 0, sum(x) <= 1}`` instead.
    """

    kind = "simplex"

    def __init__(self, dim: int, inequality: bool = False, layout: SpaceLayout | None = None):
        if int(dim) < 1:
            raise InvalidDescriptor("simplex dimension must be positive")
        self.inequality = bool(inequality)
        self.layout = _layout_for(int(dim), layout)

    def _prox(self, z, gamma):
        if not self.inequality:
            return _project_simplex(z)
        clipped = np.maximum(z, 0.0)
        inside = (clipped.sum(axis=-1) <= 1.0)[..., None]
        return np.where(inside, clipped, _project_simplex(z))


class SeparableSum(ProxFunction):
    """``f(x) = sum_i f_i(x_i)`` where each part owns consecutive blocks."""

    kind = "separable"

    def __init__(self, parts: Sequence[ProxFunction]):
        parts = tuple(parts)
        if not parts:
            raise InvalidDescriptor("a separable sum needs at least one part")
        for p in parts:
            if not isinstance(p, ProxFunction):
                raise InvalidDescriptor(f"part {p!r} is not a ProxFunction")
        self.parts = parts
        dims: tuple[int, ...] = ()
        for p in parts:
            dims += p.layout.dims
        self.layout = SpaceLayout(dims)
        off = np.concatenate(([0], np.cumsum([p.dim for p in parts])))
        self._slices = [slice(int(off[k]), int(off[k + 1])) for k in range(len(parts))]

    @property
    def is_indicator(self):
        return all(p.is_indicator for p in self.parts)

    def _prox(self, z, gamma):
        out = np.empty_like(z, dtype=np.float64)
        for p, sl in zip(self.parts, self._slices):
            out[..., sl] = p._prox(z[..., sl], gamma)
        return out


class ProductSet(SeparableSum):
    """Indicator of a Cartesian product ``C_1 x ... x C_k``."""

    kind = "product"

    def __init__(self, parts: Sequence[ProxFunction]):
        super().__init__(parts)
        bad = [p for p in self.parts if not p.is_indicator]
        if bad:
            raise InvalidDescriptor(f"product set parts must be set indicators, got {bad}")


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Sort-and-threshold projection onto the simplex along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, n + 1)
    cond = u - css / k > 0
    # cond holds for k = 1 and is monotone, so the last True index is the count
    rho = np.count_nonzero(cond, axis=-1)
    theta = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
    return np.maximum(v - theta, 0.0)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x >= 0, sum(x) = 1}``.

    Examples
    --------
    >>> project_simplex([0.4, 0.2, 0.1])
    array([0.5, 0.3, 0.2])
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("project_simplex expects a nonempty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("project_simplex: non-finite input")
    return _project_simplex(v)


def _check_layout(f: ProxFunction, x: BlockVector):
    if x.layout.total_dim != f.dim:
        raise DimensionError(f"point has layout {x.layout.dims}, function expects {f.layout.dims}")


def prox(f: ProxFunction, gamma: float, x: BlockVector) -> BlockVector:
    """Evaluate ``prox_{gamma f}(x) = argmin_y f(y) + ||x - y||^2 / (2 gamma)``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    _check_layout(f, x)
    return BlockVector(x.layout, f._prox(x.data, float(gamma)))


def membership_residual(f: ProxFunction, x: BlockVector) -> float:
    """Distance ``||x - P_C x||`` from ``x`` to the set indicated by ``f``."""
    if not f.is_indicator:
        raise TypeError(f"membership_residual needs a set indicator, got {f!r}")
    _check_layout(f, x)
    return float(np.linalg.norm(x.data - f._prox(x.data, 1.0)))


def distance_batch(f: ProxFunction, points: np.ndarray) -> np.ndarray:
    """Row-wise distance to ``dom f`` for an array of points of shape ``(k, n)``.

    Non-indicator parts have full domain and contribute zero.
    """
    points = np.asarray(points, dtype=np.float64)
    if isinstance(f, SeparableSum):
        sq = np.zeros(points.shape[:-1])
        for p, sl in zip(f.parts, f._slices):
            sq += distance_batch(p, points[..., sl]) ** 2
        return np.sqrt(sq)
    if not f.is_indicator:
        return np.zeros(points.shape[:-1])
    return np.linalg.norm(points - f._prox(points, 1.0), axis=-1)
