"""Block vectors on a product of Euclidean spaces and dense linear maps.

A point of ``H = H_1 x ... x H_m`` is stored as one flat float64 array
together with a :class:`SpaceLayout` that records the per-player block
sizes. Blocks are exposed as read-only views.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when block layouts or matrix shapes do not agree."""


@dataclass(frozen=True)
class SpaceLayout:
    """Per-player block dimensions of a product space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1:
            raise DimensionError("a layout needs at least one block")
        if any(d < 1 for d in dims):
            raise DimensionError(f"block dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def m(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate(([0], np.cumsum(self.dims))))

    def block_slice(self, i: int) -> slice:
        off = self.offsets
        return slice(off[i], off[i + 1])

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        """Split the last axis of ``flat`` into blocks (views)."""
        return [flat[..., self.block_slice(i)] for i in range(self.m)]

    def concat(self, other: "SpaceLayout") -> "SpaceLayout":
        return SpaceLayout(self.dims + other.dims)

    def zeros(self) -> "BlockVector":
        return BlockVector(self, np.zeros(self.total_dim))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BlockVector:
    """An element ``x = (x_1, ..., x_m)`` of the product space.

    ``data`` holds the concatenated blocks. Instances are immutable; the
    arithmetic operators return new vectors.
    """

    layout: SpaceLayout
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = _frozen(self.data).reshape(-1)
        if data.size != self.layout.total_dim:
            raise DimensionError(
                f"data has {data.size} entries, layout {self.layout.dims} needs "
                f"{self.layout.total_dim}"
            )
        object.__setattr__(self, "data", data)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Sequence[float]]) -> "BlockVector":
        arrs = [np.atleast_1d(np.asarray(b, dtype=np.float64)).reshape(-1) for b in blocks]
        layout = SpaceLayout(tuple(a.size for a in arrs))
        return cls(layout, np.concatenate(arrs))

    @property
    def blocks(self) -> list[np.ndarray]:
        return self.layout.split(self.data)

    def block(self, i: int) -> np.ndarray:
        return self.data[self.layout.block_slice(i)]

    def with_block(self, i: int, value) -> "BlockVector":
        data = self.data.copy()
        data[self.layout.block_slice(i)] = value
        return BlockVector(self.layout, data)

    def _check(self, other: "BlockVector"):
        if not isinstance(other, BlockVector):
            return NotImplemented
        if other.layout != self.layout:
            raise DimensionError(f"layout mismatch: {self.layout.dims} vs {other.layout.dims}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return BlockVector(self.layout, self.data + other.data)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return BlockVector(self.layout, self.data - other.data)

    def __mul__(self, alpha):
        return BlockVector(self.layout, float(alpha) * self.data)

    __rmul__ = __mul__

    def __neg__(self):
        return BlockVector(self.layout, -self.data)

    def __eq__(self, other):
        if not isinstance(other, BlockVector):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.data, other.data)

    __hash__ = None

    def allclose(self, other: "BlockVector", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.data, other.data, rtol=0.0, atol=atol))

    def tolist(self) -> list[list[float]]:
        return [b.tolist() for b in self.blocks]


def dot(x: BlockVector, y: BlockVector) -> float:
    """Scalar product ``sum_i <x_i, y_i>`` on the product space."""
    if x.layout != y.layout:
        raise DimensionError(f"layout mismatch: {x.layout.dims} vs {y.layout.dims}")
    return float(np.dot(x.data, y.data))


def norm(x: BlockVector) -> float:
    return float(np.sqrt(max(dot(x, x), 0.0)))


def axpy(alpha: float, x: BlockVector, y: BlockVector) -> BlockVector:
    """Return ``alpha * x + y``."""
    if x.layout != y.layout:
        raise DimensionError(f"layout mismatch: {x.layout.dims} vs {y.layout.dims}")
    return BlockVector(x.layout, float(alpha) * x.data + y.data)


class LinearMap:
    """Dense real matrix acting between two blocks.

    Parameters
    ----------
    entries : array_like, shape (rows, cols)
        Finite matrix entries. A 1-D input is read as a single row.
    """

    def __init__(self, entries):
        arr = np.array(entries, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"a linear map needs a nonempty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("linear map has non-finite entries")
        arr.setflags(write=False)
        self.entries = arr
        self._norm = None

    @classmethod
    def identity(cls, n: int) -> "LinearMap":
        return cls(np.eye(n))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def T(self) -> "LinearMap":
        return LinearMap(self.entries.T)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.cols:
            raise DimensionError(f"map expects {self.cols} columns, got vector of size {x.shape[-1]}")
        return x @ self.entries.T

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape[-1] != self.rows:
            raise DimensionError(f"adjoint expects {self.rows} rows, got vector of size {y.shape[-1]}")
        return y @ self.entries

    def norm(self) -> float:
        if self._norm is None:
            self._norm = spectral_norm(self)
        return self._norm

    def __repr__(self):
        return f"LinearMap({self.rows}x{self.cols})"


def _power_iteration(gram: np.ndarray, v: np.ndarray, rtol: float, max_iter: int) -> float:
    v = v / np.linalg.norm(v)
    rq_old = None
    rq = 0.0
    for _ in range(max_iter):
        w = gram @ v
        rq = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if rq_old is not None and abs(rq - rq_old) <= rtol * abs(rq):
            break
        rq_old = rq
    return max(rq, 0.0)


def spectral_norm(L: LinearMap, rtol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest singular value of ``L`` by power iteration on ``L^T L``.

    The first run starts from the normalized all-ones vector. A second run
    from a fixed pseudo-random start guards against a start vector that is
    exactly orthogonal to the top singular direction (e.g. ``[[1, -1], [-1, 1]]``);
    the larger Rayleigh quotient is kept.
    """
    A = L.entries if isinstance(L, LinearMap) else np.asarray(L, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise ValueError("spectral_norm: non-finite entries")
    if not np.any(A):
        return 0.0
    gram = A.T @ A
    n = gram.shape[0]
    starts = [np.ones(n), np.random.default_rng(0).standard_normal(n)]
    lam = max(_power_iteration(gram, s, rtol, max_iter) for s in starts)
    return float(np.sqrt(lam))
