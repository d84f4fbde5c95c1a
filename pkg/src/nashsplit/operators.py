"""Stacked player-gradient operators ``B x = (grad_1 g_1(x), ..., grad_m g_m(x))``.

Each operator carries a Lipschitz constant ``chi``. For the structured
kinds it is computed at construction; passing ``chi=`` overrides it and
sets ``chi_source = "override"`` so that reports can flag it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .space import BlockVector, DimensionError, LinearMap, SpaceLayout, spectral_norm

MONOTONE_TOL = 1e-10
LIPSCHITZ_RTOL = 1e-9
COCOERCIVE_TOL = 1e-10


class ContractError(TypeError):
    """Raised when an operation is called outside its contract."""


def _as_map(M) -> LinearMap:
    return M if isinstance(M, LinearMap) else LinearMap(M)


class MonotoneOperator:
    """Single-valued monotone operator on a product space."""

    kind = "abstract"
    cocoercive = False

    def __init__(self, layout: SpaceLayout, chi: float, chi_source: str = "computed"):
        chi = float(chi)
        if not (chi >= 0 and np.isfinite(chi)):
            raise ValueError(f"chi must be finite and nonnegative, got {chi}")
        self.layout = layout
        self.chi = chi
        self.chi_source = chi_source

    @property
    def chi_overridden(self) -> bool:
        return self.chi_source == "override"

    def _apply(self, z: np.ndarray) -> np.ndarray:
        """Apply to a flat array of shape ``(..., n)``."""
        raise NotImplementedError

    def __call__(self, x: BlockVector) -> BlockVector:
        return apply(self, x)

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.layout.dims}, chi={self.chi:.6g})"


def _resolve_chi(op: MonotoneOperator, computed: Callable[[], float], chi):
    if chi is None:
        MonotoneOperator.__init__(op, op.layout, computed(), "computed")
    else:
        MonotoneOperator.__init__(op, op.layout, chi, "override")


class ZeroSumOperator(MonotoneOperator):
    """``B(x_1, x_2) = (L x_2, -L^T x_1)`` for the bilinear payoff ``x_1^T L x_2``."""

    kind = "zero_sum"

    def __init__(self, L, chi: float | None = None):
        self.L = _as_map(L)
        self.layout = SpaceLayout((self.L.rows, self.L.cols))
        _resolve_chi(self, self.L.norm, chi)

    def _apply(self, z):
        n1 = self.L.rows
        x1, x2 = z[..., :n1], z[..., n1:]
        return np.concatenate([self.L.apply(x2), -self.L.adjoint(x1)], axis=-1)


class SaddleOperator(MonotoneOperator):
    """Gradient field of ``0.5 x1'Q1 x1 + x1'M x2 - 0.5 x2'Q2 x2``.

    Player 1 minimizes the saddle function and player 2 maximizes it, so
    ``B(x_1, x_2) = (Q1 x_1 + M x_2, Q2 x_2 - M^T x_1)``.
    """

    kind = "saddle"

    def __init__(self, Q1, M, Q2, chi: float | None = None):
        self.M = _as_map(M)
        n1, n2 = self.M.rows, self.M.cols
        self.Q1 = _psd_map(Q1, n1, "Q1")
        self.Q2 = _psd_map(Q2, n2, "Q2")
        self.layout = SpaceLayout((n1, n2))
        _resolve_chi(self, lambda: spectral_norm(self.stacked()), chi)

    def stacked(self) -> LinearMap:
        """The linear map ``[[Q1, M], [-M^T, Q2]]`` on the joint space."""
        top = np.hstack([self.Q1.entries, self.M.entries])
        bottom = np.hstack([-self.M.entries.T, self.Q2.entries])
        return LinearMap(np.vstack([top, bottom]))

    def _apply(self, z):
        n1 = self.M.rows
        x1, x2 = z[..., :n1], z[..., n1:]
        g1 = self.Q1.apply(x1) + self.M.apply(x2)
        g2 = self.Q2.apply(x2) - self.M.adjoint(x1)
        return np.concatenate([g1, g2], axis=-1)


def _psd_map(Q, n: int, name: str) -> LinearMap:
    Q = _as_map(Q)
    if Q.rows != n or Q.cols != n:
        raise DimensionError(f"{name} must be {n}x{n}, got {Q.rows}x{Q.cols}")
    A = Q.entries
    scale = max(1.0, float(np.abs(A).max()))
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(A).min() < -1e-12 * scale:
        raise ValueError(f"{name} must be positive semidefinite")
    return Q


class CyclicOperator(MonotoneOperator):
    """Block ``i`` is ``L_i^T (L_i x_i - L_{i+1} x_{i+1})`` with ``L_{m+1} = L_1``.

    The operator is ``1/chi``-cocoercive with ``chi = 2 max_i ||L_i||^2``.
    """

    kind = "cyclic"
    cocoercive = True

    def __init__(self, maps: Sequence, chi: float | None = None):
        self.maps = tuple(_as_map(L) for L in maps)
        if len(self.maps) < 2:
            raise DimensionError("a cyclic operator needs at least two players")
        rows = {L.rows for L in self.maps}
        if len(rows) != 1:
            raise DimensionError(f"all maps must share one target space, got row counts {sorted(rows)}")
        self.layout = SpaceLayout(tuple(L.cols for L in self.maps))
        _resolve_chi(self, lambda: 2.0 * max(L.norm() for L in self.maps) ** 2, chi)

    def _apply(self, z):
        blocks = self.layout.split(z)
        images = [L.apply(b) for L, b in zip(self.maps, blocks)]
        m = len(self.maps)
        out = [L.adjoint(images[i] - images[(i + 1) % m]) for i, L in enumerate(self.maps)]
        return np.concatenate(out, axis=-1)


class AffineOperator(MonotoneOperator):
    """``B x = A x + c`` on a joint layout.

    ``chi`` defaults to ``||A||``. The operator is flagged cocoercive when
    ``A`` is symmetric positive semidefinite, in which case it is
    ``1/||A||``-cocoercive.
    """

    kind = "custom"

    def __init__(self, A, c=None, layout: SpaceLayout | None = None,
                 chi: float | None = None, cocoercive: bool | None = None):
        self.A = _as_map(A)
        if self.A.rows != self.A.cols:
            raise DimensionError(f"A must be square, got {self.A.rows}x{self.A.cols}")
        n = self.A.rows
        self.layout = layout if layout is not None else SpaceLayout((n,))
        if self.layout.total_dim != n:
            raise DimensionError(f"layout {self.layout.dims} does not match A of size {n}")
        self.c = np.zeros(n) if c is None else np.array(c, dtype=np.float64).reshape(-1)
        if self.c.size != n:
            raise DimensionError(f"offset c has {self.c.size} entries, expected {n}")
        self.c.setflags(write=False)
        _resolve_chi(self, self.A.norm, chi)
        if cocoercive is None:
            E = self.A.entries
            sym = np.allclose(E, E.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(E).max()))
            cocoercive = bool(sym and np.linalg.eigvalsh(E).min() >= -1e-12 * max(1.0, np.abs(E).max()))
        self.cocoercive = bool(cocoercive)

    def _apply(self, z):
        return self.A.apply(z) + self.c


class CustomOperator(MonotoneOperator):
    """Operator built from user gradient callbacks.

    Parameters
    ----------
    layout : SpaceLayout
    gradients : callable or sequence of callables
        Either one callable mapping a :class:`BlockVector` to the stacked
        gradient (flat array or BlockVector), or one callable per player
        returning ``grad_i g_i(x)`` as an array of that block's length.
    chi : float
        Declared Lipschitz constant. It cannot be derived from callbacks.
    cocoercive : bool
        Whether ``B`` is declared ``1/chi``-cocoercive.
    objectives : sequence of callables, optional
        Player penalties ``g_i(x)``; used by equilibrium certificates.
    """

    kind = "custom"

    def __init__(self, layout: SpaceLayout, gradients, chi: float,
                 cocoercive: bool = False, objectives=None):
        super().__init__(layout, chi, "declared")
        if callable(gradients):
            self._field, self._grads = gradients, None
        else:
            grads = tuple(gradients)
            if len(grads) != layout.m:
                raise DimensionError(f"expected {layout.m} gradient callbacks, got {len(grads)}")
            self._field, self._grads = None, grads
        self.cocoercive = bool(cocoercive)
        self.objectives = None if objectives is None else tuple(objectives)

    def _apply_one(self, z):
        x = BlockVector(self.layout, z)
        if self._field is not None:
            out = self._field(x)
            out = out.data if isinstance(out, BlockVector) else np.asarray(out, dtype=np.float64).reshape(-1)
        else:
            parts = [np.atleast_1d(np.asarray(g(x), dtype=np.float64)).reshape(-1) for g in self._grads]
            for i, p in enumerate(parts):
                if p.size != self.layout.dims[i]:
                    raise DimensionError(f"gradient {i} returned {p.size} entries, block has {self.layout.dims[i]}")
            out = np.concatenate(parts)
        if out.size != self.layout.total_dim:
            raise DimensionError(f"gradient field returned {out.size} entries, expected {self.layout.total_dim}")
        return out

    def _apply(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            return self._apply_one(z)
        flat = z.reshape(-1, z.shape[-1])
        return np.stack([self._apply_one(r) for r in flat]).reshape(z.shape)


def apply(B: MonotoneOperator, x: BlockVector) -> BlockVector:
    """Evaluate ``B x``."""
    if x.layout.total_dim != B.layout.total_dim:
        raise DimensionError(f"point layout {x.layout.dims} does not match operator layout {B.layout.dims}")
    return BlockVector(x.layout, B._apply(x.data))


@dataclass(frozen=True)
class SamplerReport:
    """Outcome of a randomized assumption check."""

    check: str
    value: float
    passed: bool
    samples: int
    seed: int
    chi: float

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.check}: {verdict} (value={self.value:.6g}, samples={self.samples}, seed={self.seed})"


def _sample_pairs(B: MonotoneOperator, samples: int, seed: int):
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    n = B.layout.total_dim
    X = rng.standard_normal((samples, n))
    Y = rng.standard_normal((samples, n))
    return X, Y, B._apply(X) - B._apply(Y)


def monotonicity_gap(B: MonotoneOperator, x: BlockVector, y: BlockVector) -> float:
    """``<Bx - By, x - y>``."""
    return float((B._apply(x.data) - B._apply(y.data)) @ (x.data - y.data))


def cocoercive_slack(B: MonotoneOperator, x: BlockVector, y: BlockVector, chi: float | None = None) -> float:
    """``<Bx - By, x - y> - ||Bx - By||^2 / chi``."""
    chi = B.chi if chi is None else chi
    d = B._apply(x.data) - B._apply(y.data)
    inner = float(d @ (x.data - y.data))
    return inner if chi == 0 else inner - float(d @ d) / chi


def check_monotone(B: MonotoneOperator, samples: int = 1000, seed: int = 0) -> SamplerReport:
    """Sample ``<Bx - By, x - y>`` over random pairs; report the minimum."""
    X, Y, D = _sample_pairs(B, samples, seed)
    diff = X - Y
    inner = np.einsum("ij,ij->i", D, diff)
    ok = inner >= -MONOTONE_TOL * (1.0 + np.einsum("ij,ij->i", diff, diff))
    return SamplerReport("monotone", float(inner.min()), bool(ok.all()), samples, seed, B.chi)


def check_lipschitz(B: MonotoneOperator, samples: int = 1000, seed: int = 0,
                    chi: float | None = None) -> SamplerReport:
    """Sample ``||Bx - By|| / ||x - y||``; report the maximum against ``chi``."""
    chi = B.chi if chi is None else float(chi)
    X, Y, D = _sample_pairs(B, samples, seed)
    ratio = np.linalg.norm(D, axis=1) / np.linalg.norm(X - Y, axis=1)
    worst = float(ratio.max())
    return SamplerReport("lipschitz", worst, worst <= chi * (1.0 + LIPSCHITZ_RTOL), samples, seed, chi)


def check_cocoercive(B: MonotoneOperator, samples: int = 1000, seed: int = 0) -> SamplerReport:
    """Sample the ``1/chi``-cocoercivity slack; report the minimum."""
    if not B.cocoercive:
        raise ContractError(f"{B!r} is not declared cocoercive")
    X, Y, D = _sample_pairs(B, samples, seed)
    inner = np.einsum("ij,ij->i", D, X - Y)
    if B.chi == 0:
        slack = inner
    else:
        slack = inner - np.einsum("ij,ij->i", D, D) / B.chi
    worst = float(slack.min())
    return SamplerReport("cocoercive", worst, worst >= -COCOERCIVE_TOL, samples, seed, B.chi)


def finite_difference_gradient(g: Callable[[BlockVector], float], i: int, x: BlockVector,
                               h: float = 1e-5) -> np.ndarray:
    """Central-difference approximation of the partial gradient of ``g`` in block ``i``."""
    if not h > 0:
        raise ValueError("h must be positive")
    sl = x.layout.block_slice(i)
    grad = np.empty(sl.stop - sl.start)
    base = x.data.copy()
    for k, j in enumerate(range(sl.start, sl.stop)):
        up, dn = base.copy(), base.copy()
        up[j] += h
        dn[j] -= h
        grad[k] = (g(BlockVector(x.layout, up)) - g(BlockVector(x.layout, dn))) / (2.0 * h)
    return grad
