"""Problem builders for the application families and independent equilibrium oracles.

A :class:`ProblemSpec` bundles the common penalty ``f`` (a prox-friendly
function on the joint space) with the stacked gradient operator ``B``.
Zeros of ``df + B`` are Nash equilibria of the game, so solving the
inclusion and then checking each player's best response is the intended
workflow; :func:`verify_equilibrium` does the second half with oracles
that never look at the solver's residual.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .operators import (
    AffineOperator,
    CustomOperator,
    CyclicOperator,
    MonotoneOperator,
    SaddleOperator,
    ZeroSumOperator,
    check_monotone,
)
from .prox import (
    IndicatorSimplex,
    ProductSet,
    ProxFunction,
    SeparableSum,
    Zero,
    distance_batch,
)
from .solver import Method, SolveReport, SolverConfig, solve
from .space import BlockVector, DimensionError, LinearMap, SpaceLayout

ZERO_SUM = "zero_sum"
SADDLE = "saddle"
GNE = "gne"
CYCLIC_PROX = "cyclic_prox"
CYCLIC_PROJECTION = "cyclic_projection"
CUSTOM = "custom"

GRID_STEP = 1e-3
# half-width of the local verification grid, per block dimension
GRID_RADIUS = {1: 0.5, 2: 0.05, 3: 0.01}
MAX_ORACLE_DIM = 6

# batch objective: (k, n) joint points -> (k,) penalties
Objective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    layout: SpaceLayout
    f: ProxFunction
    operator: MonotoneOperator
    metadata: dict = field(default_factory=dict)
    objectives: tuple[Objective, ...] | None = None

    def __post_init__(self):
        if self.f.dim != self.layout.total_dim or self.operator.layout.total_dim != self.layout.total_dim:
            raise DimensionError(
                f"f ({self.f.layout.dims}) and B ({self.operator.layout.dims}) do not share layout {self.layout.dims}"
            )

    @property
    def m(self) -> int:
        return self.layout.m

    def recommended_method(self) -> Method:
        return Method.FB if self.operator.cocoercive else Method.FBF

    def start_point(self) -> BlockVector:
        """Projection of the origin onto ``dom f``."""
        return BlockVector(self.layout, self.f._prox(np.zeros(self.layout.total_dim), 1.0))


@dataclass(frozen=True)
class EquilibriumCertificate:
    """Per-player optimality gaps and the verdict at a tolerance.

    ``status`` is ``"pass"``, ``"fail"`` or ``"unverifiable"`` (the grid
    oracle refuses block dimensions above 3).
    """

    kind: str
    method: str
    gaps: tuple[float, ...]
    feasibility: float
    tol: float
    status: str
    value: float | None = None
    oracle_value: float | None = None

    @property
    def max_gap(self) -> float:
        return max(self.gaps) if self.gaps else float("nan")

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "method": self.method,
            "status": self.status,
            "gaps": list(self.gaps),
            "max_gap": self.max_gap,
            "feasibility": self.feasibility,
            "tol": self.tol,
            "value": self.value,
            "oracle_value": self.oracle_value,
        }


def _bilinear_objectives(L: np.ndarray, n1: int) -> tuple[Objective, Objective]:
    def g1(Z):
        return np.einsum("ki,ij,kj->k", Z[:, :n1], L, Z[:, n1:])

    def g2(Z):
        return -g1(Z)

    return g1, g2


def build_zero_sum(L, chi: float | None = None) -> ProblemSpec:
    """Two-player zero-sum matrix game over mixed strategies.

    Player 1 minimizes ``x_1^T L x_2`` over the simplex, player 2 maximizes it.
    """
    L = L if isinstance(L, LinearMap) else LinearMap(L)
    n1, n2 = L.rows, L.cols
    B = ZeroSumOperator(L, chi=chi)
    f = ProductSet([IndicatorSimplex(n1), IndicatorSimplex(n2)])
    return ProblemSpec(ZERO_SUM, B.layout, f, B, {"L": L}, _bilinear_objectives(L.entries, n1))


def build_saddle(Q1, M, Q2, f: ProxFunction | None = None, chi: float | None = None) -> ProblemSpec:
    """Convex-concave quadratic saddle problem.

    Player 1 minimizes and player 2 maximizes
    ``0.5 x1'Q1 x1 + x1'M x2 - 0.5 x2'Q2 x2`` subject to the common penalty ``f``.
    """
    B = SaddleOperator(Q1, M, Q2, chi=chi)
    f = Zero(layout=B.layout) if f is None else f
    n1 = B.layout.dims[0]
    Q1e, Me, Q2e = B.Q1.entries, B.M.entries, B.Q2.entries

    def lag(Z):
        x1, x2 = Z[:, :n1], Z[:, n1:]
        return (0.5 * np.einsum("ki,ij,kj->k", x1, Q1e, x1)
                + np.einsum("ki,ij,kj->k", x1, Me, x2)
                - 0.5 * np.einsum("ki,ij,kj->k", x2, Q2e, x2))

    return ProblemSpec(SADDLE, B.layout, f, B, {"Q1": B.Q1, "M": B.M, "Q2": B.Q2},
                       (lag, lambda Z: -lag(Z)))


def _wrap_objectives(layout: SpaceLayout, objs) -> tuple[Objective, ...] | None:
    if objs is None:
        return None

    def batch(g):
        return lambda Z: np.array([g(BlockVector(layout, z)) for z in Z])

    return tuple(batch(g) for g in objs)


def build_gne(C: ProxFunction, gradients: MonotoneOperator, objectives=None,
              monotone_samples: int = 200) -> ProblemSpec:
    """Generalized Nash equilibrium with a shared constraint set ``C``.

    ``gradients`` is the stacked partial-gradient operator; it must pass a
    sampled monotonicity check. ``objectives`` (per-player penalties on
    :class:`BlockVector`) are optional and only sharpen the certificate.
    """
    if not C.is_indicator:
        raise ValueError(f"build_gne needs a set indicator for the shared constraint, got {C!r}")
    if C.dim != gradients.layout.total_dim:
        raise DimensionError(f"constraint acts on {C.dim} coordinates, gradients on {gradients.layout.total_dim}")
    rep = check_monotone(gradients, monotone_samples, seed=0)
    if not rep.passed:
        raise ValueError(f"player gradients are not monotone: {rep}")
    layout = gradients.layout
    if objectives is None and isinstance(gradients, CustomOperator):
        objectives = gradients.objectives
    return ProblemSpec(GNE, layout, C, gradients, {}, _wrap_objectives(layout, objectives))


def _cyclic(kind: str, parts: Sequence[ProxFunction], maps=None, chi: float | None = None) -> ProblemSpec:
    parts = list(parts)
    if len(parts) < 2:
        raise DimensionError("a cycle needs at least two players")
    if maps is None:
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimensionError(f"all players must share one dimension, got {[p.dim for p in parts]}")
        maps = [LinearMap.identity(parts[0].dim) for _ in parts]
        identity = True
    else:
        maps = [m if isinstance(m, LinearMap) else LinearMap(m) for m in maps]
        identity = all(m.rows == m.cols and np.array_equal(m.entries, np.eye(m.rows)) for m in maps)
    B = CyclicOperator(maps, chi=chi)
    for i, (p, L) in enumerate(zip(parts, maps)):
        if p.dim != L.cols:
            raise DimensionError(f"player {i}: function has {p.dim} coordinates, map has {L.cols} columns")
    f = SeparableSum(parts)
    layout = B.layout
    m = len(parts)
    mats = [L.entries for L in maps]

    def objective(i):
        j = (i + 1) % m
        si, sj = layout.block_slice(i), layout.block_slice(j)
        return lambda Z: 0.5 * np.sum((Z[:, si] @ mats[i].T - Z[:, sj] @ mats[j].T) ** 2, axis=1)

    return ProblemSpec(kind, layout, f, B, {"parts": tuple(parts), "maps": tuple(maps), "identity": identity},
                       tuple(objective(i) for i in range(m)))


def build_cyclic_prox(parts: Sequence[ProxFunction], maps=None, chi: float | None = None) -> ProblemSpec:
    """Cyclic proximation: player ``i`` wants ``L_i x_i`` close to ``L_{i+1} x_{i+1}``.

    With the default identity maps the equilibria are the cycles
    ``x_i = prox_{f_i}(x_{i+1})`` and the forward-backward step reads
    ``x_i <- prox_{gamma f_i}((1 - gamma) x_i + gamma x_{i+1})``.
    """
    return _cyclic(CYCLIC_PROX, parts, maps, chi)


def build_cyclic_projection(sets: Sequence[ProxFunction], chi: float | None = None) -> ProblemSpec:
    """Cycles of projections ``x_i = P_{C_i} x_{i+1}`` for closed convex sets."""
    for i, s in enumerate(sets):
        if not s.is_indicator:
            raise ValueError(f"set {i} is not an indicator: {s!r}")
    return _cyclic(CYCLIC_PROJECTION, sets, chi=chi)


def build_custom_linear(A, c=None, f: ProxFunction | None = None, layout: SpaceLayout | None = None,
                        chi: float | None = None) -> ProblemSpec:
    """Affine player gradients ``B x = A x + c`` with common penalty ``f``."""
    B = AffineOperator(A, c, layout=layout, chi=chi)
    f = Zero(layout=B.layout) if f is None else f
    return ProblemSpec(CUSTOM, B.layout, f, B, {"A": B.A, "c": B.c})


def solve_problem(spec: ProblemSpec, cfg: SolverConfig | None = None, x0: BlockVector | None = None,
                  certify: bool = True, cert_tol: float = 1e-6) -> SolveReport:
    """Run the configured splitting method and attach an equilibrium certificate."""
    cfg = SolverConfig(method=spec.recommended_method()) if cfg is None else cfg
    x0 = spec.start_point() if x0 is None else x0
    report = solve(spec.f, spec.operator, x0, cfg)
    if certify and np.all(np.isfinite(report.final_x.data)):
        report.equilibrium_check = verify_equilibrium(spec, report.final_x, tol=cert_tol)
    return report


# ---------------------------------------------------------------------------
# oracles


def zero_sum_oracle(L, atol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, float]:
    """Equilibrium of the zero-sum game ``x_1^T L x_2`` by support enumeration.

    Player 1 (rows) minimizes, player 2 (columns) maximizes. For every
    support pair ``(I, J)`` the indifference systems are solved; a pair is
    kept when both strategies are nonnegative and no pure deviation helps.
    Supports are scanned by increasing total size.
    """
    L = np.array(L.entries if isinstance(L, LinearMap) else L, dtype=np.float64)
    if L.ndim != 2 or L.size == 0:
        raise ValueError("payoff matrix must be a nonempty 2-D array")
    n1, n2 = L.shape
    if max(n1, n2) > MAX_ORACLE_DIM:
        raise ValueError(f"support enumeration is limited to {MAX_ORACLE_DIM} strategies per player")
    scale = max(1.0, float(np.abs(L).max()))
    tol = atol * scale
    supports = [
        (I, J)
        for I in _subsets(n1)
        for J in _subsets(n2)
    ]
    supports.sort(key=lambda s: (len(s[0]) + len(s[1]), len(s[0])))
    for I, J in supports:
        x2, v2 = _indifference(L[np.ix_(I, J)], tol)
        if x2 is None:
            continue
        x1, v1 = _indifference(L[np.ix_(I, J)].T, tol)
        if x1 is None or abs(v1 - v2) > 10 * tol:
            continue
        s1, s2 = np.zeros(n1), np.zeros(n2)
        s1[list(I)], s2[list(J)] = x1, x2
        v = float(s1 @ L @ s2)
        # player 1 best response: no row cheaper than v; player 2: no column richer
        if (L @ s2).min() >= v - 10 * tol and (L.T @ s1).max() <= v + 10 * tol:
            return s1, s2, v
    raise RuntimeError("support enumeration found no equilibrium; this indicates a bug")


def _subsets(n: int):
    for k in range(1, n + 1):
        yield from itertools.combinations(range(n), k)


def _indifference(A: np.ndarray, tol: float):
    """Solve ``A s = v 1, sum(s) = 1`` for ``s >= 0``; unique solutions only."""
    r, c = A.shape
    K = np.zeros((r + 1, c + 1))
    K[:r, :c] = A
    K[:r, c] = -1.0
    K[r, :c] = 1.0
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    if np.linalg.matrix_rank(K) < c + 1:
        return None, None
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    if np.linalg.norm(K @ sol - rhs) > tol:
        return None, None
    s, v = sol[:c], sol[c]
    if s.min() < -tol:
        return None, None
    s = np.maximum(s, 0.0)
    return s / s.sum(), float(v)


def _feasibility(f: ProxFunction, x: BlockVector) -> float:
    return float(distance_batch(f, x.data[None, :])[0])


def _local_grid(d: int) -> np.ndarray:
    r = GRID_RADIUS[d]
    k = int(round(r / GRID_STEP))
    axis = np.arange(-k, k + 1) * GRID_STEP
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def _grid_gaps(spec: ProblemSpec, x: BlockVector, feas: float, tol: float):
    """Local best-response search for each player on a step-``GRID_STEP`` grid.

    The search is local because each player's problem is convex in its own
    strategy over a convex slice, so local and global optimality coincide.
    Without objectives the linearized gap ``<grad_i, x_i - y>`` is used; by
    convexity it bounds the objective gap from above.
    """
    z = x.data
    Bx = spec.operator._apply(z)
    gaps = []
    for i in range(spec.m):
        sl = spec.layout.block_slice(i)
        Y = z[sl] + _local_grid(sl.stop - sl.start)
        Z = np.repeat(z[None, :], len(Y), axis=0)
        Z[:, sl] = Y
        ok = distance_batch(spec.f, Z) <= max(1e-9, feas + 1e-12)
        if spec.objectives is not None:
            vals = spec.objectives[i](Z[ok])
            here = float(spec.objectives[i](z[None, :])[0])
            gap = here - float(vals.min()) if vals.size else 0.0
        else:
            lin = (z[sl] - Y[ok]) @ Bx[sl]
            gap = float(lin.max()) if lin.size else 0.0
        gaps.append(max(gap, 0.0))
    return tuple(gaps)


def verify_equilibrium(spec: ProblemSpec, x: BlockVector, tol: float = 1e-6) -> EquilibriumCertificate:
    """Check each player's optimality at ``x`` with an oracle independent of the solver.

    * zero-sum: exact best responses over pure strategies, plus the
      support-enumeration game value when the game is small enough;
    * cyclic with identity maps: ``||x_i - prox_{f_i}(x_{i+1})||``;
    * everything else: a local grid search over the player's feasible slice
      for block dimensions up to 3, otherwise ``status="unverifiable"``.
    """
    if x.layout.total_dim != spec.layout.total_dim:
        raise DimensionError(f"point layout {x.layout.dims} does not match problem layout {spec.layout.dims}")
    x = BlockVector(spec.layout, x.data)
    feas = _feasibility(spec.f, x)
    value = oracle_value = None

    if spec.kind == ZERO_SUM:
        L = spec.metadata["L"].entries
        x1, x2 = x.blocks
        value = float(x1 @ L @ x2)
        gaps = (value - float((L @ x2).min()), float((L.T @ x1).max()) - value)
        method = "pure best response"
        if max(L.shape) <= MAX_ORACLE_DIM:
            oracle_value = zero_sum_oracle(L)[2]
            method += " + support enumeration"
    elif spec.kind in (CYCLIC_PROX, CYCLIC_PROJECTION) and spec.metadata.get("identity", False):
        parts = spec.metadata["parts"]
        blocks = x.blocks
        m = len(parts)
        gaps = tuple(
            float(np.linalg.norm(blocks[i] - parts[i]._prox(blocks[(i + 1) % m], 1.0))) for i in range(m)
        )
        method = "cycle residual"
    else:
        if max(spec.layout.dims) > 3:
            return EquilibriumCertificate(spec.kind, "grid", (), feas, tol, "unverifiable")
        gaps = _grid_gaps(spec, x, feas, tol)
        method = "local grid" + (" (objective)" if spec.objectives is not None else " (linearized)")

    gaps = tuple(max(float(g), 0.0) for g in gaps)
    ok = feas <= tol and max(gaps) <= tol
    if oracle_value is not None and abs(value - oracle_value) > max(tol, 1e-4):
        ok = False
    return EquilibriumCertificate(spec.kind, method, gaps, feas, tol, "pass" if ok else "fail", value, oracle_value)


def game_value(spec: ProblemSpec, x: BlockVector) -> float:
    """Payoff ``x_1^T L x_2`` of a zero-sum game at ``x``."""
    if spec.kind != ZERO_SUM:
        raise ValueError("game_value is defined for zero-sum games only")
    x1, x2 = BlockVector(spec.layout, x.data).blocks
    return float(x1 @ spec.metadata["L"].entries @ x2)
