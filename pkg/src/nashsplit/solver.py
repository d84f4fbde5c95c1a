"""Forward-backward-forward and forward-backward splitting for ``0 in df(x) + Bx``.

Both routines accept the absolutely summable error sequences ``a_n``,
``b_n`` (and ``c_n`` for FBF) of the convergence theory. Step sizes are
checked against the admissible ranges before the first iteration:

* FBF: ``eps in ]0, 1/(chi+1)[`` and ``gamma_n in [eps, (1-eps)/chi]``;
* FB:  ``eps in ]0, 2/(chi+1)[`` and ``gamma_n in [eps, (2-eps)/chi]``,
  with ``B`` required to be ``1/chi``-cocoercive.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .operators import MonotoneOperator
from .prox import ProxFunction
from .space import BlockVector, DimensionError

# Step cap when chi = 0 (B is identically zero).
GAMMA_MAX_DEFAULT = 1e8


class ConfigError(ValueError):
    """Raised when a solver configuration violates the step-size guarantees."""


class Method(str, enum.Enum):
    FBF = "fbf"
    FB = "fb"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class ErrorSchedule:
    """Deterministic perturbation sequence ``e_n`` for one error channel.

    ``geometric`` draws a seeded random direction each iteration and scales
    it to norm ``magnitude * rho**n``.
    """

    kind: str = "zero"
    rho: float = 0.0
    magnitude: float = 0.0
    seed: int = 0

    def norm_at(self, n: int) -> float:
        return 0.0 if self.kind == "zero" else self.magnitude * self.rho ** n

    def stream(self, dim: int, salt: Sequence[int] = ()) -> Iterator[np.ndarray | None]:
        """Yield ``e_0, e_1, ...``; ``None`` stands for an exactly zero term."""
        if self.kind == "zero":
            while True:
                yield None
        rng = np.random.default_rng([self.seed, *salt])
        n = 0
        while True:
            d = rng.standard_normal(dim)
            nd = np.linalg.norm(d)
            yield d * (self.norm_at(n) / nd) if nd > 0 else np.zeros(dim)
            n += 1


def make_error_schedule(kind: str = "zero", seed: int = 0, rho: float = 0.5,
                        magnitude: float = 1.0) -> ErrorSchedule:
    """Build an error sequence; ``geometric`` requires ``0 <= rho < 1``."""
    kind = kind.lower()
    if kind == "zero":
        return ErrorSchedule("zero", seed=seed)
    if kind != "geometric":
        raise ValueError(f"unknown error schedule kind {kind!r}")
    if not 0 <= rho < 1:
        raise ValueError(f"rho={rho} does not give an absolutely summable sequence (need 0 <= rho < 1)")
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    return ErrorSchedule("geometric", float(rho), float(magnitude), int(seed))


@dataclass
class TraceRecord:
    iteration: int
    residual: float
    gamma: float
    block_norms: tuple[float, ...]
    x: np.ndarray | None = None
    # FB: ||B x_n - B x_final||; FBF: ||x_n - p_n||
    grad_gap: float | None = None
    p_gap: float | None = None
    _Bx: np.ndarray | None = field(default=None, repr=False)


@dataclass
class SolverConfig:
    """Settings for :func:`solve_fbf` / :func:`solve_fb`.

    ``gamma`` may be a float (constant step), a sequence (``gamma_n`` with
    the last value repeated), or ``None`` for :func:`default_gamma`.
    ``epsilon=None`` picks the largest margin compatible with the steps.
    ``errors`` maps channel names ``"a"``, ``"b"``, ``"c"`` to schedules.
    """

    method: Method | str = Method.FBF
    gamma: float | Sequence[float] | None = None
    epsilon: float | None = None
    max_iters: int = 1_000_000
    tol: float = 1e-8
    errors: Mapping[str, ErrorSchedule] | None = None
    trace_every: int = 1
    keep_iterates: bool = False
    seed: int = 0
    callback: Callable[[TraceRecord], None] | None = None

    def __post_init__(self):
        self.method = Method(str(getattr(self.method, "value", self.method)).lower())
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.trace_every < 1:
            raise ConfigError("trace_every must be at least 1")
        for ch in (self.errors or {}):
            if ch not in ("a", "b", "c"):
                raise ConfigError(f"unknown error channel {ch!r}")


@dataclass
class SolveReport:
    status: Status
    iterations: int
    final_x: BlockVector
    final_residual: float
    trace: list[TraceRecord]
    method: Method
    epsilon: float
    gammas: tuple[float, float]
    chi: float
    chi_source: str
    final_p: BlockVector | None = None
    equilibrium_check: object = None

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def _bounds(chi: float, method: Method) -> tuple[float, float]:
    """``(K, c)`` with gamma upper bound ``(K - eps)/chi`` and default eps factor ``c``."""
    return (1.0, 0.5) if method is Method.FBF else (2.0, 1.0)


def gamma_upper(chi: float, method: Method | str, epsilon: float) -> float:
    K, _ = _bounds(chi, Method(method))
    return GAMMA_MAX_DEFAULT if chi == 0 else (K - epsilon) / chi


def epsilon_upper(chi: float, method: Method | str) -> float:
    K, _ = _bounds(chi, Method(method))
    return K / (chi + 1.0)


def default_epsilon(chi: float, method: Method | str, gammas: Sequence[float]) -> float:
    """Margin ``eps`` used when the configuration leaves it unset.

    ``min(min gamma, c/(chi+1), (K - chi max gamma)/2)`` with ``(K, c)`` equal
    to ``(1, 0.5)`` for FBF and ``(2, 1)`` for FB. A nonpositive value means
    that no admissible ``eps`` exists for these steps.
    """
    method = Method(method)
    K, c = _bounds(chi, method)
    eps = min(min(gammas), c / (chi + 1.0))
    if chi > 0:
        eps = min(eps, (K - chi * max(gammas)) / 2.0)
    return eps


def default_gamma(chi: float, method: Method | str) -> tuple[float, float]:
    """Return ``(epsilon, gamma)``: 90% of the admissible step ``1/chi`` (FBF) or ``2/chi`` (FB)."""
    method = Method(method)
    if chi < 0:
        raise ValueError("chi must be nonnegative")
    if chi == 0:
        gamma = 1.0
    else:
        gamma = (0.9 if method is Method.FBF else 1.8) / chi
    return default_epsilon(chi, method, [gamma]), gamma


def check_steps(chi: float, method: Method | str, epsilon: float | None,
                gammas: Sequence[float]) -> float:
    """Validate a step schedule; return the ``eps`` in force."""
    method = Method(method)
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ConfigError("empty step schedule")
    if not all(np.isfinite(g) and g > 0 for g in gammas):
        raise ConfigError("step sizes must be positive and finite")
    name = method.value.upper()
    if epsilon is None:
        epsilon = default_epsilon(chi, method, gammas)
        if epsilon <= 0:
            raise ConfigError(
                f"{name} step guard: gamma={max(gammas):.6g} admits no eps; "
                f"steps must stay below {_bounds(chi, method)[0]:g}/chi = {_bounds(chi, method)[0] / chi:.6g}"
            )
    eps_max = epsilon_upper(chi, method)
    if not 0 < epsilon < eps_max:
        raise ConfigError(f"{name} step guard: eps={epsilon:.6g} must lie in ]0, {eps_max:.6g}[")
    hi = gamma_upper(chi, method, epsilon)
    for n, g in enumerate(gammas):
        if not epsilon <= g <= hi:
            raise ConfigError(
                f"{name} step guard: gamma_{n}={g:.6g} outside [eps, ({_bounds(chi, method)[0]:g}-eps)/chi]"
                f" = [{epsilon:.6g}, {hi:.6g}] (chi={chi:.6g})"
            )
    return float(epsilon)


def _gamma_list(cfg: SolverConfig, chi: float) -> list[float]:
    if cfg.gamma is None:
        return [default_gamma(chi, cfg.method)[1]]
    if np.isscalar(cfg.gamma):
        return [float(cfg.gamma)]
    return [float(g) for g in cfg.gamma]


def residual(f: ProxFunction, B: MonotoneOperator, x: BlockVector, gamma: float) -> float:
    """Normalized fixed-point residual ``||x - prox_{gamma f}(x - gamma Bx)|| / (1 + ||x||)``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    z = x.data
    r = z - f._prox(z - gamma * B._apply(z), gamma)
    return float(np.linalg.norm(r) / (1.0 + np.linalg.norm(z)))


def _normalized(r: np.ndarray, x: np.ndarray) -> float:
    # overflow shows up as a non-finite residual, which the loops report as Diverged
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.linalg.norm(r) / (1.0 + np.linalg.norm(x)))


def _prepare(f, B, x0, cfg, method):
    if cfg.method is not method:
        raise ConfigError(f"config method is {cfg.method.value}, expected {method.value}")
    if f.dim != B.layout.total_dim:
        raise DimensionError(f"function layout {f.layout.dims} does not match operator layout {B.layout.dims}")
    if x0.layout.total_dim != B.layout.total_dim:
        raise DimensionError(f"x0 layout {x0.layout.dims} does not match operator layout {B.layout.dims}")
    if method is Method.FB and not B.cocoercive:
        raise ConfigError("forward-backward needs a cocoercive operator; use FBF instead")
    gammas = _gamma_list(cfg, B.chi)
    eps = check_steps(B.chi, method, cfg.epsilon, gammas)
    errors = cfg.errors or {}
    n = B.layout.total_dim
    streams = {
        ch: (errors[ch].stream(n, (cfg.seed, k)) if ch in errors else None)
        for k, ch in enumerate("abc")
    }
    return gammas, eps, streams


def _draw(stream):
    return None if stream is None else next(stream)


class _Tracer:
    def __init__(self, cfg, layout):
        self.cfg, self.layout, self.records = cfg, layout, []

    def record(self, n, res, gamma, x, Bx=None, p=None):
        rec = TraceRecord(
            iteration=n,
            residual=res,
            gamma=gamma,
            block_norms=tuple(float(np.linalg.norm(b)) for b in self.layout.split(x)),
            x=x.copy() if self.cfg.keep_iterates else None,
            p_gap=None if p is None else float(np.linalg.norm(x - p)),
            _Bx=None if Bx is None else Bx.copy(),
        )
        self.records.append(rec)
        if self.cfg.callback is not None:
            self.cfg.callback(rec)


def solve_fbf(f: ProxFunction, B: MonotoneOperator, x0: BlockVector, cfg: SolverConfig) -> SolveReport:
    """Forward-backward-forward splitting.

    Each iteration::

        y = x - gamma (B x + a)
        p = prox_{gamma f}(y) + b
        q = p - gamma (B p + c)
        x = x - y + q

    The iteration stops once the normalized fixed-point residual at ``x``
    is at most ``cfg.tol``. The last ``p`` is returned as ``final_p``; both
    ``x_n`` and ``p_n`` approach the same solution.
    """
    gammas, eps, streams = _prepare(f, B, x0, cfg, Method.FBF)
    layout = x0.layout
    tracer = _Tracer(cfg, layout)
    x = np.array(x0.data, dtype=np.float64)
    p = x.copy()
    status, res, n = Status.MAX_ITERS, np.nan, 0
    for n in range(cfg.max_iters + 1):
        g = gammas[min(n, len(gammas) - 1)]
        a, b, c = (_draw(streams[ch]) for ch in "abc")
        Bx = B._apply(x)
        y = x - g * Bx if a is None else x - g * (Bx + a)
        p_clean = f._prox(y, g)
        if a is None:
            r = x - p_clean
        else:
            r = x - f._prox(x - g * Bx, g)
        res = _normalized(r, x)
        p = p_clean if b is None else p_clean + b
        if not np.isfinite(res):
            status = Status.DIVERGED
            tracer.record(n, res, g, x, p=p)
            break
        done = res <= cfg.tol
        if done or n == cfg.max_iters or n % cfg.trace_every == 0:
            tracer.record(n, res, g, x, p=p)
        if done:
            status = Status.CONVERGED
            break
        if n == cfg.max_iters:
            break
        Bp = B._apply(p)
        q = p - g * Bp if c is None else p - g * (Bp + c)
        x = x - y + q
        if not np.all(np.isfinite(x)):
            status = Status.DIVERGED
            n += 1
            tracer.record(n, np.nan, g, x)
            break
    return SolveReport(
        status=status,
        iterations=n,
        final_x=BlockVector(layout, x),
        final_residual=res if status is not Status.DIVERGED else float("nan"),
        trace=tracer.records,
        method=Method.FBF,
        epsilon=eps,
        gammas=(min(gammas), max(gammas)),
        chi=B.chi,
        chi_source=B.chi_source,
        final_p=BlockVector(layout, p) if np.all(np.isfinite(p)) else None,
    )


def solve_fb(f: ProxFunction, B: MonotoneOperator, x0: BlockVector, cfg: SolverConfig) -> SolveReport:
    """Forward-backward splitting for cocoercive ``B``.

    Each iteration::

        y = x - gamma (B x + a)
        x = prox_{gamma f}(y) + b

    Trace records carry ``grad_gap = ||B x_n - B x_final||``, which tends
    to zero along the run.
    """
    gammas, eps, streams = _prepare(f, B, x0, cfg, Method.FB)
    layout = x0.layout
    tracer = _Tracer(cfg, layout)
    x = np.array(x0.data, dtype=np.float64)
    status, res, n = Status.MAX_ITERS, np.nan, 0
    for n in range(cfg.max_iters + 1):
        g = gammas[min(n, len(gammas) - 1)]
        a, b = _draw(streams["a"]), _draw(streams["b"])
        _draw(streams["c"])
        Bx = B._apply(x)
        y = x - g * Bx if a is None else x - g * (Bx + a)
        x_next = f._prox(y, g)
        if a is None:
            r = x - x_next
        else:
            r = x - f._prox(x - g * Bx, g)
        res = _normalized(r, x)
        if not np.isfinite(res):
            status = Status.DIVERGED
            tracer.record(n, res, g, x)
            break
        done = res <= cfg.tol
        if done or n == cfg.max_iters or n % cfg.trace_every == 0:
            tracer.record(n, res, g, x, Bx=Bx)
        if done:
            status = Status.CONVERGED
            break
        if n == cfg.max_iters:
            break
        x = x_next if b is None else x_next + b
        if not np.all(np.isfinite(x)):
            status = Status.DIVERGED
            n += 1
            tracer.record(n, np.nan, g, x)
            break
    if status is not Status.DIVERGED:
        B_final = B._apply(x)
        for rec in tracer.records:
            if rec._Bx is not None:
                rec.grad_gap = float(np.linalg.norm(rec._Bx - B_final))
    for rec in tracer.records:
        rec._Bx = None
    return SolveReport(
        status=status,
        iterations=n,
        final_x=BlockVector(layout, x),
        final_residual=res if status is not Status.DIVERGED else float("nan"),
        trace=tracer.records,
        method=Method.FB,
        epsilon=eps,
        gammas=(min(gammas), max(gammas)),
        chi=B.chi,
        chi_source=B.chi_source,
    )


def solve(f: ProxFunction, B: MonotoneOperator, x0: BlockVector, cfg: SolverConfig) -> SolveReport:
    """Dispatch on ``cfg.method``."""
    return solve_fbf(f, B, x0, cfg) if cfg.method is Method.FBF else solve_fb(f, B, x0, cfg)
