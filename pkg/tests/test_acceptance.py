"""Acceptance suite: one group of tests per criterion, at the stated tolerances."""

import time

import numpy as np
import pytest

from nashsplit import cli
from nashsplit.games import (
    build_custom_linear,
    build_cyclic_projection,
    build_cyclic_prox,
    build_gne,
    build_saddle,
    build_zero_sum,
    game_value,
    solve_problem,
    verify_equilibrium,
    zero_sum_oracle,
)
from nashsplit.operators import (
    AffineOperator,
    CustomOperator,
    SaddleOperator,
    check_cocoercive,
    check_lipschitz,
    check_monotone,
    finite_difference_gradient,
)
from nashsplit.prox import IndicatorBall, IndicatorBox, IndicatorHalfspace, IndicatorSimplex, ProductSet
from nashsplit.solver import ConfigError, SolverConfig, make_error_schedule
from nashsplit.space import BlockVector, SpaceLayout

bv = BlockVector.from_blocks
PENNIES = [[1, -1], [-1, 1]]
RPS = [[0, -1, 1], [1, 0, -1], [-1, 1, 0]]


def zero_sum_instances():
    return {
        "pennies": (build_zero_sum(PENNIES), bv([[1, 0], [1, 0]])),
        "rps": (build_zero_sum(RPS), bv([[1, 0, 0], [0, 1, 0]])),
    }


def cyclic_instances():
    # starts away from the sets; projecting the origin would land on the
    # interval cycles immediately and leave nothing to measure
    return {
        "intervals": (build_cyclic_projection([IndicatorBox([0], [1]), IndicatorBox([2], [3])]),
                      bv([[-4.0], [7.0]])),
        "balls": (build_cyclic_projection([IndicatorBall([0, 0], 1), IndicatorBall([3, 0], 1)]),
                  bv([[0.0, 1.0], [3.0, -1.0]])),
        "three": (build_cyclic_prox([IndicatorBox([0], [1]), IndicatorBox([4], [5]), IndicatorBox([2], [3])]),
                  bv([[-2.0], [9.0], [0.0]])),
    }


CYCLE_EXPECTED = {"intervals": [1.0, 2.0], "balls": [1.0, 0.0, 2.0, 0.0]}


def cycle_residual(spec, x):
    parts = spec.metadata["parts"]
    m = len(parts)
    return max(np.linalg.norm(x.block(i) - parts[i]._prox(x.block((i + 1) % m), 1.0)) for i in range(m))


def geometric_errors(seed=0):
    return {ch: make_error_schedule("geometric", seed=seed, rho=0.5, magnitude=0.1) for ch in "abc"}


# ---------------------------------------------------------------------------
# 1


@pytest.mark.criterion(1, "zero-sum FBF: residual <= 1e-8, uniform within 1e-6, < 1 s")
@pytest.mark.parametrize("name", ["pennies", "rps"])
def test_zero_sum_correctness(name, record_property):
    spec, x0 = zero_sum_instances()[name]
    t0 = time.perf_counter()
    rep = solve_problem(spec, SolverConfig(method="fbf", tol=1e-8), x0)
    elapsed = time.perf_counter() - t0
    n = spec.layout.dims[0]
    dev = float(np.max(np.abs(rep.final_x.data - 1.0 / n)))
    record_property(f"{name}_dev", f"{dev:.1e}")
    record_property(f"{name}_s", f"{elapsed:.3f}")
    assert rep.converged and rep.final_residual <= 1e-8
    assert dev <= 1e-6
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 2


@pytest.mark.criterion(2, "20 random games: |value - oracle| <= 1e-4, total < 30 s")
def test_oracle_equivalence(record_property):
    worst, t0 = 0.0, time.perf_counter()
    for seed in range(20):
        rng = np.random.default_rng(seed)
        L = rng.uniform(-1, 1, rng.integers(2, 6, size=2))
        spec = build_zero_sum(L)
        rep = solve_problem(spec, SolverConfig(tol=1e-8), certify=False)
        assert rep.converged, f"seed {seed} did not converge"
        gap = abs(game_value(spec, rep.final_x) - zero_sum_oracle(L)[2])
        worst = max(worst, gap)
        assert gap <= 1e-4, f"seed {seed}: value gap {gap}"
    elapsed = time.perf_counter() - t0
    record_property("max_gap", f"{worst:.1e}")
    record_property("total_s", f"{elapsed:.2f}")
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# 3


@pytest.mark.criterion(3, "cyclic fixed points within 1e-6, cycle residual <= 1e-6, < 1 s")
@pytest.mark.parametrize("name", ["intervals", "balls", "three"])
def test_cyclic_fixed_points(name, record_property):
    spec, x0 = cyclic_instances()[name]
    t0 = time.perf_counter()
    rep = solve_problem(spec, x0=x0)
    elapsed = time.perf_counter() - t0
    record_property(f"{name}_s", f"{elapsed:.3f}")
    assert rep.converged
    if name in CYCLE_EXPECTED:
        assert np.max(np.abs(rep.final_x.data - CYCLE_EXPECTED[name])) <= 1e-6
    assert cycle_residual(spec, rep.final_x) <= 1e-6
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 4


@pytest.mark.criterion(4, "chi = 2 cycle: FB converges at gamma = 0.9, FBF guard refuses it")
def test_step_ranges(record_property):
    spec, x0 = cyclic_instances()["balls"]
    assert spec.operator.chi == 2.0
    rep = solve_problem(spec, SolverConfig(method="fb", gamma=0.9, tol=1e-8), x0)
    record_property("fb_iters", rep.iterations)
    assert rep.converged and rep.final_residual <= 1e-8
    assert np.allclose(rep.final_x.data, CYCLE_EXPECTED["balls"], atol=1e-6)
    with pytest.raises(ConfigError, match="step guard"):
        solve_problem(spec, SolverConfig(method="fbf", gamma=0.9), x0)
    # the FBF range is gamma <= (1 - eps)/2 with eps > 0: 0.5 is out, anything below is in
    with pytest.raises(ConfigError, match="step guard"):
        solve_problem(spec, SolverConfig(method="fbf", gamma=0.5), x0)
    assert solve_problem(spec, SolverConfig(method="fbf", gamma=0.49), x0).converged


# ---------------------------------------------------------------------------
# 5


def fejer_instance(k: int):
    rng = np.random.default_rng(1000 + k)
    kind = k % 5
    if kind == 0:
        L = rng.uniform(-1, 1, rng.integers(2, 5, size=2))
        spec = build_zero_sum(L)
        n1, n2 = spec.layout.dims
        x0 = bv([np.eye(n1)[rng.integers(n1)], np.eye(n2)[rng.integers(n2)]])
        return spec, x0
    if kind == 1:
        c1, c2 = rng.uniform(-3, 3, (2, 2))
        spec = build_cyclic_projection([IndicatorBall(c1, 1.0), IndicatorBall(c2, rng.uniform(0.5, 1.5))])
        return spec, bv(list(rng.standard_normal((2, 2)) * 3))
    if kind == 2:
        lo = np.sort(rng.uniform(-5, 5, (3, 2)), axis=1)
        spec = build_cyclic_prox([IndicatorBox([a], [b]) for a, b in lo])
        return spec, bv(list(rng.uniform(-5, 5, (3, 1))))
    if kind == 3:
        G = rng.standard_normal((2, 2))
        f = ProductSet([IndicatorBall([0.0], 1.0), IndicatorBox([-1.0], [1.0])])
        spec = build_saddle(G[:1, :1] ** 2, rng.standard_normal((1, 1)), G[1:, 1:] ** 2, f=f)
        return spec, bv([[rng.uniform(-1, 1)], [rng.uniform(-1, 1)]])
    lay = SpaceLayout((1, 1))
    S = rng.standard_normal((2, 2))
    A = S @ S.T + np.array([[0.0, 1.0], [-1.0, 0.0]]) * rng.uniform(-1, 1)
    C = IndicatorHalfspace(rng.standard_normal(2), rng.uniform(0, 1), layout=lay)
    spec = build_gne(C, AffineOperator(A, c=rng.standard_normal(2), layout=lay))
    return spec, bv([[0.0], [0.0]])


@pytest.mark.criterion(5, "Fejer monotonicity over 100 seeded runs, slack 1e-10")
def test_fejer_suite(record_property):
    worst = -np.inf
    for k in range(100):
        spec, x0 = fejer_instance(k)
        rep = solve_problem(spec, SolverConfig(method=spec.recommended_method(), tol=1e-13, keep_iterates=True),
                            x0, certify=False)
        assert rep.converged, f"run {k} ({spec.kind}) did not converge"
        x_star = rep.final_x
        cert = verify_equilibrium(spec, x_star)
        assert cert.passed, f"run {k} ({spec.kind}): limit not certified, {cert}"
        d = [np.linalg.norm(r.x - x_star.data) for r in rep.trace]
        inc = max((b - a for a, b in zip(d, d[1:])), default=-np.inf)
        worst = max(worst, inc)
        assert inc <= 1e-10, f"run {k} ({spec.kind}): distance grew by {inc}"
    record_property("max_increase", f"{worst:.1e}")


# ---------------------------------------------------------------------------
# 6


@pytest.mark.criterion(6, "Geometric(0.5, 0.1) errors: residual <= 1e-4 within 10x iterations")
@pytest.mark.parametrize("name", ["pennies", "rps", "intervals", "balls", "three"])
def test_error_robustness(name, record_property):
    spec, x0 = {**zero_sum_instances(), **cyclic_instances()}[name]
    method = spec.recommended_method()
    clean = solve_problem(spec, SolverConfig(method=method, tol=1e-8), x0, certify=False)
    assert clean.converged
    budget = 10 * max(clean.iterations, 1)
    used = []
    for seed in range(5):
        cfg = SolverConfig(method=method, tol=1e-4, max_iters=budget, errors=geometric_errors(seed))
        noisy = solve_problem(spec, cfg, x0, certify=False)
        assert noisy.converged and noisy.final_residual <= 1e-4, f"error seed {seed}: {noisy.status.value}"
        used.append(noisy.iterations)
    record_property(name, f"{max(used)}/{budget}")


# ---------------------------------------------------------------------------
# 7


def builder_outputs():
    lay = SpaceLayout((1, 1))
    rng = np.random.default_rng(5)
    return {
        "zero_sum": build_zero_sum(rng.uniform(-1, 1, (3, 4))),
        "saddle": build_saddle(np.diag([2.0, 0.0]), rng.standard_normal((2, 3)), np.eye(3)),
        "gne": build_gne(IndicatorSimplex(2, inequality=True, layout=lay),
                         AffineOperator([[2.0, 1.0], [1.0, 2.0]], layout=lay)),
        "cyclic_prox": build_cyclic_prox([IndicatorBox([0, 0], [1, 1]), IndicatorBall([3, 3], 1)],
                                         maps=[2 * np.eye(2), rng.standard_normal((2, 2))]),
        "cyclic_projection": cyclic_instances()["three"][0],
        "custom_linear": build_custom_linear([[1.0, 2.0, 0.0], [-2.0, 1.0, 0.5], [0.0, -0.5, 0.0]]),
    }


@pytest.mark.criterion(7, "assumption samplers pass on every builder, flag x -> -x")
@pytest.mark.parametrize("name", list(builder_outputs()))
def test_samplers_on_builders(name):
    B = builder_outputs()[name].operator
    for seed in range(5):
        assert check_monotone(B, 1000, seed).passed
        assert check_lipschitz(B, 1000, seed).passed
        if B.cocoercive:
            assert check_cocoercive(B, 1000, seed).passed


@pytest.mark.criterion(7, "assumption samplers pass on every builder, flag x -> -x")
def test_sampler_counterexample(record_property):
    neg = CustomOperator(SpaceLayout((3,)), lambda x: -x.data, chi=1.0)
    rep = check_monotone(neg, 1000, 0)
    record_property("neg_min", f"{rep.value:.3g}")
    assert not rep.passed and rep.value < 0


# ---------------------------------------------------------------------------
# 8


def nonlinear_game():
    M = np.array([[1.0, -0.5], [0.3, 2.0]])
    lay = SpaceLayout((2, 2))
    objectives = [
        lambda x: np.sum(np.exp(0.5 * x.block(0))) + x.block(0) @ M @ x.block(1),
        lambda x: 0.5 * x.block(1) @ x.block(1) - x.block(0) @ M @ x.block(1) + np.sum(np.log(np.cosh(x.block(1)))),
    ]
    gradients = [
        lambda x: 0.5 * np.exp(0.5 * x.block(0)) + M @ x.block(1),
        lambda x: x.block(1) - M.T @ x.block(0) + np.tanh(x.block(1)),
    ]
    return CustomOperator(lay, gradients, chi=10.0, objectives=objectives)


def quadratic_gne():
    lay = SpaceLayout((1, 1))
    return CustomOperator(
        lay,
        [lambda x: 2 * x.block(0) + x.block(1), lambda x: x.block(0) + 2 * x.block(1)],
        chi=3.0,
        objectives=[lambda x: x.data[0] ** 2 + x.data[0] * x.data[1],
                    lambda x: x.data[1] ** 2 + x.data[0] * x.data[1]],
    )


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


@pytest.mark.criterion(8, "custom gradients match central differences, rel. error <= 1e-6")
@pytest.mark.parametrize("make", [nonlinear_game, quadratic_gne], ids=["nonlinear", "quadratic"])
def test_custom_gradients_match_finite_differences(make, record_property):
    B = make()
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        x = BlockVector(B.layout, rng.standard_normal(B.layout.total_dim))
        Bx = B(x)
        for i, g in enumerate(B.objectives):
            err = relative_error(Bx.block(i), finite_difference_gradient(g, i, x))
            worst = max(worst, err)
    record_property(make.__name__, f"{worst:.1e}")
    assert worst <= 1e-6


@pytest.mark.criterion(8, "custom gradients match central differences, rel. error <= 1e-6")
def test_finite_difference_operator_matches_analytic(record_property):
    Q1, M, Q2 = np.array([[2.0, 0.5], [0.5, 1.0]]), np.array([[1.0, -1.0, 0.0], [0.5, 2.0, 1.0]]), np.eye(3)
    S = SaddleOperator(Q1, M, Q2)
    lag = lambda x: 0.5 * x.block(0) @ Q1 @ x.block(0) + x.block(0) @ M @ x.block(1) - 0.5 * x.block(1) @ Q2 @ x.block(1)
    objectives = [lag, lambda x: -lag(x)]
    fd = CustomOperator(S.layout, [lambda x, i=i: finite_difference_gradient(objectives[i], i, x) for i in range(2)],
                        chi=S.chi)
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        x = BlockVector(S.layout, rng.standard_normal(5))
        worst = max(worst, relative_error(fd(x).data, S(x).data))
    record_property("saddle", f"{worst:.1e}")
    assert worst <= 1e-6


# ---------------------------------------------------------------------------
# 9


def acceptance_runs():
    runs = {}
    for name, (spec, x0) in zero_sum_instances().items():
        runs[name] = (spec, SolverConfig(tol=1e-8), x0)
        runs[name + "+errors"] = (spec, SolverConfig(tol=1e-4, errors=geometric_errors(7), seed=7), x0)
    for name, (spec, x0) in cyclic_instances().items():
        runs[name] = (spec, SolverConfig(method="fb", tol=1e-8), x0)
        runs[name + "+errors"] = (spec, SolverConfig(method="fb", tol=1e-4, errors=geometric_errors(7), seed=7), x0)
    spec, x0 = cyclic_instances()["balls"]
    runs["fb_gamma_0.9"] = (spec, SolverConfig(method="fb", gamma=0.9), x0)
    return runs


@pytest.mark.criterion(9, "identical seeds give byte-identical trace files")
@pytest.mark.parametrize("name", list(acceptance_runs()))
def test_traces_byte_identical(name, tmp_path):
    blobs = []
    for k in range(2):
        spec, cfg, x0 = acceptance_runs()[name]
        rep = solve_problem(spec, cfg, x0)
        path = tmp_path / f"trace{k}.csv"
        cli.write_trace(rep, path)
        blobs.append(path.read_bytes())
    assert len(blobs[0]) > 0 and blobs[0] == blobs[1]
