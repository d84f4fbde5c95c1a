import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nashsplit.games import build_cyclic_projection, build_zero_sum
from nashsplit.operators import AffineOperator, CustomOperator, ZeroSumOperator
from nashsplit.prox import IndicatorBall, IndicatorBox, ProductSet, IndicatorSimplex, Zero
from nashsplit.solver import (
    ConfigError,
    Method,
    SolverConfig,
    Status,
    check_steps,
    default_gamma,
    make_error_schedule,
    residual,
    solve,
    solve_fb,
    solve_fbf,
)
from nashsplit.space import BlockVector, SpaceLayout

bv = BlockVector.from_blocks
PENNIES = [[1, -1], [-1, 1]]


def identity_op(n=1, cocoercive=True):
    return CustomOperator(SpaceLayout((n,)), lambda x: x.data, chi=1.0, cocoercive=cocoercive)


def zero_op(n=1):
    return AffineOperator(np.zeros((n, n)))


def test_fbf_zero_problem_converges_at_start():
    x0 = bv([[3.0, -1.0]])
    rep = solve_fbf(Zero(2), zero_op(2), x0, SolverConfig())
    assert rep.status is Status.CONVERGED and rep.iterations == 0
    assert rep.final_x == x0


def test_fbf_one_step_on_identity():
    # y = 0.5x, p = 0.5x, q = p - 0.5p = 0.25x, x+ = x - y + q = 0.75x
    cfg = SolverConfig(method="fbf", gamma=0.5, max_iters=1, keep_iterates=True)
    rep = solve_fbf(Zero(1), identity_op(cocoercive=False), bv([[4.0]]), cfg)
    assert rep.status is Status.MAX_ITERS
    assert rep.final_x.data[0] == 3.0
    assert [r.iteration for r in rep.trace] == [0, 1]


def test_fbf_matching_pennies():
    spec = build_zero_sum(PENNIES)
    rep = solve_fbf(spec.f, spec.operator, bv([[1, 0], [1, 0]]), SolverConfig(tol=1e-10))
    assert rep.converged
    assert np.allclose(rep.final_x.data, 0.5, atol=1e-8)


def test_fb_one_step_on_identity():
    cfg = SolverConfig(method="fb", gamma=1.0, max_iters=1)
    rep = solve_fb(Zero(1), identity_op(), bv([[7.0]]), cfg)
    assert rep.final_x.data[0] == 0.0


def test_fb_two_intervals():
    spec = build_cyclic_projection([IndicatorBox([0], [1]), IndicatorBox([2], [3])])
    rep = solve_fb(spec.f, spec.operator, bv([[0], [3]]), SolverConfig(method="fb", gamma=0.5))
    assert rep.converged
    assert np.allclose(rep.final_x.data, [1.0, 2.0], atol=1e-7)


def test_fb_zero_operator_is_stationary():
    x0 = bv([[0.25, -4.0]])
    rep = solve_fb(Zero(2), zero_op(2), x0, SolverConfig(method="fb", max_iters=5))
    assert rep.final_x == x0 and rep.iterations == 0


def test_fb_refuses_non_cocoercive():
    spec = build_zero_sum(PENNIES)
    with pytest.raises(ConfigError):
        solve_fb(spec.f, spec.operator, spec.start_point(), SolverConfig(method="fb"))
    with pytest.raises(ConfigError):
        solve_fb(spec.f, spec.operator, spec.start_point(), SolverConfig(method="fbf"))


def test_residual_examples():
    assert residual(Zero(1), identity_op(), bv([[2.0]]), 1.0) == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert residual(IndicatorBall([0, 0], 1), zero_op(2), bv([[0.3, -0.4]]), 1.0) == 0.0


def test_default_gamma_examples():
    eps, g = default_gamma(1.0, Method.FBF)
    assert g == pytest.approx(0.9) and eps == pytest.approx(0.05)
    assert g <= (1 - eps) / 1.0 + 1e-15
    assert default_gamma(2.0, Method.FB)[1] == pytest.approx(0.9)
    assert default_gamma(0.0, "fbf")[1] == 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.sampled_from(["fbf", "fb"]))
def test_default_gamma_is_admissible(chi, method):
    eps, g = default_gamma(chi, method)
    assert check_steps(chi, method, eps, [g]) == eps


def test_step_guard_boundaries():
    # exact upper ends accepted
    assert check_steps(1.0, "fbf", 0.1, [0.9]) == 0.1
    assert check_steps(2.0, "fb", 0.2, [0.9]) == 0.2
    with pytest.raises(ConfigError, match="step guard"):
        check_steps(1.0, "fbf", 0.1, [0.9 + 1e-12])
    with pytest.raises(ConfigError, match="step guard"):
        check_steps(2.0, "fb", 0.2, [0.9 + 1e-12])
    # gamma = 1/chi leaves no room for eps > 0
    with pytest.raises(ConfigError, match="step guard"):
        check_steps(1.0, "fbf", None, [1.0])
    # eps must be strictly below 1/(chi+1)
    with pytest.raises(ConfigError):
        check_steps(1.0, "fbf", 0.5, [0.5])
    with pytest.raises(ConfigError):
        check_steps(1.0, "fbf", 0.1, [0.05])
    with pytest.raises(ConfigError):
        check_steps(1.0, "fbf", None, [0.5, -1.0])


def test_solver_refuses_bad_steps_before_iterating():
    calls = []
    B = CustomOperator(SpaceLayout((1,)), lambda x: calls.append(1) or x.data, chi=1.0)
    with pytest.raises(ConfigError):
        solve_fbf(Zero(1), B, bv([[1.0]]), SolverConfig(gamma=1.5))
    assert calls == []


def test_varying_step_sequence():
    spec = build_zero_sum(PENNIES)
    cfg = SolverConfig(gamma=[0.1, 0.2, 0.3, 0.45])
    rep = solve(spec.f, spec.operator, bv([[1, 0], [0, 1]]), cfg)
    assert rep.converged and rep.gammas == (0.1, 0.45)
    assert [r.gamma for r in rep.trace[:5]] == [0.1, 0.2, 0.3, 0.45, 0.45]


def test_error_schedules():
    z = make_error_schedule("zero")
    assert all(e is None for _, e in zip(range(5), z.stream(3)))
    g = make_error_schedule("geometric", seed=1, rho=0.5, magnitude=1.0)
    draws = [e for _, e in zip(range(6), g.stream(4))]
    assert np.linalg.norm(draws[3]) == pytest.approx(0.125, rel=1e-12)
    assert g.norm_at(3) == 0.125
    g9 = make_error_schedule("geometric", rho=0.9, magnitude=1.0)
    total = sum(np.linalg.norm(e) for _, e in zip(range(2000), g9.stream(2)))
    assert total <= 1 / (1 - 0.9)
    with pytest.raises(ValueError):
        make_error_schedule("geometric", rho=1.0)
    a = [e for _, e in zip(range(3), g.stream(4, (0, 1)))]
    b = [e for _, e in zip(range(3), g.stream(4, (0, 1)))]
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_divergence_is_reported():
    B = CustomOperator(SpaceLayout((1,)), lambda x: np.array([np.nan]), chi=1.0)
    rep = solve_fbf(Zero(1), B, bv([[1.0]]), SolverConfig(gamma=0.5))
    assert rep.status is Status.DIVERGED


def fejer_violation(rep, x_star):
    d = [np.linalg.norm(r.x - x_star) for r in rep.trace]
    return max(b - a for a, b in zip(d, d[1:]))


@pytest.mark.parametrize("method", ["fbf", "fb"])
def test_fejer_monotone_against_known_solution(method):
    # strongly monotone affine field on a ball: the zero of df + B is unique
    A = np.array([[2.0, 1.0], [1.0, 3.0]]) if method == "fb" else np.array([[1.0, 2.0], [-2.0, 1.0]])
    B = AffineOperator(A, c=[-4.0, 1.0])
    f = IndicatorBall([0.0, 0.0], 1.0)
    ref = solve(f, B, bv([[0.0, 0.0]]), SolverConfig(method=method, tol=1e-14))
    x_star = ref.final_x.data
    rep = solve(f, B, bv([[0.9, -0.3]]), SolverConfig(method=method, tol=1e-10, keep_iterates=True))
    assert rep.converged
    assert fejer_violation(rep, x_star) <= 1e-10


def test_fbf_dual_sequence_agrees():
    spec = build_zero_sum([[0.3, -1.0, 0.2], [0.5, 0.1, -0.7]])
    cfg = SolverConfig(tol=1e-9)
    rep = solve_fbf(spec.f, spec.operator, spec.start_point(), cfg)
    assert rep.converged
    assert np.linalg.norm(rep.final_x.data - rep.final_p.data) <= 10 * cfg.tol
    assert rep.trace[-1].p_gap <= 10 * cfg.tol


def test_fb_gradient_gap_vanishes():
    spec = build_cyclic_projection([IndicatorBall([0, 0], 1), IndicatorBall([3, 0], 1)])
    cfg = SolverConfig(method="fb", tol=1e-9)
    rep = solve_fb(spec.f, spec.operator, spec.start_point(), cfg)
    assert rep.converged
    gaps = [r.grad_gap for r in rep.trace]
    assert gaps[-1] == 0.0
    # eventually below 10 tol and stays there
    k = next(i for i, g in enumerate(gaps) if g <= 10 * cfg.tol)
    assert all(g <= 10 * cfg.tol for g in gaps[k:])


def test_converged_implies_tolerance():
    spec = build_zero_sum(np.random.default_rng(2).uniform(-1, 1, (3, 3)))
    rep = solve(spec.f, spec.operator, spec.start_point(), SolverConfig(tol=1e-7))
    assert rep.converged and rep.final_residual <= 1e-7
    assert rep.trace[-1].residual == rep.final_residual
    r = residual(spec.f, spec.operator, rep.final_x, rep.gammas[0])
    assert r == rep.final_residual


def test_identical_runs_are_bitwise_equal():
    spec = build_zero_sum(np.random.default_rng(3).uniform(-1, 1, (4, 3)))
    errs = {ch: make_error_schedule("geometric", seed=5, rho=0.5, magnitude=0.1) for ch in "abc"}
    runs = [solve(spec.f, spec.operator, spec.start_point(), SolverConfig(errors=errs, seed=9)) for _ in range(2)]
    assert np.array_equal(runs[0].final_x.data, runs[1].final_x.data)
    assert [r.residual for r in runs[0].trace] == [r.residual for r in runs[1].trace]


def test_errors_perturb_but_still_converge():
    spec = build_zero_sum(PENNIES)
    errs = {ch: make_error_schedule("geometric", seed=1, rho=0.5, magnitude=0.1) for ch in "abc"}
    rep = solve(spec.f, spec.operator, spec.start_point(), SolverConfig(errors=errs, tol=1e-6))
    assert rep.converged
    assert np.allclose(rep.final_x.data, 0.5, atol=1e-5)


def test_trace_every_and_callback():
    spec = build_zero_sum(PENNIES)
    seen = []
    rep = solve(spec.f, spec.operator, bv([[1, 0], [1, 0]]), SolverConfig(trace_every=7, callback=seen.append))
    iters = [r.iteration for r in rep.trace]
    assert iters[:-1] == list(range(0, rep.iterations, 7))
    assert iters[-1] == rep.iterations
    assert len(iters) == -(-rep.iterations // 7) + 1
    assert seen == rep.trace


def test_unknown_error_channel_rejected():
    with pytest.raises(ConfigError):
        SolverConfig(errors={"d": make_error_schedule()})


def test_simplex_feasibility_of_prox_outputs():
    class Spy(ProductSet):
        outputs = []

        def _prox(self, z, gamma):
            out = super()._prox(z, gamma)
            self.outputs.append(out.copy())
            return out

    L = np.random.default_rng(11).uniform(-1, 1, (3, 2))
    f = Spy([IndicatorSimplex(3), IndicatorSimplex(2)])
    B = ZeroSumOperator(L)
    rep = solve_fbf(f, B, bv([[1, 0, 0], [0, 1]]), SolverConfig(tol=1e-9))
    assert rep.converged and len(Spy.outputs) > 10
    P = np.array(Spy.outputs)
    for sl in (slice(0, 3), slice(3, 5)):
        assert P[:, sl].min() >= 0.0
        assert np.max(np.abs(P[:, sl].sum(axis=1) - 1.0)) <= 1e-12
