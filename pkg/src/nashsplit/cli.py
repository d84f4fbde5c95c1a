"""Command line front end.

::

    nashsplit solve problem.json [--method fbf|fb] [--gamma G] [--tol T] [--max-iters N]
                                 [--errors geometric:RHO:MAG] [--seed S] [--trace out.csv]
                                 [--report out.json] [--trace-every K]
    nashsplit check problem.json [--samples N] [--seeds 0 1 2]
    nashsplit oracle problem.json

``solve`` exits with 0 (converged), 2 (iteration cap), 3 (diverged) or
1 (bad input).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import games
from .operators import ContractError, check_cocoercive, check_lipschitz, check_monotone
from .problem_io import ProblemFileError, load_problem
from .solver import ConfigError, SolveReport, SolverConfig, Status, make_error_schedule
from .space import DimensionError

EXIT_CODES = {Status.CONVERGED: 0, Status.MAX_ITERS: 2, Status.DIVERGED: 3}
EXIT_INPUT = 1


@dataclass
class RunRequest:
    problem: str | Path | games.ProblemSpec
    overrides: dict = field(default_factory=dict)
    trace_path: str | Path | None = None
    report_path: str | Path | None = None


def parse_errors(text: str, seed: int = 0) -> dict:
    """``"geometric:RHO:MAG"`` or ``"zero"`` -> schedules for channels a, b and c."""
    if isinstance(text, dict):
        out = {}
        for ch, spec in text.items():
            out[ch] = make_error_schedule(spec.get("kind", "zero"), seed=spec.get("seed", seed),
                                          rho=spec.get("rho", 0.5), magnitude=spec.get("magnitude", 1.0))
        return out
    parts = str(text).split(":")
    if parts[0] == "zero":
        return {}
    if parts[0] != "geometric" or len(parts) != 3:
        raise ConfigError(f"errors must be 'zero' or 'geometric:RHO:MAG', got {text!r}")
    try:
        rho, mag = float(parts[1]), float(parts[2])
    except ValueError as exc:
        raise ConfigError(f"errors: bad number in {text!r}") from exc
    try:
        sched = make_error_schedule("geometric", seed=seed, rho=rho, magnitude=mag)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return {ch: sched for ch in "abc"}


def build_config(spec: games.ProblemSpec, overrides: dict) -> SolverConfig:
    """Merge file-level solver settings with command line overrides."""
    settings = dict(spec.metadata.get("solver", {}))
    settings.update({k: v for k, v in overrides.items() if v is not None})
    seed = int(settings.get("seed", 0))
    errors = parse_errors(settings["errors"], seed) if settings.get("errors") is not None else None
    return SolverConfig(
        method=settings.get("method", spec.recommended_method()),
        gamma=settings.get("gamma"),
        epsilon=settings.get("epsilon"),
        tol=float(settings.get("tol", 1e-8)),
        max_iters=int(settings.get("max_iters", 1_000_000)),
        trace_every=int(settings.get("trace_every", 1)),
        seed=seed,
        errors=errors,
    )


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trace(report: SolveReport, path) -> None:
    """CSV with one row per recorded iteration: iter, residual, gamma, block norms."""
    m = len(report.final_x.layout.dims)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "residual", "gamma"] + [f"norm_x{i + 1}" for i in range(m)])
        for rec in report.trace:
            w.writerow([rec.iteration, _fmt(rec.residual), _fmt(rec.gamma)] + [_fmt(v) for v in rec.block_norms])


def report_dict(spec: games.ProblemSpec, report: SolveReport) -> dict:
    d = {
        "kind": spec.kind,
        "status": report.status.value,
        "iterations": report.iterations,
        "final_residual": report.final_residual,
        "final_x": report.final_x.tolist(),
        "method": report.method.value,
        "gamma_range": list(report.gammas),
        "epsilon": report.epsilon,
        "chi": report.chi,
        "chi_source": report.chi_source,
    }
    cert = report.equilibrium_check
    if cert is not None:
        d["certificate"] = cert.to_dict()
        if cert.value is not None:
            d["value"] = cert.value
    return d


def run(req: RunRequest, out=None) -> int:
    """Execute one solve request; return the process exit code."""
    out = sys.stdout if out is None else out
    try:
        spec = req.problem if isinstance(req.problem, games.ProblemSpec) else load_problem(req.problem)
        cfg = build_config(spec, req.overrides)
        x0 = spec.metadata.get("x0")
        report = games.solve_problem(spec, cfg, x0)
    except (ProblemFileError, ConfigError, DimensionError, ContractError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if req.trace_path is not None:
        write_trace(report, req.trace_path)
    rd = report_dict(spec, report)
    if req.report_path is not None:
        Path(req.report_path).write_text(json.dumps(rd, indent=2) + "\n")
    print(f"kind:       {spec.kind}", file=out)
    print(f"method:     {report.method.value}  gamma in [{report.gammas[0]:.6g}, {report.gammas[1]:.6g}]"
          f"  eps={report.epsilon:.6g}  chi={report.chi:.6g} ({report.chi_source})", file=out)
    print(f"status:     {report.status.value} after {report.iterations} iterations", file=out)
    print(f"residual:   {report.final_residual:.3e}", file=out)
    for i, b in enumerate(report.final_x.blocks):
        print(f"x{i + 1}:         {np.array2string(b, precision=8)}", file=out)
    cert = report.equilibrium_check
    if cert is not None:
        print(f"certificate: {cert.status.upper()} ({cert.method}; max gap {cert.max_gap:.3e})", file=out)
        if cert.value is not None:
            print(f"value:      {cert.value:.10g}", file=out)
    return EXIT_CODES[report.status]


def _cmd_solve(args) -> int:
    overrides = {
        "method": args.method,
        "gamma": args.gamma,
        "epsilon": args.epsilon,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "errors": args.errors,
        "seed": args.seed,
        "trace_every": args.trace_every,
    }
    return run(RunRequest(args.problem, overrides, args.trace, args.report))


def _cmd_check(args) -> int:
    try:
        spec = load_problem(args.problem)
    except (ProblemFileError, DimensionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    B = spec.operator
    ok = True
    for seed in args.seeds:
        checks = [check_monotone(B, args.samples, seed), check_lipschitz(B, args.samples, seed)]
        if B.cocoercive:
            checks.append(check_cocoercive(B, args.samples, seed))
        for rep in checks:
            ok &= rep.passed
            print(rep)
        if not B.cocoercive:
            print(f"cocoercive: skipped (operator not declared cocoercive, seed={seed})")
    return 0 if ok else 2


def _cmd_oracle(args) -> int:
    try:
        spec = load_problem(args.problem)
    except (ProblemFileError, DimensionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if spec.kind != games.ZERO_SUM:
        print(f"no brute-force oracle for kind {spec.kind!r}", file=sys.stderr)
        return EXIT_INPUT
    try:
        x1, x2, v = games.zero_sum_oracle(spec.metadata["L"])
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"x1:    {np.array2string(x1, precision=10)}")
    print(f"x2:    {np.array2string(x2, precision=10)}")
    print(f"value: {v:.12g}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nashsplit", description="Nash equilibria by monotone operator splitting")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run FBF or FB on a problem file")
    s.add_argument("problem")
    s.add_argument("--method", choices=["fbf", "fb"])
    s.add_argument("--gamma", type=float)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--errors", help="zero or geometric:RHO:MAG")
    s.add_argument("--seed", type=int)
    s.add_argument("--trace", help="CSV trace output path")
    s.add_argument("--report", help="JSON report output path")
    s.add_argument("--trace-every", type=int)
    s.set_defaults(func=_cmd_solve)

    c = sub.add_parser("check", help="sample monotonicity, Lipschitz and cocoercivity")
    c.add_argument("problem")
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seeds", type=int, nargs="+", default=[0])
    c.set_defaults(func=_cmd_check)

    o = sub.add_parser("oracle", help="brute-force equilibrium (zero-sum games)")
    o.add_argument("problem")
    o.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
