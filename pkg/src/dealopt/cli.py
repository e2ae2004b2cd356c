"""Command-line entry point.

Verbs: run (one solver on one generated problem), sweep (a named preset),
certify (re-check a persisted trace), analyze (rate/complexity report for a
trace), envelope (evaluate an envelope at a point), oracle (debugging access
to the numerical oracles).  Exit codes: 0 ok, 1 usage error, 2 certificate
failure, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, bench, envelopes, oracles, problems
from .core import (DataError, IterateTrace, NumericalError, UsageError,
                   certify_descent, certify_displacement, min_grad_bound_check)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CERTIFICATE = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deal",
                                     description="generalized-descent benchmark runner")
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run one solver variant on a generated problem")
    run.add_argument("--problem", choices=("leastp", "lasso", "powerabs", "quadratic"),
                     default="leastp")
    run.add_argument("--m", type=int, default=1000)
    run.add_argument("--n", type=int, default=200)
    run.add_argument("--p", type=float, default=1.5, help="least-p exponent")
    run.add_argument("--lam", type=float, default=0.1, help="l1 weight")
    run.add_argument("--s", type=float, default=4.0, help="separable power exponent")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--consistent", action="store_true", default=True)
    run.add_argument("--inconsistent", dest="consistent", action="store_false")
    run.add_argument("--solver", choices=bench.DEAL_SOLVERS, default="deal-c")
    run.add_argument("--beta", default="auto",
                     help="'auto' = (1-nu)/nu, or a real > -1")
    run.add_argument("--direction", choices=("grad", "bb1", "bb2", "lbfgs"),
                     default="grad")
    run.add_argument("--sigma", type=float, default=None)
    run.add_argument("--eta", type=float, default=0.5)
    run.add_argument("--alpha-bar", type=float, default=None)
    run.add_argument("--gamma", type=float, default=None)
    run.add_argument("--order", default="auto",
                     help="'auto' matches the dominance exponent, or a real > 1")
    run.add_argument("--eps", type=float, default=1e-6)
    run.add_argument("--max-iter", type=int, default=10000)
    run.add_argument("--x0-seed", type=int, default=0)
    run.add_argument("--repetitions", type=int, default=1)
    run.add_argument("--no-store-iterates", dest="store", action="store_false")
    run.add_argument("--out", default="runs/single")

    sweep = sub.add_parser("sweep", help="run a named preset study")
    sweep.add_argument("--preset", choices=("sec51", "sec52", "sec53"), required=True)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", default="runs")
    sweep.add_argument("--config", default=None,
                       help="JSON config file; overrides the preset fields")

    cert = sub.add_parser("certify", help="re-check certificates on a trace CSV")
    cert.add_argument("--trace", required=True)
    cert.add_argument("--rho", type=float, required=True)
    cert.add_argument("--theta", type=float, required=True)
    cert.add_argument("--c", type=float, default=None, help="displacement constant")
    cert.add_argument("--fstar", type=float, default=None)
    cert.add_argument("--rel-tol", type=float, default=1e-10)

    ana = sub.add_parser("analyze", help="rate fit and bound report for a trace CSV")
    ana.add_argument("--trace", required=True)
    ana.add_argument("--fstar", type=float, required=True)
    ana.add_argument("--tau", type=float, default=None)
    ana.add_argument("--vartheta", type=float, default=None)
    ana.add_argument("--rho", type=float, default=None)
    ana.add_argument("--theta", type=float, default=None)
    ana.add_argument("--eps", type=float, default=1e-6)
    ana.add_argument("--tail-fraction", type=float, default=0.5)

    env = sub.add_parser("envelope", help="evaluate an envelope at a point")
    env.add_argument("--g", choices=("l1", "powerabs"), default="l1")
    env.add_argument("--weight", type=float, default=1.0, help="l1 weight")
    env.add_argument("--s", type=float, default=4.0)
    env.add_argument("--p", type=float, default=2.0)
    env.add_argument("--gamma", type=float, default=0.5)
    env.add_argument("--at", required=True,
                     help="JSON file holding the evaluation point (array)")

    orc = sub.add_parser("oracle", help="debugging access to the numerical oracles")
    orc_sub = orc.add_subparsers(dest="oracle_verb", required=True)
    fd = orc_sub.add_parser("fd-grad")
    fd.add_argument("--problem", choices=("leastp", "lasso"), default="leastp")
    fd.add_argument("--m", type=int, default=20)
    fd.add_argument("--n", type=int, default=5)
    fd.add_argument("--p", type=float, default=1.5)
    fd.add_argument("--lam", type=float, default=0.1)
    fd.add_argument("--seed", type=int, default=0)
    fd.add_argument("--at", required=True)
    spec = orc_sub.add_parser("spectral")
    spec.add_argument("--matrix", required=True, help="JSON file holding a matrix")
    spec.add_argument("--method", choices=("auto", "svd", "iterative"), default="auto")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits itself; fold into our codes
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _dispatch(args)
    except (UsageError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _dispatch(args) -> int:
    if args.verb == "run":
        return _cmd_run(args)
    if args.verb == "sweep":
        return _cmd_sweep(args)
    if args.verb == "certify":
        return _cmd_certify(args)
    if args.verb == "analyze":
        return _cmd_analyze(args)
    if args.verb == "envelope":
        return _cmd_envelope(args)
    if args.verb == "oracle":
        return _cmd_oracle(args)
    raise UsageError(f"unknown verb {args.verb!r}")


_DIRECTION_ALIASES = {"grad": "gradient", "bb1": "bb1", "bb2": "bb2", "lbfgs": "lbfgs"}


def _cmd_run(args) -> int:
    beta = args.beta if args.beta == "auto" else float(args.beta)
    order = args.order if args.order == "auto" else float(args.order)
    config = bench.ExperimentConfig(
        problem=bench.ProblemSpec(kind=args.problem, m=args.m, n=args.n, p=args.p,
                                  lam=args.lam, s=args.s, seed=args.seed,
                                  consistent=args.consistent),
        solvers=[bench.SolverSpec(
            name=args.solver.upper(), solver=args.solver, beta=beta,
            direction=_DIRECTION_ALIASES[args.direction], sigma=args.sigma,
            eta=args.eta, alpha_bar=args.alpha_bar, gamma=args.gamma,
            order=order)],
        run=bench.RunSpec(eps=args.eps, max_iter=args.max_iter,
                          x0_seed=args.x0_seed, repetitions=args.repetitions,
                          store_iterates=args.store),
        output=bench.OutputSpec(directory=args.out),
    )
    out = bench.run_experiment(config)
    summary = json.loads((out / "summary.json").read_text())
    print(json.dumps(summary, indent=2))
    return EXIT_OK if summary["ok"] else EXIT_CERTIFICATE


def _cmd_sweep(args) -> int:
    config = bench.preset(args.preset, seed=args.seed, out_dir=args.out)
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        merged = config.as_dict()
        for key, value in doc.items():
            if isinstance(value, dict):
                merged.setdefault(key, {}).update(value)
            else:
                merged[key] = value
        config = bench.ExperimentConfig.from_dict(merged)
    out = bench.run_experiment(config)
    summary = json.loads((out / "summary.json").read_text())
    print(json.dumps(summary, indent=2))
    return EXIT_OK if summary["ok"] else EXIT_CERTIFICATE


def _cmd_certify(args) -> int:
    trace = IterateTrace.from_csv(args.trace, rho=args.rho, theta=args.theta)
    reports = {"descent": certify_descent(trace, args.rho, args.theta,
                                          args.rel_tol).as_dict()}
    if args.c is not None:
        reports["displacement"] = certify_displacement(trace, args.c, args.theta,
                                                       args.rel_tol).as_dict()
    if args.fstar is not None:
        reports["min_grad_bound"] = min_grad_bound_check(trace, args.rho,
                                                         args.theta,
                                                         args.fstar).as_dict()
    print(json.dumps(reports, indent=2, default=bench._json_default))
    ok = all(rep["passed"] for rep in reports.values())
    return EXIT_OK if ok else EXIT_CERTIFICATE


def _cmd_analyze(args) -> int:
    trace = IterateTrace.from_csv(args.trace, rho=args.rho or 1.0,
                                  theta=args.theta or 2.0)
    rate = analysis.fit_linear_rate(trace, args.fstar, args.tail_fraction,
                                    rho=args.rho, theta=args.theta, tau=args.tau)
    kl_est = analysis.estimate_kl_exponent(trace, args.fstar)
    if kl_est is not None:
        rate.vartheta_hat = kl_est.vartheta_hat
    doc = {"rate": rate.as_dict()}
    if None not in (args.rho, args.theta, args.tau):
        doc["complexity"] = analysis.verify_complexity(
            trace, args.fstar, args.rho, args.theta, args.tau,
            args.eps).as_dict()
    print(json.dumps(doc, indent=2, default=bench._json_default))
    return EXIT_OK


def _cmd_envelope(args) -> int:
    x = np.asarray(json.loads(Path(args.at).read_text()), dtype=float)
    if args.g == "l1":
        g = envelopes.L1Norm(args.weight)
    else:
        g = problems.PowerAbsProblem(s=args.s, n=x.size).as_prox_capable()
    ev = envelopes.home_value_grad(g, x, args.gamma, args.p)
    print(json.dumps({
        "x": ev.x.tolist(),
        "prox_point": ev.prox_point.tolist(),
        "value": ev.value,
        "gradient": None if ev.gradient is None else ev.gradient.tolist(),
        "multi_valued": ev.multi_valued,
    }, indent=2))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if args.oracle_verb == "fd-grad":
        prob = problems.generate_problem(args.seed, args.problem, args.m, args.n,
                                         p=args.p, lam=args.lam)
        x = np.asarray(json.loads(Path(args.at).read_text()), dtype=float)
        value = prob.value if args.problem == "leastp" else prob.smooth_value
        grad = prob.grad if args.problem == "leastp" else prob.smooth_grad
        fd = oracles.finite_diff_gradient(value, x)
        print(json.dumps({"finite_diff": fd.tolist(),
                          "closed_form": np.asarray(grad(x)).tolist()}, indent=2))
        return EXIT_OK
    if args.oracle_verb == "spectral":
        A = np.asarray(json.loads(Path(args.matrix).read_text()), dtype=float)
        spec = oracles.spectral_constants(A, method=args.method)
        print(json.dumps({"opnorm": spec.opnorm, "sigma_min": spec.sigma_min},
                         indent=2))
        return EXIT_OK
    raise UsageError(f"unknown oracle verb {args.oracle_verb!r}")


if __name__ == "__main__":
    sys.exit(main())
