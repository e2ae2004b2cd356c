"""Experiment runner: seeded problem generation, solver dispatch, trace
persistence, and automatic certificate bundles.

A run directory contains, per variant and repetition, the trace CSV, a JSON
sidecar with the full configuration and certified constants, and a
certificate bundle JSON; ``emit_plot_data`` condenses the traces into one
long-format series.csv (variant, k, f_gap, grad_norm) for plotting.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, envelopes, problems
from .boosted import BoostedConfig, choose_order, run_bhippa, run_bpga
from .core import (IterateTrace, UsageError, certify_descent,
                   certify_displacement, config_digest, min_grad_bound_check,
                   reevaluate_trace)
from .directions import DirectionRule, beta_for_holder
from .solvers import ArmijoParams, DealConfig, run_deala, run_dealc

DEAL_SOLVERS = ("deal-c", "deal-a", "bpga", "bhippa")
HEURISTIC_BETAS = (0.5, 0.0, -0.2)


@dataclass
class ProblemSpec:
    kind: str = "leastp"
    m: int = 1000
    n: int = 200
    p: float = 1.5
    lam: float = 0.1
    s: float = 4.0
    seed: int = 0
    consistent: bool = True


@dataclass
class SolverSpec:
    name: str = "DEAL-C"
    solver: str = "deal-c"
    beta: object = "auto"           # "auto" or a real > -1
    direction: str = "gradient"
    c1: float = 1.0
    c2: float = 1.0
    sigma: Optional[float] = None   # per-solver default when None
    eta: float = 0.5
    alpha_bar: Optional[float] = None
    gamma: Optional[float] = None
    order: object = "auto"          # proximal-point order, "auto" matches the exponent
    max_linesearch: int = 50
    memory: int = 10


@dataclass
class RunSpec:
    eps: float = 1e-6
    max_iter: int = 10000
    x0_seed: int = 0
    repetitions: int = 1
    store_iterates: bool = True


@dataclass
class OutputSpec:
    directory: str = "runs/out"


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    solvers: list = field(default_factory=lambda: [SolverSpec()])
    run: RunSpec = field(default_factory=RunSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def as_dict(self) -> dict:
        return {
            "problem": dataclasses.asdict(self.problem),
            "solvers": [dataclasses.asdict(s) for s in self.solvers],
            "run": dataclasses.asdict(self.run),
            "output": dataclasses.asdict(self.output),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        errors = validate_config(doc)
        if errors:
            raise UsageError("invalid experiment config: " + "; ".join(errors))
        return cls(
            problem=ProblemSpec(**doc.get("problem", {})),
            solvers=[SolverSpec(**s) for s in doc.get("solvers", [{}])],
            run=RunSpec(**doc.get("run", {})),
            output=OutputSpec(**doc.get("output", {})),
        )


def validate_config(doc: dict) -> list:
    """Schema check for a config document; returns offending-key messages."""
    errors = []
    if not isinstance(doc, dict):
        return ["config must be a JSON object"]
    known = {"problem": ProblemSpec, "run": RunSpec, "output": OutputSpec}
    for key in doc:
        if key not in known and key != "solvers":
            errors.append(f"unknown top-level key {key!r}")
    for key, klass in known.items():
        sub = doc.get(key, {})
        if not isinstance(sub, dict):
            errors.append(f"{key} must be an object")
            continue
        fields = {f.name for f in dataclasses.fields(klass)}
        errors.extend(f"{key}.{k} is not a recognized key" for k in sub if k not in fields)
    solvers = doc.get("solvers", [])
    if not isinstance(solvers, list):
        errors.append("solvers must be a list")
    else:
        fields = {f.name for f in dataclasses.fields(SolverSpec)}
        for i, sub in enumerate(solvers):
            if not isinstance(sub, dict):
                errors.append(f"solvers[{i}] must be an object")
                continue
            errors.extend(f"solvers[{i}].{k} is not a recognized key"
                          for k in sub if k not in fields)
            if sub.get("solver") not in DEAL_SOLVERS + (None,):
                errors.append(f"solvers[{i}].solver must be one of {DEAL_SOLVERS}")
    pk = doc.get("problem", {}).get("kind")
    if pk not in ("leastp", "lasso", "powerabs", "quadratic", None):
        errors.append(f"problem.kind {pk!r} is not supported")
    return errors


def build_problem(spec: ProblemSpec):
    seed = spec.seed
    env = os.environ.get("DEAL_SEED")
    if env is not None:
        seed = int(env)
    return problems.generate_problem(
        seed, spec.kind, spec.m, spec.n, p=spec.p, lam=spec.lam, s=spec.s,
        consistent=spec.consistent)


@dataclass
class RunResult:
    name: str
    trace: IterateTrace
    certificates: dict
    ok: bool
    fstar: Optional[float] = None


def run_variant(problem, spec: SolverSpec, run: RunSpec, rep: int = 0) -> RunResult:
    """Run one solver variant on a built problem and certify its trace."""
    dim = problem.n
    rng = np.random.default_rng(run.x0_seed + rep)
    x0 = rng.uniform(-5.0, 5.0, size=dim)
    digest = config_digest({"solver": dataclasses.asdict(spec),
                            "run": dataclasses.asdict(run),
                            "problem": problem.descriptor(), "rep": rep})

    if spec.solver in ("deal-c", "deal-a"):
        trace, ctx = _run_deal(problem, spec, run, x0, digest, rep)
    elif spec.solver == "bpga":
        trace, ctx = _run_bpga(problem, spec, run, x0, digest, rep)
    elif spec.solver == "bhippa":
        trace, ctx = _run_bhippa(problem, spec, run, x0, digest, rep)
    else:
        raise UsageError(f"unknown solver {spec.solver!r}")
    certificates = certify_run(trace, ctx)
    ok = all(rep_.get("passed", True) for rep_ in certificates.values()
             if isinstance(rep_, dict) and "passed" in rep_)
    return RunResult(name=spec.name, trace=trace, certificates=certificates,
                     ok=ok, fstar=ctx.get("fstar"))


def _resolve_beta(spec: SolverSpec, nu: float) -> float:
    if spec.beta == "auto":
        return beta_for_holder(nu)
    return float(spec.beta)


def _run_deal(problem, spec, run, x0, digest, rep):
    if not isinstance(problem, problems.LeastPProblem) and not isinstance(
            problem, problems.QuadraticProblem):
        raise UsageError(f"{spec.solver} expects a smooth problem family")
    objective = problem.as_smooth()
    beta = _resolve_beta(spec, objective.holder.nu)
    rule = DirectionRule(spec.direction, beta=beta, c1=spec.c1, c2=spec.c2,
                         memory=spec.memory)
    armijo = ArmijoParams(sigma=spec.sigma if spec.sigma is not None else 1e-4,
                          eta=spec.eta,
                          alpha_bar=spec.alpha_bar if spec.alpha_bar is not None else 1.0)
    cfg = DealConfig(eps=run.eps, max_iter=run.max_iter, rule=rule, armijo=armijo,
                     store_iterates=run.store_iterates,
                     seed=run.x0_seed + rep, config_digest=digest)
    runner = run_dealc if spec.solver == "deal-c" else run_deala
    trace = runner(objective, x0, cfg)
    ctx = {
        "value": objective.value, "grad": objective.grad,
        "fstar": getattr(problem, "fstar", None),
        "xstar": getattr(problem, "x_ls", getattr(problem, "xstar", None)),
        "eps": run.eps,
    }
    if spec.solver == "deal-c":
        ctx["c"] = rule.c2 * trace.extras["alpha"]
    else:
        ctx["c"] = rule.c2 * armijo.alpha_bar
    kl = objective.kl
    consistent = getattr(problem, "consistent", False)
    if kl is not None and trace.guaranteed and (
            consistent or isinstance(problem, problems.QuadraticProblem)):
        ctx["tau"] = kl.tau
        ctx["vartheta"] = kl.vartheta
    return trace, ctx


def _run_bpga(problem, spec, run, x0, digest, rep):
    if not isinstance(problem, problems.LassoProblem):
        raise UsageError("the boosted proximal-gradient preset expects the lasso family")
    composite = problem.as_composite()
    L = problem.L
    gamma = spec.gamma if spec.gamma is not None else 0.95 / L
    sigma_cap = gamma * (1.0 - gamma * L) / 2.0
    sigma = spec.sigma if spec.sigma is not None else 0.9 * sigma_cap
    beta = 0.0 if spec.beta == "auto" else float(spec.beta)
    rule = DirectionRule(spec.direction, beta=beta, memory=spec.memory)
    cfg = BoostedConfig(gamma=gamma, sigma=sigma,
                        alpha_bar=spec.alpha_bar if spec.alpha_bar is not None else 0.5,
                        max_linesearch=spec.max_linesearch, rule=rule,
                        eps=run.eps, max_iter=run.max_iter,
                        store_iterates=run.store_iterates,
                        seed=run.x0_seed + rep, config_digest=digest)
    trace = run_bpga(composite, x0, cfg)
    ref = problems.reference_optimum(problem)
    ctx = {
        "value": lambda x: envelopes.fbe_value(composite, x, gamma),
        "grad": lambda x: envelopes.fbe_value_grad(composite, x, gamma).gradient,
        "fstar": ref.fstar if ref.converged else None,
        "xstar": None, "c": None, "eps": run.eps,
    }
    return trace, ctx


def _run_bhippa(problem, spec, run, x0, digest, rep):
    if not isinstance(problem, problems.PowerAbsProblem):
        raise UsageError("the boosted proximal-point preset expects the separable power family")
    phi = problem.as_prox_capable()
    kl = problem.kl_info()
    order = choose_order(kl.vartheta) if spec.order == "auto" else float(spec.order)
    gamma = spec.gamma if spec.gamma is not None else 1.0
    sigma_cap = min(1.0, 1.0 / (order * gamma))
    sigma = spec.sigma if spec.sigma is not None else 0.5 * sigma_cap
    rule = DirectionRule(spec.direction, beta=0.0 if spec.beta == "auto" else float(spec.beta),
                         memory=spec.memory)
    cfg = BoostedConfig(gamma=gamma, sigma=sigma, eta=spec.eta, p=order,
                        max_linesearch=spec.max_linesearch, rule=rule,
                        eps=run.eps, max_iter=run.max_iter,
                        store_iterates=run.store_iterates,
                        seed=run.x0_seed + rep, config_digest=digest)
    trace = run_bhippa(phi, x0, cfg)
    ctx = {
        "value": lambda x: envelopes.home_value(phi, x, gamma, order),
        "grad": lambda x: envelopes.home_value_grad(phi, x, gamma, order).gradient,
        "fstar": 0.0,  # envelope and function share optimal value 0
        "xstar": None, "c": None, "eps": run.eps,
    }
    return trace, ctx


def certify_run(trace: IterateTrace, ctx: dict) -> dict:
    """Certificate bundle for one finished run.

    Re-evaluates the trace through the run's own value/gradient oracles when
    iterates were stored, then applies every certificate whose constants are
    available.  Heuristic runs get rate fits but no guarantee checks.
    """
    bundle = {"guaranteed": trace.guaranteed, "solver": trace.solver_id,
              "termination": trace.extras.get("termination", "unknown")}
    checked = trace
    if trace.iterates() is not None:
        checked = reevaluate_trace(trace, ctx["value"], ctx["grad"])
        bundle["reevaluated"] = True
    if trace.guaranteed:
        bundle["descent"] = certify_descent(checked, trace.rho, trace.theta).as_dict()
        if trace.solver_id in ("deal-c", "deal-a") and ctx.get("c"):
            bundle["displacement"] = certify_displacement(
                checked, ctx["c"], trace.theta).as_dict()
    fstar = ctx.get("fstar")
    if fstar is not None and trace.guaranteed:
        bundle["min_grad_bound"] = min_grad_bound_check(
            checked, trace.rho, trace.theta, fstar).as_dict()
    if fstar is not None:
        tau = ctx.get("tau")
        rate = analysis.fit_linear_rate(
            checked, fstar, rho=trace.rho if tau else None,
            theta=trace.theta if tau else None, tau=tau)
        kl_est = analysis.estimate_kl_exponent(checked, fstar)
        if kl_est is not None:
            rate.vartheta_hat = kl_est.vartheta_hat
        bundle["rate"] = rate.as_dict()
        if tau is not None:
            comp = analysis.verify_complexity(
                checked, fstar, trace.rho, trace.theta, tau, ctx["eps"],
                xstar=ctx.get("xstar"), c=ctx.get("c"))
            bundle["complexity"] = comp.as_dict()
            if rate.q_theory is not None:
                ok, worst, n = analysis.per_step_ratio_check(checked, fstar,
                                                             rate.q_theory)
                bundle["per_step_ratio"] = {"passed": ok, "worst_ratio": worst,
                                            "n_checked": n,
                                            "q_theory": rate.q_theory}
    return bundle


def run_experiment(config: ExperimentConfig) -> Path:
    """Execute every (variant, repetition), persist traces and certificates.

    Deterministic for fixed seeds.  Returns the run directory; the summary
    records whether any guaranteed certificate failed.
    """
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config.problem)
    (out / "problem.json").write_text(json.dumps(problem.descriptor(), indent=2,
                                                 default=_json_default))
    (out / "config.json").write_text(json.dumps(config.as_dict(), indent=2))
    summary = {"variants": [], "ok": True}
    for spec in config.solvers:
        for rep in range(config.run.repetitions):
            result = run_variant(problem, spec, config.run, rep)
            stem = spec.name if config.run.repetitions == 1 else f"{spec.name}_rep{rep}"
            result.trace.to_csv(out / f"{stem}.csv")
            sidecar = {
                "variant": spec.name, "rep": rep,
                "solver_id": result.trace.solver_id,
                "seed": result.trace.seed,
                "config_digest": result.trace.config_digest,
                "rho": result.trace.rho, "theta": result.trace.theta,
                "guaranteed": result.trace.guaranteed,
                "fstar": result.fstar,
                "extras": {k: v for k, v in result.trace.extras.items()},
                "problem": problem.descriptor(),
            }
            (out / f"{stem}.json").write_text(
                json.dumps(sidecar, indent=2, default=_json_default))
            (out / f"{stem}.certificates.json").write_text(
                json.dumps(result.certificates, indent=2, default=_json_default))
            iters_to_tol = (len(result.trace) - 1
                            if result.trace.extras.get("termination") == "tolerance"
                            else None)
            summary["variants"].append({
                "variant": spec.name, "rep": rep, "ok": result.ok,
                "iterations": len(result.trace) - 1,
                "iterations_to_tolerance": iters_to_tol,
                "termination": result.trace.extras.get("termination"),
                "final_grad_norm": result.trace.records[-1].grad_norm,
            })
            summary["ok"] = summary["ok"] and result.ok
    (out / "summary.json").write_text(json.dumps(summary, indent=2,
                                                 default=_json_default))
    emit_plot_data(out)
    return out


def emit_plot_data(run_dir) -> Path:
    """Condense a run directory into series.csv: variant,k,f_gap,grad_norm."""
    run_dir = Path(run_dir)
    rows = []
    traces = sorted(p for p in run_dir.glob("*.csv") if p.name != "series.csv")
    if not traces:
        raise UsageError(f"no trace CSVs found in {run_dir}")
    for path in traces:
        sidecar = run_dir / (path.stem + ".json")
        fstar = None
        variant = path.stem
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            variant = meta.get("variant", variant)
            fstar = meta.get("fstar")
        trace = IterateTrace.from_csv(path)
        f = trace.f_values()
        base = fstar if fstar is not None else float(f.min())
        for rec, gap in zip(trace.records, f - base):
            rows.append((variant, rec.k, float(gap), float(rec.grad_norm)))
    target = run_dir / "series.csv"
    with open(target, "w") as fh:
        fh.write("variant,k,f_gap,grad_norm\n")
        for variant, k, gap, gn in rows:
            fh.write(f"{variant},{k},{gap!r},{gn!r}\n")
    return target


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return str(obj)


def preset(name: str, seed: int = 0, out_dir: str = "runs") -> ExperimentConfig:
    """Named experiment presets mirroring the benchmark studies.

    sec51/sec52: the least-p study (1000 samples, 200 features) with the
    constant-step and backtracking families and their heuristic rescalings;
    they differ only in the Armijo acceptance constant (1e-4 vs 0.5).
    sec53: the l1 regression study (1000 samples, 10 features) with the five
    boosted proximal-gradient variants.
    """
    name = name.lower()
    if name in ("sec51", "sec52"):
        sigma = 1e-4 if name == "sec51" else 0.5
        solvers = []
        for fam, solver in (("DEAL-C", "deal-c"), ("DEAL-A", "deal-a")):
            solvers.append(SolverSpec(name=fam, solver=solver, beta="auto",
                                      sigma=sigma))
            for i, b in enumerate(HEURISTIC_BETAS, start=1):
                solvers.append(SolverSpec(name=f"{fam}{i}", solver=solver,
                                          beta=b, sigma=sigma))
        return ExperimentConfig(
            problem=ProblemSpec(kind="leastp", m=1000, n=200, p=1.5, seed=seed,
                                consistent=True),
            solvers=solvers,
            run=RunSpec(x0_seed=seed),
            output=OutputSpec(directory=str(Path(out_dir) / name)),
        )
    if name == "sec53":
        solvers = [
            SolverSpec(name="BPGA", solver="bpga", direction="gradient", beta=0.0),
            SolverSpec(name="BPGA-1", solver="bpga", direction="gradient", beta=0.5),
            SolverSpec(name="BPGA-BB1", solver="bpga", direction="bb1"),
            SolverSpec(name="BPGA-BB2", solver="bpga", direction="bb2"),
            SolverSpec(name="BPGA-LBFGS", solver="bpga", direction="lbfgs"),
        ]
        return ExperimentConfig(
            problem=ProblemSpec(kind="lasso", m=1000, n=10, lam=0.1, seed=seed,
                                consistent=False),
            solvers=solvers,
            run=RunSpec(x0_seed=seed),
            output=OutputSpec(directory=str(Path(out_dir) / name)),
        )
    raise UsageError(f"unknown preset {name!r}; expected sec51, sec52, or sec53")
