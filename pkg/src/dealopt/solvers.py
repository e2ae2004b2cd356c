"""Constant-step and Armijo-backtracking instances of the generalized descent
framework, with their certified (rho, theta) computed a priori.

Both solvers step along d = ||grad||^beta * d_bar where d_bar satisfies the
sufficient-descent pair for (c1, c2).  With beta matched to the gradient's
Hölder exponent nu via beta = (1-nu)/nu the runs carry certified constants:

  constant step:  alpha = (c1 / (c2^(1+nu) L))^(1/nu),
                  rho = c1 alpha nu / (1+nu),      theta = 1 + 1/nu
  Armijo search:  rho = sigma alpha_tilde c1,      theta = 1 + 1/nu

where alpha_tilde is the worst-case accepted step computed by
:func:`armijo_bound`.  Any other beta is allowed but the trace is marked
heuristic and rate/bound certificates are skipped downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (CapabilityError, IterateRecord, IterateTrace, SmoothObjective,
                   UsageError, as_vector)
from .directions import DirectionRule, beta_for_holder, generalize


@dataclass
class ArmijoParams:
    sigma: float = 1e-4
    eta: float = 0.5
    alpha_bar: float = 1.0
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise UsageError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not 0.0 < self.eta < 1.0:
            raise UsageError(f"eta must lie in (0, 1), got {self.eta}")
        if not self.alpha_bar > 0.0:
            raise UsageError(f"alpha_bar must be positive, got {self.alpha_bar}")
        if self.max_backtracks < 1:
            raise UsageError("max_backtracks must be >= 1")


@dataclass
class DealConfig:
    eps: float = 1e-6
    max_iter: int = 10000
    rule: Optional[DirectionRule] = None
    armijo: ArmijoParams = field(default_factory=ArmijoParams)
    store_iterates: bool = False
    seed: Optional[int] = None
    config_digest: str = ""
    # objectives without declared smoothness metadata may opt into a sampled
    # estimate; the trace then marks its constants "estimated"
    estimate_constants: bool = False
    assumed_nu: float = 1.0

    def __post_init__(self):
        if not self.eps > 0.0:
            raise UsageError("eps must be positive")
        if self.max_iter < 1:
            raise UsageError("max_iter must be >= 1")
        if not 0.0 < self.assumed_nu <= 1.0:
            raise UsageError("assumed_nu must lie in (0, 1]")


def dealc_step_size(c1: float, c2: float, nu: float, L: float) -> float:
    """Step size maximizing the guaranteed decrease: (c1/(c2^(1+nu) L))^(1/nu).

    Always inside the admissible interval (0, (c1(1+nu)/(c2^(1+nu)L))^(1/nu)].
    """
    if min(c1, c2, nu, L) <= 0.0 or nu > 1.0:
        raise UsageError("need c1, c2, L > 0 and nu in (0, 1]")
    return (c1 / (c2 ** (1.0 + nu) * L)) ** (1.0 / nu)


def armijo_bound(nu: float, sigma: float, eta: float, c1: float, c2: float,
                 L: float, alpha_bar: float):
    """Worst-case backtracking count and step-size floor for the Armijo loop.

    Returns (c_bar, p_bar, alpha_tilde) with
      c_bar = ((1+nu)(1-sigma) c1 / (L alpha_bar^nu c2^(1/nu)))^(1/nu),
      p_bar = 1 + log(c_bar)/log(eta),
      alpha_tilde = eta^p_bar * alpha_bar.
    p_bar may be negative when c_bar > 1; then every first trial is accepted.
    """
    if min(nu, sigma, eta, c1, c2, L, alpha_bar) <= 0.0:
        raise UsageError("all inputs must be positive")
    if nu > 1.0 or sigma >= 1.0 or eta >= 1.0:
        raise UsageError("need nu in (0,1], sigma in (0,1), eta in (0,1)")
    c_bar = ((1.0 + nu) * (1.0 - sigma) * c1
             / (L * alpha_bar ** nu * c2 ** (1.0 / nu))) ** (1.0 / nu)
    p_bar = 1.0 + math.log(c_bar) / math.log(eta)
    alpha_tilde = eta ** p_bar * alpha_bar
    return c_bar, p_bar, alpha_tilde


def run_dealc(objective: SmoothObjective, x0, config: DealConfig) -> IterateTrace:
    """Constant-step generalized descent.

    Terminates when ||grad f(x^k)|| <= eps (checked before stepping) or at
    max_iter.  A non-finite trial value aborts the run with a diagnostic in
    the trace extras instead of raising.
    """
    rule, nu, L, guaranteed, estimated = _prepare(objective, config, "deal-c")
    alpha = dealc_step_size(rule.c1, rule.c2, nu, L)
    rho = rule.c1 * alpha * nu / (1.0 + nu)
    theta = rule.beta + 2.0
    trace = IterateTrace(
        seed=config.seed, config_digest=config.config_digest, solver_id="deal-c",
        rho=rho, theta=theta, guaranteed=guaranteed,
        extras={"alpha": alpha, "nu": nu, "L": L, "c1": rule.c1, "c2": rule.c2,
                "beta": rule.beta, "eps": config.eps, "direction": rule.kind,
                "constants": "estimated" if estimated else "declared"},
    )
    x = as_vector(x0, objective.dim, "x0")
    f = objective.value(x)
    for k in range(config.max_iter + 1):
        g = objective.grad(x)
        gn = float(np.linalg.norm(g))
        rec = IterateRecord(k=k, f=f, grad_norm=gn,
                            x=x.copy() if config.store_iterates else None)
        trace.records.append(rec)
        if gn <= config.eps:
            trace.extras["termination"] = "tolerance"
            break
        if k == config.max_iter:
            trace.extras["termination"] = "max_iter"
            break
        d_bar, _ = rule.sufficient_base_direction(x, g)
        rule.push(x, g)
        d = generalize(d_bar, g, rule.beta)
        x_next = x + alpha * d
        f_next = objective.value(x_next)
        if not math.isfinite(f_next):
            trace.extras["termination"] = "nonfinite"
            trace.extras["diagnostic"] = f"non-finite objective at k={k + 1}"
            break
        rec.step = alpha
        rec.displacement = float(np.linalg.norm(x_next - x))
        x, f = x_next, f_next
    return trace


def run_deala(objective: SmoothObjective, x0, config: DealConfig) -> IterateTrace:
    """Backtracking generalized descent.

    Inner loop: starting from alpha_bar, shrink by eta until
    f(x + alpha d) <= f(x) + sigma alpha <grad f(x), d>; the accepted
    backtrack count p_k is logged per iteration.  Exceeding max_backtracks
    aborts with a diagnostic (possible only when the declared L is wrong).
    """
    rule, nu, L, guaranteed, estimated = _prepare(objective, config, "deal-a")
    ap = config.armijo
    c_bar, p_bar, alpha_tilde = armijo_bound(nu, ap.sigma, ap.eta, rule.c1,
                                             rule.c2, L, ap.alpha_bar)
    rho = ap.sigma * alpha_tilde * rule.c1
    theta = rule.beta + 2.0
    trace = IterateTrace(
        seed=config.seed, config_digest=config.config_digest, solver_id="deal-a",
        rho=rho, theta=theta, guaranteed=guaranteed,
        extras={"nu": nu, "L": L, "c1": rule.c1, "c2": rule.c2, "beta": rule.beta,
                "sigma": ap.sigma, "eta": ap.eta, "alpha_bar": ap.alpha_bar,
                "c_bar": c_bar, "p_bar": p_bar, "alpha_tilde": alpha_tilde,
                "eps": config.eps, "direction": rule.kind,
                "constants": "estimated" if estimated else "declared"},
    )
    x = as_vector(x0, objective.dim, "x0")
    f = objective.value(x)
    for k in range(config.max_iter + 1):
        g = objective.grad(x)
        gn = float(np.linalg.norm(g))
        rec = IterateRecord(k=k, f=f, grad_norm=gn,
                            x=x.copy() if config.store_iterates else None)
        trace.records.append(rec)
        if gn <= config.eps:
            trace.extras["termination"] = "tolerance"
            break
        if k == config.max_iter:
            trace.extras["termination"] = "max_iter"
            break
        d_bar, _ = rule.sufficient_base_direction(x, g)
        rule.push(x, g)
        d = generalize(d_bar, g, rule.beta)
        slope = float(g @ d)
        p = 0
        alpha_k = ap.alpha_bar
        x_next = x + alpha_k * d
        f_next = objective.value(x_next)
        while not f_next <= f + ap.sigma * alpha_k * slope:
            p += 1
            if p > ap.max_backtracks:
                trace.extras["termination"] = "backtrack_limit"
                trace.extras["diagnostic"] = (
                    f"no Armijo step within {ap.max_backtracks} backtracks at k={k}; "
                    "declared Hölder constant is likely too small")
                return trace
            alpha_k = ap.eta ** p * ap.alpha_bar
            x_next = x + alpha_k * d
            f_next = objective.value(x_next)
        if not math.isfinite(f_next):
            trace.extras["termination"] = "nonfinite"
            trace.extras["diagnostic"] = f"non-finite objective at k={k + 1}"
            break
        rec.step = alpha_k
        rec.inner_count = p
        rec.displacement = float(np.linalg.norm(x_next - x))
        x, f = x_next, f_next
    return trace


def _prepare(objective: SmoothObjective, config: DealConfig, solver: str):
    estimated = False
    if objective.holder is not None:
        nu, L = objective.holder.nu, objective.holder.L
    elif config.estimate_constants:
        from .oracles import estimate_holder_constant
        nu = config.assumed_nu
        L = estimate_holder_constant(objective.grad, objective.dim, nu=nu,
                                     seed=config.seed or 0)
        estimated = True
    else:
        raise CapabilityError(f"{solver} needs Hölder gradient metadata (nu, L); "
                              "declare it or enable estimate_constants")
    rule = config.rule if config.rule is not None else DirectionRule("gradient",
                                                                     beta=beta_for_holder(nu))
    rule.reset()
    guaranteed = abs(rule.beta - beta_for_holder(nu)) <= 1e-12
    return rule, nu, L, guaranteed, estimated
