"""Boosted proximal-gradient iterations on the forward-backward envelope and
boosted high-order proximal-point iterations on the Moreau envelope.

Both solvers log envelope values and envelope gradient norms as their f /
grad_norm columns, so the generic descent certificate applies to the envelope
sequence directly:

  boosted proximal gradient:  rho = sigma / (1 + gamma L)^2,   theta = 2
  boosted proximal point:     rho = sigma gamma^(1/(p-1)) / p, theta = p/(p-1)

Order selection p = 1/(1 - vartheta) matches theta to 1/vartheta, the regime
in which the envelope values contract linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (CompositeObjective, IterateRecord, IterateTrace, UsageError,
                   as_vector)
from .directions import DirectionRule, generalize
from .envelopes import fbe_value, fbe_value_grad, home_value, home_value_grad


@dataclass
class BoostedConfig:
    gamma: float
    sigma: float
    eta: float = 0.5          # trial shrink factor for the proximal-point search
    alpha_bar: float = 0.5    # trial base for the proximal-gradient search
    max_linesearch: int = 50
    p: float = 2.0
    rule: Optional[DirectionRule] = None
    eps: float = 1e-6
    max_iter: int = 10000
    store_iterates: bool = False
    seed: Optional[int] = None
    config_digest: str = ""

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise UsageError("gamma must be positive")
        if not self.sigma > 0.0:
            raise UsageError("sigma must be positive")
        if not 0.0 < self.eta < 1.0:
            raise UsageError("eta must lie in (0, 1)")
        if not 0.0 < self.alpha_bar < 1.0:
            raise UsageError("alpha_bar must lie in (0, 1)")
        if self.max_linesearch < 0:
            raise UsageError("max_linesearch must be >= 0")
        if not self.p > 1.0:
            raise UsageError("order p must exceed 1")
        if not self.eps > 0.0 or self.max_iter < 1:
            raise UsageError("need eps > 0 and max_iter >= 1")


def choose_order(vartheta: float) -> float:
    """Envelope order p = 1/(1 - vartheta), so that theta = p/(p-1) = 1/vartheta."""
    if not 0.0 < vartheta < 1.0:
        raise UsageError(f"vartheta must lie in (0, 1), got {vartheta}")
    p = 1.0 / (1.0 - vartheta)
    assert abs(p / (p - 1.0) - 1.0 / vartheta) <= 1e-9 * (1.0 / vartheta)
    return p


def run_bpga(problem: CompositeObjective, x0, config: BoostedConfig) -> IterateTrace:
    """Boosted proximal-gradient iteration on the forward-backward envelope.

    Each step computes the forward-backward point T(x^k), picks a direction
    d^k from the rule (fed with envelope gradients), and accepts the largest
    alpha in {alpha_bar^m : m = 1..max_linesearch} such that
    x^{k+1} = T(x^k) + alpha d^k decreases the envelope by at least
    sigma/(1+gamma L)^2 times the squared envelope gradient norm.  If no trial
    passes, the plain forward-backward point is taken (it always satisfies the
    test given sigma < gamma(1 - gamma L)/2).
    """
    holder = problem.smooth.holder
    if holder is None or holder.nu != 1.0:
        raise UsageError("boosted proximal gradient needs a Lipschitz-gradient smooth part")
    L = holder.L
    if not 0.0 < config.gamma < 1.0 / L:
        raise UsageError(f"gamma must lie in (0, 1/L) = (0, {1.0 / L:g})")
    sigma_max = config.gamma * (1.0 - config.gamma * L) / 2.0
    if not config.sigma < sigma_max:
        raise UsageError(f"sigma must lie in (0, {sigma_max:g})")
    rule = config.rule if config.rule is not None else DirectionRule("gradient")
    rule.reset()
    rho = config.sigma / (1.0 + config.gamma * L) ** 2
    trace = IterateTrace(
        seed=config.seed, config_digest=config.config_digest, solver_id="bpga",
        rho=rho, theta=2.0, guaranteed=True,
        extras={"gamma": config.gamma, "sigma": config.sigma, "L": L,
                "alpha_bar": config.alpha_bar, "eps": config.eps,
                "direction": rule.kind, "beta": rule.beta, "fallbacks": 0},
    )
    x = as_vector(x0, problem.smooth.dim, "x0")
    for k in range(config.max_iter + 1):
        ev = fbe_value_grad(problem, x, config.gamma)
        gn = ev.grad_norm
        rec = IterateRecord(k=k, f=ev.value, grad_norm=gn,
                            x=x.copy() if config.store_iterates else None)
        trace.records.append(rec)
        if gn <= config.eps:
            trace.extras["termination"] = "tolerance"
            break
        if k == config.max_iter:
            trace.extras["termination"] = "max_iter"
            break
        d_bar = rule.base_direction(x, ev.gradient)
        rule.push(x, ev.gradient)
        d = generalize(d_bar, ev.gradient, rule.beta)
        threshold = ev.value - rho * gn ** 2
        x_next = None
        for m in range(1, config.max_linesearch + 1):
            alpha = config.alpha_bar ** m
            cand = ev.prox_point + alpha * d
            if fbe_value(problem, cand, config.gamma) <= threshold:
                x_next = cand
                rec.step = alpha
                rec.inner_count = m
                break
        if x_next is None:
            x_next = ev.prox_point
            rec.step = 0.0
            rec.inner_count = config.max_linesearch
            trace.extras["fallbacks"] += 1
        rec.displacement = float(np.linalg.norm(x_next - x))
        x = x_next
    return trace


def run_bhippa(phi, x0, config: BoostedConfig) -> IterateTrace:
    """Boosted order-p proximal-point iteration on the Moreau envelope of phi.

    Each step computes y = order-p prox of x^k, then accepts the largest
    kappa in {eta^m : m = 0..max_linesearch-1} such that
    x^{k+1} = (1-kappa) y + kappa (x^k + d^k) decreases the envelope by at
    least sigma gamma^(1/(p-1))/p times ||envelope grad||^(p/(p-1)); the prox
    point itself is the fallback (it satisfies the test since sigma < 1).
    ``max_linesearch=0`` skips the search entirely, reproducing the plain
    proximal-point update.  A multi-valued prox on the trajectory aborts with
    a diagnostic: the envelope is not differentiable there.
    """
    p, gamma = config.p, config.gamma
    sigma_cap = min(1.0, 1.0 / (p * gamma))
    if not config.sigma < sigma_cap:
        raise UsageError(f"sigma must lie in (0, {sigma_cap:g}) for order {p}")
    rule = config.rule if config.rule is not None else DirectionRule("gradient")
    rule.reset()
    q = 1.0 / (p - 1.0)
    rho = config.sigma * gamma ** q / p
    theta = p / (p - 1.0)
    trace = IterateTrace(
        seed=config.seed, config_digest=config.config_digest, solver_id="bhippa",
        rho=rho, theta=theta, guaranteed=True,
        extras={"gamma": gamma, "sigma": config.sigma, "p": p, "eta": config.eta,
                "eps": config.eps, "direction": rule.kind, "beta": rule.beta,
                "fallbacks": 0},
    )
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    for k in range(config.max_iter + 1):
        ev = home_value_grad(phi, x, gamma, p)
        if ev.multi_valued:
            trace.extras["termination"] = "multivalued"
            trace.extras["diagnostic"] = (
                f"multi-valued proximal point at k={k}; envelope gradient undefined")
            break
        gn = ev.grad_norm
        y = ev.prox_point
        rec = IterateRecord(k=k, f=ev.value, grad_norm=gn,
                            x=x.copy() if config.store_iterates else None)
        trace.records.append(rec)
        if gn <= config.eps:
            trace.extras["termination"] = "tolerance"
            break
        if np.linalg.norm(x - y) <= config.eps * gamma ** q:
            # proximal residual below the scaled tolerance; for orders below 2
            # this can trigger while the envelope gradient is still above eps
            trace.extras["termination"] = "displacement"
            break
        if k == config.max_iter:
            trace.extras["termination"] = "max_iter"
            break
        x_next = None
        if config.max_linesearch > 0:
            d_bar = rule.base_direction(x, ev.gradient)
            rule.push(x, ev.gradient)
            d = generalize(d_bar, ev.gradient, rule.beta)
            threshold = ev.value - rho * gn ** theta
            for m in range(config.max_linesearch):
                kappa = config.eta ** m
                cand = (1.0 - kappa) * y + kappa * (x + d)
                if home_value(phi, cand, gamma, p) <= threshold:
                    x_next = cand
                    rec.step = kappa
                    rec.inner_count = m
                    break
        if x_next is None:
            x_next = y.copy()
            rec.step = 0.0
            rec.inner_count = config.max_linesearch
            if config.max_linesearch > 0:
                trace.extras["fallbacks"] += 1
        rec.displacement = float(np.linalg.norm(x_next - x))
        x = x_next
    return trace
