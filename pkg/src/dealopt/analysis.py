"""Rate fitting, gradient-dominance exponent estimation, and iteration-count
bound verification for certified traces.

The theory for a run with certified (rho, theta) and gradient-dominance
constants (vartheta, tau) predicts

  theta = 1/vartheta:  per-step gap contraction by q = 1 - rho / tau^theta,
  theta > 1/vartheta:  gap envelope  mu * k^(-1/(vartheta*theta - 1)),

and iteration counts bounded through the operator
K(x, y) = ceil((y log(1/eps) + log x) / log(1/q) + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import IterateTrace, SmoothObjective, UsageError

GAP_FLOOR_FACTOR = 1e3 * float(np.finfo(float).eps)


def gap_floor(fstar: float) -> float:
    """Smallest gap treated as numerically alive in fits and ratio checks."""
    return GAP_FLOOR_FACTOR * max(1.0, abs(fstar))


def complexity_K(x: float, y: float, eps: float, q: float) -> int:
    """ceil((y log(1/eps) + log x) / log(1/q) + 1), clamped below at 1."""
    if not (x > 0.0 and y > 0.0 and eps > 0.0):
        raise UsageError("need x, y, eps > 0")
    if not 0.0 < q < 1.0:
        raise UsageError(f"q must lie in (0, 1), got {q}")
    val = (y * math.log(1.0 / eps) + math.log(x)) / math.log(1.0 / q) + 1.0
    return max(int(math.ceil(val)), 1)


@dataclass
class RateReport:
    """Fitted convergence behavior of one trace tail."""

    regime: str = "inconclusive"      # linear | sublinear | inconclusive
    q_hat_max: Optional[float] = None
    q_hat_ls: Optional[float] = None
    q_theory: Optional[float] = None
    mu_hat: Optional[float] = None
    decay_hat: Optional[float] = None
    vartheta_hat: Optional[float] = None
    tail_window: tuple = (0, 0)
    n_tail: int = 0
    residual_geometric: Optional[float] = None
    residual_power: Optional[float] = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _tail(trace_or_gaps, fstar: float, tail_fraction: float):
    """(ks, gaps) for the trailing window of numerically alive gaps."""
    if isinstance(trace_or_gaps, IterateTrace):
        ks = np.array([r.k for r in trace_or_gaps.records], dtype=float)
        gaps = trace_or_gaps.f_values() - fstar
    else:
        gaps = np.asarray(trace_or_gaps, dtype=float) - fstar
        ks = np.arange(len(gaps), dtype=float)
    alive = gaps > gap_floor(fstar)
    ks, gaps = ks[alive], gaps[alive]
    if len(gaps) == 0:
        return ks, gaps
    if not 0.0 < tail_fraction <= 1.0:
        raise UsageError("tail_fraction must lie in (0, 1]")
    start = len(gaps) - max(int(math.ceil(tail_fraction * len(gaps))), 2)
    start = max(start, 0)
    return ks[start:], gaps[start:]


def fit_linear_rate(trace_or_gaps, fstar: float, tail_fraction: float = 0.5, *,
                    rho: Optional[float] = None, theta: Optional[float] = None,
                    tau: Optional[float] = None) -> RateReport:
    """Fit a geometric contraction to the tail of the gap sequence.

    q_hat_max is the largest consecutive gap ratio on the tail; q_hat_ls the
    least-squares geometric ratio.  The regime is classified by comparing the
    residuals of the geometric fit (log gap vs k) and the power-law fit
    (log gap vs log k): linear needs q_hat_max < 1 and the geometric model to
    fit at least as well.  Fewer than five alive tail points is inconclusive
    by construction (ratios are still reported when two points exist).
    """
    report = RateReport()
    if rho is not None and theta is not None and tau is not None:
        q_theory = 1.0 - rho / tau ** theta
        if 0.0 < q_theory < 1.0:
            report.q_theory = q_theory
    ks, gaps = _tail(trace_or_gaps, fstar, tail_fraction)
    report.n_tail = len(gaps)
    if len(gaps) >= 2:
        report.tail_window = (int(ks[0]), int(ks[-1]))
        ratios = gaps[1:] / gaps[:-1]
        report.q_hat_max = float(ratios.max())
        logg = np.log(gaps)
        geo = np.polyfit(ks, logg, 1)
        report.q_hat_ls = float(math.exp(geo[0]))
        report.residual_geometric = float(np.mean((np.polyval(geo, ks) - logg) ** 2))
        pos = ks > 0
        if pos.sum() >= 2:
            logk = np.log(ks[pos])
            pow_fit = np.polyfit(logk, logg[pos], 1)
            report.mu_hat = float(math.exp(pow_fit[1]))
            report.decay_hat = float(-pow_fit[0])
            report.residual_power = float(
                np.mean((np.polyval(pow_fit, logk) - logg[pos]) ** 2))
    if report.n_tail >= 5 and report.q_hat_max is not None:
        if report.q_hat_max >= 1.0:
            report.regime = "inconclusive"
        elif (report.residual_power is None
              or report.residual_geometric <= report.residual_power):
            report.regime = "linear"
        else:
            report.regime = "sublinear"
    return report


def fit_sublinear(trace_or_gaps, fstar: float, tail_fraction: float = 0.5):
    """Power-law fit of the tail: returns (mu_hat, decay_hat) for mu * k^(-decay)."""
    ks, gaps = _tail(trace_or_gaps, fstar, tail_fraction)
    pos = ks > 0
    if pos.sum() < 2:
        return None, None
    slope, intercept = np.polyfit(np.log(ks[pos]), np.log(gaps[pos]), 1)
    return float(math.exp(intercept)), float(-slope)


@dataclass
class KLEstimate:
    vartheta_hat: float
    residual: float
    n: int


def estimate_kl_exponent(trace_or_gaps, fstar: float,
                         grad_norms=None, tail_fraction: float = 1.0) -> Optional[KLEstimate]:
    """Slope of log||grad|| against log(gap): the exponent at which the
    gradient-dominance inequality is near-tight along the trace.

    A heuristic estimator (the inequality alone bounds only one side);
    returns None when the tail is degenerate.
    """
    if isinstance(trace_or_gaps, IterateTrace):
        gaps = trace_or_gaps.f_values() - fstar
        gns = trace_or_gaps.grad_norms()
    else:
        gaps = np.asarray(trace_or_gaps, dtype=float) - fstar
        gns = np.asarray(grad_norms, dtype=float)
    keep = (gaps > gap_floor(fstar)) & (gns > 0.0)
    gaps, gns = gaps[keep], gns[keep]
    n = len(gaps)
    start = n - max(int(math.ceil(tail_fraction * n)), 2) if n else 0
    gaps, gns = gaps[max(start, 0):], gns[max(start, 0):]
    if len(gaps) < 2 or np.ptp(np.log(gaps)) < 1e-12:
        return None
    slope, intercept = np.polyfit(np.log(gaps), np.log(gns), 1)
    fitted = slope * np.log(gaps) + intercept
    residual = float(np.mean((fitted - np.log(gns)) ** 2))
    return KLEstimate(vartheta_hat=float(slope), residual=residual, n=len(gaps))


@dataclass
class BoundCheck:
    criterion: str
    measured: Optional[int]
    bound: Optional[int]
    passed: Optional[bool]
    note: str = ""

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ComplexityReport:
    q_theory: float
    eps: float
    checks: list = field(default_factory=list)
    skipped: bool = False
    reason: str = ""

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        verdicts = [c.passed for c in self.checks if c.passed is not None]
        return bool(verdicts) and all(verdicts)

    def as_dict(self) -> dict:
        return {"q_theory": self.q_theory, "eps": self.eps, "skipped": self.skipped,
                "reason": self.reason, "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


def verify_complexity(trace: IterateTrace, fstar: float, rho: float, theta: float,
                      tau: float, eps: float, *, xstar=None,
                      c: Optional[float] = None) -> ComplexityReport:
    """Compare measured iteration counts against their closed-form bounds.

    Three criteria: the first iteration with gap <= eps versus K(gap0, 1);
    the first with gradient norm <= eps versus K(gap0/rho, theta); and, when a
    reference minimizer, stored iterates, and the displacement constant c are
    available, the first with ||x^k - x*|| <= eps versus
    K(s gap0/rho, theta/(theta-1)) with s = (c/(1-q^((theta-1)/theta)))^(theta/(theta-1)).
    """
    if min(rho, tau, eps) <= 0.0 or theta <= 1.0:
        raise UsageError("need rho, tau, eps > 0 and theta > 1")
    q = 1.0 - rho / tau ** theta
    if not 0.0 < q < 1.0:
        return ComplexityReport(q_theory=q, eps=eps, skipped=True,
                                reason=f"q = 1 - rho/tau^theta = {q:g} is outside (0, 1); "
                                       "bounds are vacuous")
    f = trace.f_values()
    g = trace.grad_norms()
    ks = np.array([r.k for r in trace.records])
    gap0 = f[0] - fstar
    report = ComplexityReport(q_theory=q, eps=eps)
    if gap0 <= 0.0:
        report.checks.append(BoundCheck("gap", 0, 1, True, "started at the optimum"))
        return report

    def first_k(mask) -> Optional[int]:
        idx = np.flatnonzero(mask)
        return int(ks[idx[0]]) if idx.size else None

    m_gap = first_k(f - fstar <= eps)
    b_gap = complexity_K(gap0, 1.0, eps, q)
    report.checks.append(BoundCheck(
        "gap", m_gap, b_gap,
        None if m_gap is None else m_gap <= b_gap,
        "" if m_gap is not None else "criterion not reached within the trace"))

    m_grad = first_k(g <= eps)
    b_grad = complexity_K(gap0 / rho, theta, eps, q)
    report.checks.append(BoundCheck(
        "grad", m_grad, b_grad,
        None if m_grad is None else m_grad <= b_grad,
        "" if m_grad is not None else "criterion not reached within the trace"))

    X = trace.iterates()
    if xstar is not None and c is not None and X is not None:
        dist = np.linalg.norm(X - np.asarray(xstar, dtype=float)[None, :], axis=1)
        m_x = first_k(dist <= eps)
        s = (c / (1.0 - q ** ((theta - 1.0) / theta))) ** (theta / (theta - 1.0))
        b_x = complexity_K(s * gap0 / rho, theta / (theta - 1.0), eps, q)
        report.checks.append(BoundCheck(
            "iterate", m_x, b_x,
            None if m_x is None else m_x <= b_x,
            "" if m_x is not None else "criterion not reached within the trace"))
    return report


def per_step_ratio_check(trace: IterateTrace, fstar: float, q_theory: float,
                         rel_tol: float = 1e-10):
    """Verify gap_{k+1} <= q * gap_k for every consecutive pair above the floor.

    Returns (passed, worst_ratio, n_checked).
    """
    if not 0.0 < q_theory < 1.0:
        raise UsageError("q_theory must lie in (0, 1)")
    gaps = trace.f_values() - fstar
    floor = gap_floor(fstar)
    worst = -math.inf
    n = 0
    passed = True
    for k in range(len(gaps) - 1):
        if gaps[k] <= floor:
            continue
        n += 1
        ratio = gaps[k + 1] / gaps[k]
        worst = max(worst, ratio)
        if ratio > q_theory * (1.0 + rel_tol):
            passed = False
    return passed, worst, n


def box_sampler(dim: int, seed: int, low: float = -5.0, high: float = 5.0) -> Callable:
    """Seeded uniform sampler on [low, high]^dim; returns points(n) -> (n, dim)."""
    rng = np.random.default_rng(seed)
    return lambda n: rng.uniform(low, high, size=(n, dim))


@dataclass
class KLSamplingReport:
    n_samples: int
    violations: int
    fraction: float
    tightest_tau: float
    worst_point: Optional[np.ndarray] = None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {"n_samples": self.n_samples, "violations": self.violations,
                "fraction": self.fraction, "tightest_tau": self.tightest_tau,
                "passed": self.passed}


def kl_sampling_certificate(objective: SmoothObjective, sampler, vartheta: float,
                            tau: float, n_samples: int,
                            rel_slack: float = 1e-8) -> KLSamplingReport:
    """Sample-based check of (f(x) - f*)^vartheta <= tau ||grad f(x)||.

    Counts points violating the inequality beyond a relative slack and reports
    the empirically tightest tau (the largest ratio observed).
    """
    if objective.fstar is None:
        raise UsageError("objective must carry a known optimal value")
    if not 0.0 < vartheta < 1.0 or tau <= 0.0:
        raise UsageError("need vartheta in (0, 1) and tau > 0")
    pts = np.asarray(sampler(n_samples), dtype=float)
    violations = 0
    tightest = 0.0
    worst_pt = None
    worst_excess = -math.inf
    for x in pts:
        gap = objective.value(x) - objective.fstar
        if gap <= 0.0:
            continue
        lhs = gap ** vartheta
        gn = float(np.linalg.norm(objective.grad(x)))
        needed = lhs / gn if gn > 0.0 else math.inf
        tightest = max(tightest, needed)
        excess = lhs - tau * gn
        if excess > rel_slack * max(1.0, lhs):
            violations += 1
            if excess > worst_excess:
                worst_excess, worst_pt = excess, x
    return KLSamplingReport(
        n_samples=len(pts), violations=violations,
        fraction=violations / max(len(pts), 1),
        tightest_tau=tightest, worst_point=worst_pt)
