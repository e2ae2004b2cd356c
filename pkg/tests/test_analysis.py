import math

import numpy as np
import pytest

from dealopt.analysis import (box_sampler, complexity_K, estimate_kl_exponent,
                              fit_linear_rate, fit_sublinear,
                              kl_sampling_certificate, per_step_ratio_check,
                              verify_complexity)
from dealopt.core import IterateRecord, IterateTrace, UsageError
from dealopt.problems import QuadraticProblem, generate_problem
from dealopt.solvers import DealConfig, run_dealc


def synthetic_trace(gaps, grads=None, rho=0.5, theta=2.0, xs=None, fstar=0.0):
    records = []
    for k, gap in enumerate(gaps):
        g = grads[k] if grads is not None else math.sqrt(max(gap, 0.0))
        records.append(IterateRecord(
            k=k, f=fstar + gap, grad_norm=g,
            x=None if xs is None else np.asarray(xs[k], dtype=float)))
    return IterateTrace(records=records, rho=rho, theta=theta)


class TestComplexityK:
    def test_values(self):
        assert complexity_K(1.0, 1.0, 0.5, 0.5) == 2
        assert complexity_K(1.0, 1.0, 0.1, 0.5) == 5
        assert complexity_K(1.0, 1.0, 1e-6, 0.9) == 133

    def test_monotonicity(self):
        base = complexity_K(2.0, 1.5, 1e-4, 0.7)
        assert complexity_K(4.0, 1.5, 1e-4, 0.7) >= base
        assert complexity_K(2.0, 2.5, 1e-4, 0.7) >= base
        assert complexity_K(2.0, 1.5, 1e-4, 0.8) >= base
        assert complexity_K(2.0, 1.5, 1e-6, 0.7) >= base

    def test_clamped_and_errors(self):
        assert complexity_K(1e-12, 1.0, 0.5, 0.5) == 1
        with pytest.raises(UsageError):
            complexity_K(1.0, 1.0, 0.5, 1.0)
        with pytest.raises(UsageError):
            complexity_K(0.0, 1.0, 0.5, 0.5)


class TestLinearFit:
    def test_exact_geometric_four_points(self):
        tr = synthetic_trace([1.0, 0.25, 0.0625, 0.015625])
        rep = fit_linear_rate(tr, fstar=0.0)
        assert rep.q_hat_max == pytest.approx(0.25, abs=1e-15)

    def test_exact_geometric_long_machine_precision(self):
        gaps = [0.37 ** k for k in range(30)]
        rep = fit_linear_rate(synthetic_trace(gaps), fstar=0.0)
        assert rep.regime == "linear"
        assert rep.q_hat_max == pytest.approx(0.37, rel=1e-12)
        assert rep.q_hat_ls == pytest.approx(0.37, rel=1e-9)

    def test_power_law_classified_sublinear(self):
        ks = np.arange(10, 101)
        tr = IterateTrace(records=[
            IterateRecord(k=int(k), f=float(k) ** -2, grad_norm=1.0) for k in ks],
            rho=0.5, theta=2.0)
        rep = fit_linear_rate(tr, fstar=0.0)
        assert rep.regime == "sublinear"
        assert rep.q_hat_max < 1.0

    def test_q_theory_attached(self):
        rep = fit_linear_rate(synthetic_trace([0.5 ** k for k in range(12)]),
                              fstar=0.0, rho=0.5, theta=2.0, tau=1.0)
        assert rep.q_theory == pytest.approx(0.5)
        assert rep.regime == "linear"

    def test_short_tail_inconclusive(self):
        rep = fit_linear_rate(synthetic_trace([1.0, 0.5]), fstar=0.0)
        assert rep.regime == "inconclusive"


class TestSublinearFit:
    def test_exact_power_law(self):
        ks = np.arange(1, 200)
        tr = IterateTrace(records=[
            IterateRecord(k=int(k), f=3.0 * float(k) ** -2, grad_norm=1.0)
            for k in ks], rho=0.5, theta=2.0)
        mu, decay = fit_sublinear(tr, fstar=0.0)
        assert mu == pytest.approx(3.0, abs=1e-6)
        assert decay == pytest.approx(2.0, abs=1e-9)

    def test_degenerate_returns_none(self):
        mu, decay = fit_sublinear(synthetic_trace([1.0]), fstar=0.0)
        assert mu is None and decay is None


class TestKLExponent:
    def test_quadratic_slope_exactly_half(self):
        xs = 2.0 * 0.8 ** np.arange(25)
        tr = synthetic_trace(list(0.5 * xs ** 2), grads=list(np.abs(xs)))
        est = estimate_kl_exponent(tr, fstar=0.0)
        assert est.vartheta_hat == pytest.approx(0.5, abs=1e-12)
        assert est.residual < 1e-20

    def test_leastp_run_recovers_exponent(self):
        prob = generate_problem(23, "leastp", 60, 12, p=1.5, consistent=True)
        tr = run_dealc(prob.as_smooth(),
                       np.random.default_rng(0).uniform(-5, 5, 12), DealConfig())
        est = estimate_kl_exponent(tr, fstar=0.0)
        assert abs(est.vartheta_hat - 1.0 / 3.0) < 0.05

    def test_degenerate_tail(self):
        assert estimate_kl_exponent(synthetic_trace([1.0]), fstar=0.0) is None


class TestVerifyComplexity:
    def test_exact_geometric_bounds(self):
        gaps = [0.5 ** k for k in range(40)]
        grads = [math.sqrt((gaps[k] - gaps[k + 1]) / 0.5) for k in range(39)] + [0.0]
        xs = [[math.sqrt(g)] for g in gaps]
        tr = synthetic_trace(gaps, grads=grads, xs=xs)
        # q = 1 - rho/tau^theta = 0.5 with rho = 0.5, tau = 1, theta = 2
        rep = verify_complexity(tr, fstar=0.0, rho=0.5, theta=2.0, tau=1.0,
                                eps=1e-3, xstar=[0.0], c=1.0)
        assert not rep.skipped
        assert rep.q_theory == pytest.approx(0.5)
        by_name = {c.criterion: c for c in rep.checks}
        assert by_name["gap"].measured == 10
        assert by_name["gap"].bound == 11
        assert rep.passed

    def test_vacuous_skipped(self):
        tr = synthetic_trace([1.0, 0.5])
        rep = verify_complexity(tr, fstar=0.0, rho=2.0, theta=2.0, tau=1.0, eps=0.1)
        assert rep.skipped and rep.passed

    def test_degenerate_start(self):
        tr = synthetic_trace([0.0, 0.0], grads=[0.0, 0.0])
        rep = verify_complexity(tr, fstar=0.0, rho=0.5, theta=2.0, tau=1.0, eps=0.1)
        assert rep.passed

    def test_end_to_end_leastp(self):
        prob = generate_problem(29, "leastp", 60, 12, p=2.0, consistent=True)
        obj = prob.as_smooth()
        tr = run_dealc(obj, np.random.default_rng(4).uniform(-5, 5, 12),
                       DealConfig(store_iterates=True))
        nu, L, vt, tau = prob.constants()
        c = tr.extras["alpha"]  # c2 = 1
        rep = verify_complexity(tr, fstar=0.0, rho=tr.rho, theta=tr.theta,
                                tau=tau, eps=1e-6, xstar=prob.x_ls, c=c)
        assert not rep.skipped
        assert rep.passed
        assert len(rep.checks) == 3


class TestPerStepRatio:
    def test_ratio_guard(self):
        tr = synthetic_trace([1.0, 0.5, 0.25])
        ok, worst, n = per_step_ratio_check(tr, fstar=0.0, q_theory=0.5)
        assert ok and worst == pytest.approx(0.5) and n == 2
        ok, worst, _ = per_step_ratio_check(tr, fstar=0.0, q_theory=0.4)
        assert not ok

    def test_remark_gap_power_consistency(self):
        # certified runs keep (gap)^(vartheta - 1/theta) <= tau / rho^(1/theta)
        prob = generate_problem(37, "leastp", 50, 10, p=1.5, consistent=True)
        obj = prob.as_smooth()
        tr = run_dealc(obj, np.random.default_rng(1).uniform(-5, 5, 10),
                       DealConfig())
        _, _, vt, tau = prob.constants()
        gaps = tr.f_values()
        alive = gaps > 0
        lhs = gaps[alive] ** (vt - 1.0 / tr.theta)
        assert np.all(lhs <= tau / tr.rho ** (1.0 / tr.theta) * (1 + 1e-10))


class TestKLSampling:
    def test_quadratic_exact_equality(self):
        obj = QuadraticProblem(np.eye(1)).as_smooth()
        rep = kl_sampling_certificate(obj, box_sampler(1, seed=0), 0.5,
                                      1.0 / math.sqrt(2.0), 500)
        assert rep.passed
        assert rep.tightest_tau == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)

    def test_halved_tau_fails(self):
        obj = QuadraticProblem(np.eye(1)).as_smooth()
        rep = kl_sampling_certificate(obj, box_sampler(1, seed=0), 0.5,
                                      0.5 / math.sqrt(2.0), 500)
        assert not rep.passed
        assert rep.fraction > 0.9

    def test_consistent_leastp_zero_violations(self):
        prob = generate_problem(41, "leastp", 40, 8, p=1.5, consistent=True)
        obj = prob.as_smooth()
        rep = kl_sampling_certificate(obj, box_sampler(8, seed=2),
                                      obj.kl.vartheta, obj.kl.tau, 1000)
        assert rep.passed
        assert rep.tightest_tau <= obj.kl.tau

    def test_inconsistent_leastp_reports_empirical_tau(self):
        # the closed-form tau is only guaranteed for residuals in the range of
        # A; inconsistent data reports the empirical value without asserting it
        prob = generate_problem(43, "leastp", 40, 8, p=1.5, consistent=False)
        obj = prob.as_smooth()
        rep = kl_sampling_certificate(obj, box_sampler(8, seed=3),
                                      obj.kl.vartheta, obj.kl.tau, 1000)
        assert math.isfinite(rep.tightest_tau) and rep.tightest_tau > 0.0
