import math

import numpy as np
import pytest

from twofluid import gronwall
from twofluid.errors import DomainError
from twofluid.gronwall import GronwallTrace, cumulative_trapezoid


def make_trace(t, f, gprime=None, alpha=None, beta=None):
    t = np.asarray(t, dtype=float)
    zeros = np.zeros_like(t)
    return GronwallTrace(
        t=t,
        f=np.asarray(f, dtype=float),
        gprime=zeros if gprime is None else np.asarray(gprime, dtype=float),
        alpha=zeros if alpha is None else np.asarray(alpha, dtype=float),
        beta=zeros if beta is None else np.asarray(beta, dtype=float),
    )


class TestTraceValidation:
    def test_time_must_start_at_zero_and_increase(self):
        with pytest.raises(DomainError):
            make_trace([0.1, 0.2], [1.0, 1.0])
        with pytest.raises(DomainError):
            make_trace([0.0, 0.2, 0.2], [1.0, 1.0, 1.0])

    def test_samples_must_be_nonnegative_finite(self):
        with pytest.raises(DomainError):
            make_trace([0.0, 1.0], [1.0, -1.0])
        with pytest.raises(DomainError):
            make_trace([0.0, 1.0], [1.0, math.nan])

    def test_g_starts_at_zero(self):
        trace = make_trace([0.0, 0.5, 1.0], [1.0] * 3, gprime=[2.0] * 3)
        g = trace.g()
        assert g[0] == 0.0
        assert g[-1] == pytest.approx(2.0, rel=1e-14)


class TestQuadrature:
    def test_cumtrapz_linear_exact(self):
        t = np.linspace(0.0, 2.0, 21)
        assert cumulative_trapezoid(t, t)[-1] == pytest.approx(2.0, rel=1e-14)

    def test_second_order_convergence(self):
        exact = math.e - 1.0
        errs = []
        for n in (100, 200):
            t = np.linspace(0.0, 1.0, n + 1)
            errs.append(abs(cumulative_trapezoid(t, np.exp(t))[-1] - exact))
        assert math.log2(errs[0] / errs[1]) >= 1.9


class TestHypothesis:
    def test_constant_trace_has_zero_margin(self):
        t = np.linspace(0.0, 1.0, 101)
        report = gronwall.check_hypothesis(make_trace(t, np.full_like(t, 3.0)))
        assert report.ok
        assert np.all(report.lhs == 0.0)
        assert np.all(report.rhs == 0.0)

    def test_exponential_growth_with_matching_alpha_holds(self):
        t = np.linspace(0.0, 1.0, 1001)
        trace = make_trace(t, 2.0 * np.exp(t), alpha=np.ones_like(t))
        report = gronwall.check_hypothesis(trace)
        assert report.ok

    def test_unexplained_growth_is_flagged(self):
        t = np.linspace(0.0, 1.0, 101)
        trace = make_trace(t, 1.0 + t)
        report = gronwall.check_hypothesis(trace)
        assert not report.ok
        assert report.violations.size == len(t) - 1


class TestConclusion:
    def test_trivial_trace_margin_zero(self):
        t = np.linspace(0.0, 1.0, 51)
        report = gronwall.check_conclusion(make_trace(t, np.full_like(t, 5.0)))
        assert report.verdict
        assert report.max_margin == 0.0

    def test_exponential_with_unit_alpha(self):
        t = np.linspace(0.0, 1.0, 1001)
        trace = make_trace(t, 1.5 * np.exp(t), alpha=np.ones_like(t))
        report = gronwall.check_conclusion(trace)
        assert report.verdict
        assert abs(report.max_margin) <= 1e-6

    def test_scale_covariance_without_g(self):
        t = np.linspace(0.0, 1.0, 101)
        f = 1.0 + 0.5 * np.sin(2 * t) ** 2
        alpha = np.full_like(t, 2.0)
        base = gronwall.check_conclusion(make_trace(t, f, alpha=alpha))
        scaled = gronwall.check_conclusion(make_trace(t, 10.0 * f, alpha=alpha))
        assert np.allclose(scaled.margin, 10.0 * base.margin, rtol=1e-12, atol=1e-15)


class TestClassicalBound:
    def test_pure_forcing(self):
        t = np.linspace(0.0, 3.0, 31)
        bound = gronwall.classical_gronwall_bound(t, np.zeros_like(t), np.ones_like(t))
        assert np.allclose(bound, t, rtol=1e-13, atol=1e-14)

    def test_pure_rate(self):
        t = np.linspace(0.0, 3.0, 31)
        bound = gronwall.classical_gronwall_bound(t, np.ones_like(t), np.zeros_like(t))
        assert np.all(bound == 0.0)

    def test_exponential_bound_matches_closed_form(self):
        t = np.arange(0.0, 1.0 + 1e-12, 1e-3)
        bound = gronwall.classical_gronwall_bound(t, np.ones_like(t), np.ones_like(t))
        exact = np.expm1(t)
        err = np.abs(bound[1:] - exact[1:]) / exact[1:]
        assert np.max(err) <= 1e-6

    def test_rejects_negative_series(self):
        t = np.linspace(0.0, 1.0, 11)
        with pytest.raises(DomainError):
            gronwall.classical_gronwall_bound(t, -np.ones_like(t), np.ones_like(t))
