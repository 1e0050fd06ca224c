"""
Tests for the logarithmic Gronwall comparison.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from anisopede.models import GronwallClosure, GronwallInstance, PiecewisePolynomial
from anisopede.services.inequality_lab import (
    LabError,
    check_gronwall,
    closure_B,
    evaluate_piecewise,
    gronwall_bound,
    integrate_piecewise,
    random_gronwall_instance,
)


@pytest.fixture
def two_piece():
    """f = 1 on [0, 0.5), f = 2t afterwards."""
    return PiecewisePolynomial(breakpoints=[0.0, 0.5], coefficients=[[1.0], [0.0, 2.0]])


class TestPiecewise:
    """Forcing term f."""

    def test_evaluate(self, two_piece):
        assert evaluate_piecewise(two_piece, 0.25) == 1.0
        assert evaluate_piecewise(two_piece, 0.5) == pytest.approx(1.0)
        assert evaluate_piecewise(two_piece, 0.75) == pytest.approx(1.5)

    def test_integrate(self, two_piece):
        assert integrate_piecewise(two_piece, 0.25) == pytest.approx(0.25)
        assert integrate_piecewise(two_piece, 1.0) == pytest.approx(1.25)

    def test_breakpoints_validated(self):
        with pytest.raises(ValidationError):
            PiecewisePolynomial(breakpoints=[0.5], coefficients=[[1.0]])
        with pytest.raises(ValidationError):
            PiecewisePolynomial(breakpoints=[0.0, 0.5], coefficients=[[1.0]])


class TestBound:
    """Closed-form right-hand side."""

    def test_q_value(self):
        instance = GronwallInstance(K=1.0, A0=math.e - 1.0)
        Q, bound = gronwall_bound(instance, 1.0)
        assert Q == pytest.approx(4 * math.e, rel=1e-12)
        assert bound == pytest.approx(math.exp(4 * math.e) * (1 + 8 * math.e), rel=1e-12)

    def test_overflow_is_infinite(self):
        instance = GronwallInstance(K=10.0, A0=100.0, horizon=5.0)
        assert gronwall_bound(instance, 5.0) == (math.inf, math.inf)

    def test_closures(self):
        constant = GronwallInstance(closure_param=4.0)
        proportional = GronwallInstance(closure=GronwallClosure.PROPORTIONAL, closure_param=2.0)
        assert closure_B(constant, 10.0) == 4.0
        assert closure_B(proportional, 0.0) == math.e
        assert closure_B(proportional, 3.0) == 8.0

    @pytest.mark.parametrize(
        "kwargs",
        [{"K": 0.5}, {"A0": -1.0}, {"closure_param": 2.0}, {"closure": "proportional", "closure_param": 0.0}],
    )
    def test_instance_validation(self, kwargs):
        with pytest.raises(ValidationError):
            GronwallInstance(**kwargs)


class TestComparison:
    """ODE integration against the bound."""

    @pytest.mark.parametrize("seed", range(8))
    def test_random_instances_satisfy_the_bound(self, seed):
        instance = random_gronwall_instance(np.random.default_rng(seed))
        report = check_gronwall(instance, np.linspace(0.0, 1.0, 11))
        assert report.hypothesis_holds
        assert report.violations == 0
        assert report.horizon_reached == 1.0
        assert len(report.times) == 11
        assert report.max_ratio <= 1.0

    def test_times_include_breakpoints(self, two_piece):
        instance = GronwallInstance(K=1.0, A0=2.0, f=two_piece, closure_param=math.e)
        report = check_gronwall(instance, [0.0, 0.5, 1.0])
        assert report.times == [0.0, 0.5, 1.0]
        assert report.A[0] == 2.0
        assert report.int_B[1] == pytest.approx(0.5 * math.e)

    def test_clamped_start_breaks_the_hypothesis(self):
        report = check_gronwall(GronwallInstance(K=1.0, A0=0.0), [0.0, 0.5, 1.0])
        assert not report.hypothesis_holds
        assert report.A == [0.0, 0.0, 0.0]
        assert report.violations == 0

    def test_rejects_times_outside_horizon(self):
        with pytest.raises(LabError):
            check_gronwall(GronwallInstance(A0=1.0), [0.0, 2.0])

    def test_rejects_negative_forcing(self):
        f = PiecewisePolynomial(coefficients=[[-1.0]])
        with pytest.raises(LabError):
            check_gronwall(GronwallInstance(A0=1.0, f=f), [1.0])
