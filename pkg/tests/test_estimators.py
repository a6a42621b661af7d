from __future__ import annotations

import math

import numpy as np
import pytest

from oic.dgp import rng_stream
from oic.errors import InputError
from oic.estimators import (
    EvalEstimate,
    ParametricExpectation,
    apparent_cost,
    exponential_newsvendor_expectation,
    misspec_gap,
    monte_carlo_expectation,
    newsvendor_saa_oic,
    normal_newsvendor_expectation,
    oic_constrained,
    oic_dro,
    oic_general,
    oic_ierm,
    p_oic,
    truncnormal_newsvendor_expectation,
)
from oic.influence import InfluenceSet, if_moment_mean_var
from oic.problems import (
    ConstantCost,
    ConstraintSet,
    FunctionRule,
    NewsvendorCost,
    PortfolioCost,
    SquaredLossCost,
    identity_rule,
    linear_constraint,
)


def test_apparent_cost_examples():
    assert apparent_cost(ConstantCost(3.5), identity_rule(1), [0.0], [[1.0], [2.0]]) == 3.5
    assert apparent_cost(NewsvendorCost(5, 2), identity_rule(1), [1.0], [[2.0]]) == -3.0
    assert apparent_cost(PortfolioCost(np.zeros(2)), identity_rule(2), [0.0, 0.0], np.ones((3, 2))) == 0.0


def test_oic_general_examples():
    rule = FunctionRule(1, 1, lambda t: t, lambda t: np.eye(1))

    class Lin(ConstantCost):
        # grad_theta h = xi, so per-sample gradients are the data
        def _grad(self, X, XI):
            return XI.copy()

    est = oic_general(Lin(0.0), rule, [0.0], [[1.0], [2.0]], InfluenceSet([3.0, -1.0]))
    assert est.correction == pytest.approx(-0.25)
    zero = oic_general(Lin(0.0), rule, [0.0], [[1.0], [2.0]], InfluenceSet(np.zeros(2)))
    assert zero.correction == 0.0


def test_oic_general_constant_gradient_with_moment_influence():
    rule = FunctionRule(2, 1, lambda t: t[:1], lambda t: np.array([[1.0, 0.0]]))

    class Flat(ConstantCost):
        def _grad(self, X, XI):
            return np.full((X.shape[0], 1), 1.7)

    xi = np.array([[0.3], [2.0], [-1.0], [4.0]])
    est = oic_general(Flat(0.0), rule, [1.0, 1.0], xi, if_moment_mean_var(xi))
    assert est.correction == pytest.approx(0.0, abs=1e-15)


def test_oic_ierm_examples():
    est = oic_ierm(SquaredLossCost(), identity_rule(1), [1.0], [[0.0], [2.0]])
    assert est.correction == pytest.approx(1.0)
    assert est.diagnostics["I_h"][0, 0] == 2.0
    assert est.diagnostics["J_h"][0, 0] == 4.0
    assert est.total == pytest.approx(2.0)
    zero = oic_ierm(SquaredLossCost(), identity_rule(1), [2.0], [[2.0], [2.0]], hessian=[[2.0]])
    assert zero.correction == 0.0


def test_oic_ierm_flags_off_optimum():
    est = oic_ierm(SquaredLossCost(), identity_rule(1), [5.0], [[0.0], [2.0]])
    assert "warning" in est.diagnostics
    assert "warning" not in oic_dro(SquaredLossCost(), identity_rule(1), [5.0], [[0.0], [2.0]]).diagnostics


def test_constrained_examples():
    cost = PortfolioCost(np.zeros(2), 0.0, 0.5)
    xi = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    th = np.zeros(2)
    none = oic_constrained(cost, identity_rule(2), th, xi, ConstraintSet([linear_constraint([1.0, 0.0], 9.0)]))
    plain = oic_ierm(cost, identity_rule(2), th, xi, check_foc=False)
    assert none.total == plain.total
    np.testing.assert_array_equal(none.diagnostics["P"], np.eye(2))

    one = oic_constrained(SquaredLossCost(), identity_rule(1), [1.0], [[0.0], [2.0]],
                          ConstraintSet([linear_constraint([1.0], 1.0)]))
    assert one.correction == pytest.approx(0.0, abs=1e-15)


def test_constrained_projector_trace():
    # I_h = I and J_h = diag(a, b) via a quadratic cost with unit curvature
    a, b, n = 3.0, 5.0, 4
    G = np.array([[math.sqrt(a), math.sqrt(b)], [-math.sqrt(a), -math.sqrt(b)],
                  [math.sqrt(a), -math.sqrt(b)], [-math.sqrt(a), math.sqrt(b)]])

    class Quad(ConstantCost):
        def _grad(self, X, XI):
            return XI.copy()

        def _hess(self, X, XI):
            return np.broadcast_to(np.eye(2), (X.shape[0], 2, 2)).copy()

    cost = Quad(0.0, dim_x=2, dim_xi=2)
    est = oic_constrained(cost, identity_rule(2), [0.0, 0.0], G, ConstraintSet([linear_constraint([1.0, 0.0], 0.0)]))
    np.testing.assert_allclose(est.diagnostics["P"], np.diag([0.0, 1.0]), atol=1e-15)
    assert est.correction == pytest.approx(b / n)
    assert est.diagnostics["idempotence"] < 1e-15


def test_p_oic_examples():
    est = p_oic(ParametricExpectation(lambda th: 2.5), [0.0], [[3.0]], [[0.0]], 10)
    assert est.total == 2.5
    for n in (10, 50):
        assert p_oic(ParametricExpectation(lambda th: 1.0), [0.0], [[2.0]], [[1.0]], n).total == 1 + 1 / n
    grad_zero = ParametricExpectation(lambda th: 1.0, grad=lambda th: np.zeros(1))
    assert p_oic(grad_zero, [0.0], [[2.0]], [[1.0]], 10, c_bias=[4.0]).total == pytest.approx(1.1)
    with pytest.raises(InputError):
        p_oic(ParametricExpectation(lambda th: 1.0), [0.0], [[2.0]], [[1.0]], 10, c_bias=[1.0])


def test_misspec_gap_examples():
    assert misspec_gap(1.3, 1.0) == pytest.approx(0.3)
    assert misspec_gap(0.7, 0.7) == 0.0
    assert misspec_gap(1.0, [0.5, 1.5, 1.0]) == 0.0


def test_exponential_expectation_example():
    x = math.log(2.5)
    assert exponential_newsvendor_expectation(x, 1.0, 5, 2) == pytest.approx(2 * math.log(2.5) - 3)
    assert exponential_newsvendor_expectation(0.0, 1.0, 5, 2) == 0.0


def test_normal_expectations_against_monte_carlo():
    rng = rng_stream(11, 0)
    d = rng.normal(10.0, 3.0, 400_000)
    cost = NewsvendorCost(5, 2)
    v = cost.value([11.0], d[:, None])
    assert abs(normal_newsvendor_expectation(11.0, 10.0, 3.0, 5, 2) - v.mean()) <= 3 * v.std() / math.sqrt(v.size)
    v = cost.value([11.0], np.maximum(d, 0.0)[:, None])
    assert abs(truncnormal_newsvendor_expectation(11.0, 10.0, 3.0, 5, 2) - v.mean()) <= 3 * v.std() / math.sqrt(v.size)
    v = cost.value([2.0], np.maximum(rng.normal(1.0, 3.0, 400_000), 0.0)[:, None])
    assert abs(truncnormal_newsvendor_expectation(2.0, 1.0, 3.0, 5, 2) - v.mean()) <= 3 * v.std() / math.sqrt(v.size)


def test_monte_carlo_expectation_agrees_with_closed_form():
    sampler = lambda th, m, rng: rng.exponential(th[0], m)
    rule = FunctionRule(1, 1, lambda t: np.array([math.log(2.5) * t[0]]), lambda t: np.array([[math.log(2.5)]]))
    mean, se = monte_carlo_expectation(NewsvendorCost(5, 2), rule, sampler, [1.0], m=200_000, seed=3)
    assert abs(mean - (2 * math.log(2.5) - 3)) <= 3 * se


def test_newsvendor_saa_correction_formula():
    xi = np.array([3.0, 7.0, 1.0, 12.0, 8.0])
    from oic.numkit import kde_density

    est = newsvendor_saa_oic(xi, [7.0], 5, 2, bandwidth=2.0)
    assert est.correction == pytest.approx(2 * 3 / (5 * 5 * kde_density(xi, 7.0, 2.0)))
    assert isinstance(est, EvalEstimate)
