from __future__ import annotations

import math

import numpy as np
import pytest

from oic.dgp import gen_portfolio, rng_stream
from oic.errors import DomainError, InputError, InsufficientDataError, RankError
from oic.fitters import (
    chi2_worst_case_value,
    chi2_worst_case_weights,
    eto_decision,
    fit_dro_chi2,
    fit_gaussian_eto_portfolio,
    fit_moments,
    fit_ols,
    fit_portfolio,
    fit_saa_newsvendor,
)
from oic.problems import PortfolioCost, uniform_rule


def test_saa_newsvendor_examples():
    assert fit_saa_newsvendor([1, 2, 3, 4, 5], 5, 2).theta[0] == 3
    assert fit_saa_newsvendor([7], 4, 2).theta[0] == 7
    x = np.array([3.0, 9.0, 1.0, 4.0])
    assert fit_saa_newsvendor(x + 2.5, 5, 2).theta[0] == fit_saa_newsvendor(x, 5, 2).theta[0] + 2.5
    with pytest.raises(InsufficientDataError):
        fit_saa_newsvendor([], 5, 2)


def test_moment_examples():
    np.testing.assert_array_equal(fit_moments([0.0, 2.0]).theta, [1.0, 2.0])
    np.testing.assert_array_equal(fit_moments([4.0, 4.0, 4.0]).theta, [4.0, 0.0])
    assert fit_moments([0, 0, 3, 3]).theta[0] == 1.5
    with pytest.raises(InsufficientDataError):
        fit_moments([1.0])


def test_eto_examples():
    from oic.fitters import FitResult

    normal = eto_decision("normal", fit_moments([8.0, 12.0]), 5, 2)

    assert eto_decision("normal", FitResult(np.array([10.0, 4.0]), "m"), 5, 2).decision[0] == pytest.approx(10.506694, abs=1e-6)
    assert eto_decision("exponential", FitResult(np.array([1.0, 1.0]), "m"), 5, 2).decision[0] == pytest.approx(0.916291, abs=1e-6)
    assert eto_decision("exp_os", FitResult(np.array([1.0, 1.0]), "m"), 5, 2, n=1).decision[0] == pytest.approx(0.581139, abs=1e-6)
    with pytest.raises(InputError):
        eto_decision("exp_os", FitResult(np.array([1.0, 1.0]), "m"), 5, 2)
    with pytest.raises(DomainError):
        eto_decision("exponential", FitResult(np.array([-1.0, 1.0]), "m"), 5, 2)
    with pytest.raises(InputError):
        eto_decision("gamma", FitResult(np.array([1.0, 1.0]), "m"), 5, 2)
    assert normal.theta.size == 2


def test_exp_os_converges_to_exponential_rule():
    from oic.fitters import FitResult

    fit = FitResult(np.array([3.0, 1.0]), "m")
    a = eto_decision("exp_os", fit, 5, 2, n=10_000).decision[0]
    assert a == pytest.approx(3.0 * math.log(2.5), rel=1e-3)


def test_portfolio_examples():
    assert np.all(fit_portfolio("full", np.zeros((5, 3)), centering="zero").theta == 0.0)
    assert fit_portfolio("full", [[1.0]], 1.0, 1.0, centering="zero").theta[0] == pytest.approx(0.25)
    xi = np.array([[1.0, 2.0, 1.0, 2.0], [3.0, 0.5, 3.0, 0.5]])
    th = fit_portfolio("block", xi, centering="zero").theta
    assert th[0] == pytest.approx(th[1])


def test_portfolio_is_empirical_minimiser():
    xi = gen_portfolio(60, 4, seed=1).xi
    th = fit_portfolio("full", xi).theta
    cost = PortfolioCost(xi.mean(axis=0))
    g = cost.grad_x(th, xi).mean(axis=0)
    np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_chi2_weight_examples():
    l = np.array([0.0, 1.0])
    np.testing.assert_array_equal(chi2_worst_case_weights(l, 0.0), [0.5, 0.5])
    np.testing.assert_array_equal(chi2_worst_case_weights([2.0, 2.0, 2.0], 5.0), np.full(3, 1 / 3))
    for eps in (0.01, 0.25, 0.64, 1.0):
        q = chi2_worst_case_weights(l, eps)
        np.testing.assert_allclose(q, [0.5 - math.sqrt(eps) / 2, 0.5 + math.sqrt(eps) / 2], atol=1e-15)
        assert chi2_worst_case_value(l, eps)[0] == pytest.approx(0.5 + math.sqrt(eps) / 2)
    np.testing.assert_array_equal(chi2_worst_case_weights([0.0, 1.0, 1.0], 50.0), [0.0, 0.5, 0.5])
    with pytest.raises(DomainError):
        chi2_worst_case_weights(l, -1.0)


def test_chi2_bisection_branch_against_lp_oracle():
    from scipy.optimize import minimize

    rng = rng_stream(7, 0)
    for _ in range(5):
        l = rng.exponential(size=8)
        eps = 1.5
        q = chi2_worst_case_weights(l, eps)
        assert q.min() >= 0.0 and q.sum() == pytest.approx(1.0) and 8 * q @ q - 1 <= eps + 1e-9
        cons = [{"type": "eq", "fun": lambda w: w.sum() - 1},
                {"type": "ineq", "fun": lambda w: eps - (8 * w @ w - 1)}]
        ref = minimize(lambda w: -w @ l, np.full(8, 1 / 8), constraints=cons, bounds=[(0, 1)] * 8,
                       method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
        assert q @ l >= -ref.fun - 1e-7


def test_dro_reduces_to_saa():
    xi = gen_portfolio(30, 4, seed=2).xi
    base = fit_portfolio("full", xi).theta
    np.testing.assert_array_equal(fit_dro_chi2("full", xi, rho=0.0).theta, base)
    same = np.tile(xi[:1], (10, 1))
    np.testing.assert_array_equal(fit_dro_chi2("block", same, rho=5.0).theta, fit_portfolio("block", same).theta)


def test_dro_scalar_matches_grid():
    rng = rng_stream(8, 0)
    for k in range(20):
        xi = rng.normal(1.0, 1.0, size=(15, 2))
        rho = float(rng.uniform(0.5, 5.0))
        fit = fit_dro_chi2("uniform", xi, rho=rho)
        cost = PortfolioCost(xi.mean(axis=0))
        rule = uniform_rule(2)
        f = lambda t: chi2_worst_case_value(cost.value(rule.value([t]), xi), rho / 15)[0]
        coarse = np.arange(-2.0, 2.0, 1e-2)
        c = coarse[int(np.argmin([f(t) for t in coarse]))]
        fine = np.arange(c - 0.02, c + 0.02, 1e-4)
        best = fine[int(np.argmin([f(t) for t in fine]))]
        assert abs(best - fit.theta[0]) <= 1e-3


def test_dro_vector_stationarity_and_monotone_worst_value():
    xi = gen_portfolio(40, 6, seed=3).xi
    prev = -np.inf
    for rho in (0.5, 1.0, 3.0, 10.0):
        fit = fit_dro_chi2("full", xi, rho=rho)
        assert fit.diagnostics["foc_residual"] <= 1e-8
        assert fit.diagnostics["worst_value"] >= prev - 1e-12
        prev = fit.diagnostics["worst_value"]
    with pytest.raises(DomainError):
        fit_dro_chi2("full", xi, rho=-1.0)


def test_gaussian_eto_portfolio():
    xi = gen_portfolio(50, 4, seed=4).xi
    fit, bound = fit_gaussian_eto_portfolio(xi, 1.0, 1.0)
    mu, s = fit.theta[:4], fit.theta[4:]
    np.testing.assert_allclose(bound.decision, mu / (2 * (s + 1)))


def test_ols_examples():
    U = np.random.default_rng(0).normal(size=(10, 3))
    th = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(fit_ols(U, U @ th).theta, th)
    y = np.array([1.0, 4.0, 2.0])
    assert fit_ols(np.ones(3), y).theta[0] == pytest.approx(y.mean())
    assert np.all(np.abs(fit_ols(U, U @ th, ridge=1e9).theta) < 1e-6)
    with pytest.raises(RankError):
        fit_ols(np.ones((4, 2)), np.arange(4.0))
