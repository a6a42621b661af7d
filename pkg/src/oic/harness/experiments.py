"""Model registry: how each named model is fitted, evaluated and scored against truth."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from oic.dgp import portfolio_instance, true_cost
from oic.errors import ConfigError, InputError
from oic.estimators import (
    EvalEstimate,
    ParametricExpectation,
    exponential_newsvendor_expectation,
    newsvendor_saa_oic,
    normal_newsvendor_expectation,
    oic_dro,
    oic_general,
    oic_ierm,
    p_oic,
)
from oic.fitters import (
    eto_decision,
    fit_dro_chi2,
    fit_gaussian_eto_portfolio,
    fit_moments,
    fit_ols,
    fit_portfolio,
    fit_saa_newsvendor,
    portfolio_rule,
)
from oic.influence import if_mean, if_moment_mean_var, if_ols, psi_hat
from oic.numkit import normal_cdf, normal_pdf
from oic.problems import (
    ContextualLinearRule,
    NewsvendorCost,
    PortfolioCost,
    SquaredLossCost,
    identity_rule,
)

NEWSVENDOR_MODELS = ("saa", "normal_eto", "exp_eto", "exp_os")
PORTFOLIO_MODELS = ("saa_full", "saa_uniform", "saa_block", "dro_full", "dro_uniform", "dro_block",
                    "eto_gaussian")
FAMILY_MODELS = {
    "newsvendor_normal": NEWSVENDOR_MODELS,
    "newsvendor_exponential": NEWSVENDOR_MODELS,
    "portfolio": PORTFOLIO_MODELS,
    "quadratic": ("mean",),
    "regression_linear": ("ols",),
}


def check_model_names(kind, names):
    allowed = FAMILY_MODELS[kind]
    if not names:
        raise ConfigError("[models] names is empty")
    bad = [m for m in names if m not in allowed]
    if bad:
        raise ConfigError(f"[models] {bad} not available for {kind}; choose from {allowed}")
    if len(set(names)) != len(names):
        raise ConfigError("[models] duplicate model names")


@dataclass
class Fitted:
    """A model fitted on one replication's data, with everything evaluators need."""

    name: str
    cost: object
    rule: object
    theta: np.ndarray
    refit: Callable
    truth: float
    oic: Callable[[], EvalEstimate]
    poic: Callable[[], EvalEstimate] | None = None


# -- newsvendor ------------------------------------------------------------------


def _exp_poic(bound, xi, p, c, n):
    theta = float(bound.theta[0])
    k = bound.rule.k

    def value(th):
        return exponential_newsvendor_expectation(k * th[0], th[0], p, c)

    # curvature of the model-expected cost in theta with the law frozen at theta-hat
    I_h = p * k * k * math.exp(-k) / theta
    return p_oic(ParametricExpectation(value), bound.theta, [[I_h]], psi_hat(if_mean(xi)), n)


def _normal_poic(bound, xi, p, c, n):
    mu, s = bound.theta
    sd = math.sqrt(s)
    x = float(bound.decision[0])
    t = (x - mu) / sd
    J = bound.rule.jac(bound.theta)
    R = bound.rule.hess(bound.theta)[0]
    I_h = p * normal_pdf(t) / sd * (J.T @ J) + (c - p * (1.0 - normal_cdf(t))) * R

    def value(th):
        return normal_newsvendor_expectation(x, th[0], math.sqrt(th[1]), p, c)

    return p_oic(ParametricExpectation(value), bound.theta, I_h, psi_hat(if_moment_mean_var(xi)), n)


def _fit_newsvendor(name, data, spec, prm):
    p, c = prm["p"], prm["c"]
    xi = data.xi
    n = xi.shape[0]
    cost = NewsvendorCost(p, c)
    if name == "saa":
        fit = fit_saa_newsvendor(xi, p, c)
        rule = identity_rule(1)
        theta = fit.theta
        refit = lambda d: fit_saa_newsvendor(d.xi, p, c).theta
        oic = lambda: newsvendor_saa_oic(xi, theta, p, c)
        poic = None
    else:
        kind = {"normal_eto": "normal", "exp_eto": "exponential", "exp_os": "exp_os"}[name]
        bound = eto_decision(kind, fit_moments(xi, ddof=1), p, c, n)
        rule, theta = bound.rule, bound.theta
        if kind == "normal":
            refit = lambda d: fit_moments(d.xi, ddof=1).theta
            inf = lambda: if_moment_mean_var(xi)
            poic = lambda: _normal_poic(bound, xi, p, c, n)
        else:
            refit = lambda d: fit_moments(d.xi, ddof=1).theta[:1]
            inf = lambda: if_mean(xi)
            poic = lambda: _exp_poic(bound, xi, p, c, n)
        oic = lambda: oic_general(cost, rule, theta, xi, inf())
    truth = true_cost(spec, rule.value(theta), p=p, c=c)
    return Fitted(name, cost, rule, theta, refit, truth, oic, poic)


# -- portfolio ---------------------------------------------------------------------


def _portfolio_center(prm, xi, inst):
    if prm["centering"] == "sample":
        return xi.mean(axis=0)
    if prm["centering"] == "true":
        return inst.mu.copy()
    return np.zeros(xi.shape[1])


def _gaussian_poic(bound, center, lam1, lam2, xi, n):
    d = bound.rule.d
    theta = bound.theta
    mu, s = theta[:d], theta[d:]
    x = bound.decision
    M = np.diag(s) + np.outer(mu - center, mu - center) + lam2 * np.eye(d)
    grad_x = 2.0 * M @ x - lam1 * mu
    J = bound.rule.jac(theta)
    R = bound.rule.hess(theta)
    I_h = J.T @ (2.0 * M) @ J + np.einsum("d,dkl->kl", grad_x, R)

    def value(th):
        m_, s_ = th[:d], th[d:]
        Mt = np.diag(s_) + np.outer(m_ - center, m_ - center) + lam2 * np.eye(d)
        return float(x @ Mt @ x - lam1 * m_ @ x)

    return p_oic(ParametricExpectation(value), theta, I_h, psi_hat(if_moment_mean_var(xi)), n)


def _fit_portfolio_model(name, data, spec, prm):
    lam1, lam2 = prm["lam1"], prm["lam2"]
    xi = data.xi
    n = xi.shape[0]
    inst = portfolio_instance(spec.dim, spec.seed)
    center = _portfolio_center(prm, xi, inst)
    cost = PortfolioCost(center, lam1, lam2)
    poic = None
    if name == "eto_gaussian":
        fit, bound = fit_gaussian_eto_portfolio(xi, lam1, lam2)
        rule, theta = bound.rule, bound.theta
        refit = lambda d: fit_moments(d.xi, ddof=1).theta
        oic = lambda: oic_general(cost, rule, theta, xi, if_moment_mean_var(xi))
        poic = lambda: _gaussian_poic(bound, center, lam1, lam2, xi, n)
    else:
        kind, cls = name.split("_")
        rule = portfolio_rule(cls, spec.dim)
        if kind == "saa":
            theta = fit_portfolio(cls, xi, lam1, lam2, center).theta
            refit = lambda d: fit_portfolio(cls, d.xi, lam1, lam2, center).theta
            oic = lambda: oic_ierm(cost, rule, theta, xi, singular=prm["singular"])
        else:
            rho = prm["rho"]
            theta = fit_dro_chi2(cls, xi, lam1, lam2, center, rho).theta
            refit = lambda d: fit_dro_chi2(cls, d.xi, lam1, lam2, center, rho).theta
            oic = lambda: oic_dro(cost, rule, theta, xi, singular=prm["singular"])
    truth = true_cost(spec, rule.value(theta), center=center, lam1=lam1, lam2=lam2, instance=inst)
    return Fitted(name, cost, rule, theta, refit, truth, oic, poic)


# -- toy families ------------------------------------------------------------------


def _fit_quadratic(name, data, spec, prm):
    xi = data.xi
    n = xi.shape[0]
    cost, rule = SquaredLossCost(), identity_rule(1)
    theta = xi.mean(axis=0)
    refit = lambda d: d.xi.mean(axis=0)
    oic = lambda: oic_ierm(cost, rule, theta, xi)
    var = spec.params["sigma0"] ** 2

    def poic():
        # location model N(theta, sigma0^2) with known scale
        return p_oic(ParametricExpectation(lambda th: var), theta, [[2.0]], psi_hat(if_mean(xi)), n)

    truth = true_cost(spec, theta)
    return Fitted(name, cost, rule, theta, refit, truth, oic, poic)


def _fit_regression(name, data, spec, prm):
    if data.z is None:
        raise InputError("regression data needs features")
    ridge = prm["ridge"]
    cost, rule = SquaredLossCost(), ContextualLinearRule(data.z.shape[1])
    theta = fit_ols(data.z, data.xi[:, 0], ridge).theta
    refit = lambda d: fit_ols(d.z, d.xi[:, 0], ridge).theta
    if ridge == 0.0:
        oic = lambda: oic_ierm(cost, rule, theta, data.xi, data.z)
    else:
        oic = lambda: oic_general(cost, rule, theta, data.xi, if_ols(data.z, data.xi, theta, ridge), data.z)
    truth = true_cost(spec, theta)
    return Fitted(name, cost, rule, theta, refit, truth, oic, None)


def fit_model(name, data, spec, prm):
    if spec.kind.startswith("newsvendor"):
        return _fit_newsvendor(name, data, spec, prm)
    if spec.kind == "portfolio":
        return _fit_portfolio_model(name, data, spec, prm)
    if spec.kind == "quadratic":
        return _fit_quadratic(name, data, spec, prm)
    return _fit_regression(name, data, spec, prm)
