"""Debiased performance estimators: general, trace, constrained and parametric forms.

Every estimator returns an :class:`EvalEstimate` whose ``total`` is the
apparent in-sample cost plus a correction for the optimism of reusing the
training data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from oic.errors import InputError, InsufficientDataError
from oic.influence import _contexts, _invert_hessian, _samples
from oic.numkit import kde_density, normal_cdf, normal_pdf, pinv
from oic.problems import compose_grad_theta, compose_hess_theta

FOC_TOL = 1e-6


@dataclass(frozen=True)
class EvalEstimate:
    apparent: float
    correction: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.apparent + self.correction


def apparent_cost(cost, rule, theta, data, z=None):
    """Average in-sample cost of the fitted decision."""
    xi = _samples(data)
    if xi.shape[0] == 0:
        raise InsufficientDataError("apparent cost of an empty sample")
    z = _contexts(data, z)
    x = rule.value(theta, z)
    return float(np.mean(cost.value(x, xi)))


def oic_general(cost, rule, theta, data, inf, z=None):
    """Influence-function correction ``-(1/n^2) sum grad_i . IF_i``."""
    xi = _samples(data)
    n = xi.shape[0]
    if inf.n != n:
        raise InputError(f"influence set has {inf.n} rows for {n} samples")
    z = _contexts(data, z)
    G = np.atleast_2d(compose_grad_theta(cost, rule, theta, xi, z))
    if G.shape[1] != inf.dim_theta:
        raise InputError("influence dimension does not match theta")
    corr = -float(np.einsum("nk,nk->", G, inf.vectors)) / (n * n)
    return EvalEstimate(apparent_cost(cost, rule, theta, xi, z), corr, "oic_general")


def _ierm_terms(cost, rule, theta, xi, z, hessian):
    G = np.atleast_2d(compose_grad_theta(cost, rule, theta, xi, z))
    n = G.shape[0]
    if hessian is None:
        I_h = np.mean(np.atleast_3d(compose_hess_theta(cost, rule, theta, xi, z)), axis=0)
    else:
        I_h = np.atleast_2d(np.asarray(hessian, dtype=float))
    J_h = G.T @ G / n
    return G, I_h, J_h


def oic_ierm(cost, rule, theta, data, z=None, hessian=None, singular="raise", check_foc=True):
    """Trace-form correction ``(1/n) Tr[I_h^{-1} J_h]`` for empirically fitted parameters.

    ``hessian`` overrides the mean composed Hessian ``I_h``. A first-order
    residual above ``1e-6 (1 + ||theta||)`` does not stop the computation but
    is flagged in ``diagnostics['warning']``.
    """
    xi = _samples(data)
    n = xi.shape[0]
    if n == 0:
        raise InsufficientDataError("empty sample")
    z = _contexts(data, z)
    G, I_h, J_h = _ierm_terms(cost, rule, theta, xi, z, hessian)
    Iinv, cond = _invert_hessian(I_h, singular)
    corr = float(np.trace(Iinv @ J_h)) / n
    resid = float(np.linalg.norm(G.mean(axis=0)))
    diag = {"I_h": I_h, "J_h": J_h, "cond": cond, "foc_residual": resid}
    tol = FOC_TOL * (1.0 + float(np.linalg.norm(theta)))
    if check_foc and resid > tol:
        diag["warning"] = f"first-order residual {resid:.3e} exceeds {tol:.3e}"
    return EvalEstimate(apparent_cost(cost, rule, theta, xi, z), corr, "oic_ierm", diag)


def oic_dro(cost, rule, theta_eps, data, z=None, hessian=None, singular="raise"):
    """Correction for a chi-square DRO fit with radius O(1/n).

    The robust fit shares the empirical fit's influence function, so the trace
    correction is evaluated at the robust parameter; the first-order residual
    is not expected to vanish there.
    """
    est = oic_ierm(cost, rule, theta_eps, data, z, hessian, singular, check_foc=False)
    return EvalEstimate(est.apparent, est.correction, "oic_dro", est.diagnostics)


def oic_constrained(cost, rule, theta, data, constraints, z=None):
    """Trace correction restricted to directions tangent to active constraints.

    ``P = I - C^T (C C^T)^+ C`` projects out the gradients (rows of ``C``) of
    the binding constraints; multipliers solve ``mean grad + C^T alpha = 0`` in
    least squares.
    """
    xi = _samples(data)
    n = xi.shape[0]
    if n == 0:
        raise InsufficientDataError("empty sample")
    G, I_h, J_h = _ierm_terms(cost, rule, theta, xi, None, None)
    d = I_h.shape[0]
    x = rule.value(theta)
    active = constraints.active(x)
    if not active:
        est = oic_ierm(cost, rule, theta, xi, check_foc=False)
        diag = {"active": [], "alpha": np.empty(0), "P": np.eye(d), "idempotence": 0.0}
        return EvalEstimate(est.apparent, est.correction, "oic_constrained", diag)
    C = np.vstack([constraints.grad_theta(j, rule, theta) for j in active])
    P = np.eye(d) - C.T @ pinv(C @ C.T) @ C
    P = 0.5 * (P + P.T)
    gbar = G.mean(axis=0)
    alpha, *_ = np.linalg.lstsq(C.T, -gbar, rcond=None)
    I_alpha = I_h.copy()
    for a, j in zip(alpha, active):
        I_alpha = I_alpha + a * constraints.hess_theta(j, rule, theta)
    corr = float(np.trace(P @ pinv(I_alpha) @ P @ J_h)) / n
    diag = {
        "active": active,
        "alpha": alpha,
        "P": P,
        "idempotence": float(np.max(np.abs(P @ P - P))),
    }
    return EvalEstimate(apparent_cost(cost, rule, theta, xi), corr, "oic_constrained", diag)


@dataclass(frozen=True)
class ParametricExpectation:
    """``theta -> E_{P_theta}[h(x*(theta); xi)]`` and optionally its gradient.

    ``se`` is the Monte Carlo standard error when the value is sampled.
    """

    value: Callable
    grad: Callable | None = None
    se: float = 0.0


def monte_carlo_expectation(cost, rule, sampler, theta, m=100_000, seed=0):
    """Monte Carlo ``E_{P_theta}[h]`` with ``sampler(theta, m, rng)`` drawing from the model."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    draws = np.asarray(sampler(theta, m, rng), dtype=float)
    vals = cost.value(rule.value(theta), draws if draws.ndim == 2 else draws[:, None])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m))


def p_oic(expectation, theta, I_h, psi, n, c_bias=None):
    """Parametric estimate ``E_{P_theta}[h] + Tr[I_h Psi]/(2n) - grad^T C / n``."""
    if expectation is None:
        raise InputError("p_oic needs a parametric expectation")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    I_h = np.atleast_2d(np.asarray(I_h, dtype=float))
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    apparent = float(expectation.value(theta))
    corr = float(np.trace(I_h @ psi)) / (2.0 * n)
    c_term = 0.0
    if c_bias is not None and np.any(np.asarray(c_bias) != 0.0):
        if expectation.grad is None:
            raise InputError("a nonzero bias term needs the expectation gradient")
        c_term = float(np.asarray(expectation.grad(theta)) @ np.asarray(c_bias, dtype=float)) / n
    diag = {"mc_se": expectation.se, "c_term": c_term}
    return EvalEstimate(apparent, corr - c_term, "p_oic", diag)


def misspec_gap(oic_total, poic_totals):
    """``A_hat - A_hat_p``; a sequence of per-context parametric totals is averaged first."""
    ref = np.asarray(poic_totals, dtype=float)
    return float(oic_total) - (float(ref) if ref.ndim == 0 else float(ref.mean()))


# -- newsvendor helpers --------------------------------------------------------


def newsvendor_saa_oic(data, theta, p, c, bandwidth=None):
    """SAA newsvendor estimate with the density-based correction ``c(p-c) / (n p f(theta))``.

    The density at the fitted quantile comes from a Gaussian kernel estimate.
    """
    from oic.problems import NewsvendorCost, identity_rule

    xi = _samples(data)[:, 0]
    n = xi.size
    theta = float(np.asarray(theta).reshape(-1)[0])
    f_hat = kde_density(xi, theta, bandwidth)
    corr = c * (p - c) / (n * p * f_hat)
    app = apparent_cost(NewsvendorCost(p, c), identity_rule(1), [theta], xi[:, None])
    return EvalEstimate(app, corr, "oic_saa_kde", {"density": f_hat})


def truncnormal_newsvendor_expectation(x, mu, sd, p, c):
    """``E[c x - p min(xi, x)]`` for ``xi = max(0, N(mu, sd^2))``."""
    if x <= 0.0:
        return (c - p) * x if x < 0.0 else 0.0

    def emin(a):
        t = (a - mu) / sd
        return a - ((a - mu) * normal_cdf(t) + sd * normal_pdf(t))

    return c * x - p * (emin(x) - emin(0.0))


def normal_newsvendor_expectation(x, mu, sd, p, c):
    """``E[c x - p min(xi, x)]`` for untruncated ``xi ~ N(mu, sd^2)``."""
    t = (x - mu) / sd
    emin = x - ((x - mu) * normal_cdf(t) + sd * normal_pdf(t))
    return c * x - p * emin


def exponential_newsvendor_expectation(x, mean, p, c):
    """``E[c x - p min(xi, x)]`` for ``xi ~ Exp`` with the given mean."""
    if x < 0.0:
        return (c - p) * x
    return c * x - p * mean * (1.0 - math.exp(-x / mean))
