"""Fitting procedures that produce the parameter behind each decision rule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from oic import _kernels
from oic.errors import DomainError, InputError, InsufficientDataError, RankError, SolverError
from oic.influence import _samples
from oic.numkit import empirical_quantile, normal_quantile
from oic.problems import (
    DecisionRule,
    GaussianPortfolioRule,
    NormalQuantileRule,
    ScaledRule,
    block_rule,
    identity_rule,
    uniform_rule,
)

DRO_TOL = 1e-8
DRO_MAX_ITER = 500
CHI2_MAX_BISECT = 200


@dataclass(frozen=True)
class FitResult:
    theta: np.ndarray
    method: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundRule:
    """A decision rule together with the parameter it was fitted at."""

    rule: DecisionRule
    theta: np.ndarray

    @property
    def decision(self):
        return self.rule.value(self.theta)


def fit_saa_newsvendor(data, p, c):
    """Empirical ``1 - c/p`` quantile of the demand sample."""
    xi = _samples(data)[:, 0]
    if xi.size == 0:
        raise InsufficientDataError("newsvendor fit needs data")
    return FitResult(np.array([empirical_quantile(xi, 1.0 - c / p)]), "saa_newsvendor")


def fit_moments(data, ddof=1):
    """Per-coordinate mean and variance stacked as ``(mu_1..mu_d, s_1..s_d)``.

    ``ddof=1`` gives the unbiased variance used by the newsvendor plug-in
    rules; ``ddof=0`` matches the moment influence provider.
    """
    xi = _samples(data)
    n = xi.shape[0]
    if n == 0 or n <= ddof:
        raise InsufficientDataError(f"variance with ddof={ddof} needs more than {ddof} samples")
    mu = xi.mean(axis=0)
    var = np.sum((xi - mu) ** 2, axis=0) / (n - ddof)
    return FitResult(np.concatenate([mu, var]), f"moments_ddof{ddof}")


ETO_KINDS = ("normal", "exponential", "exp_os")


def eto_decision(kind, fit, p, c, n=None):
    """Newsvendor plug-in rule for a fitted demand model.

    ``fit`` is a :class:`FitResult` from :func:`fit_moments`; the exponential
    kinds use only its mean. ``n`` is the sample size (needed for ``exp_os``).
    """
    theta = np.asarray(fit.theta, dtype=float)
    if kind == "normal":
        if theta.size != 2:
            raise InputError("normal rule needs (mean, variance)")
        if theta[1] < 0.0:
            raise DomainError("negative variance")
        return BoundRule(NormalQuantileRule(normal_quantile(1.0 - c / p)), theta.copy())
    if kind in ("exponential", "exp_os"):
        mean = theta[:1].copy()
        if not mean[0] > 0.0:
            raise DomainError("exponential rules need a positive mean")
        if kind == "exponential":
            return BoundRule(ScaledRule(math.log(p / c), "exponential"), mean)
        if n is None or n < 1:
            raise InputError("exp_os rule needs the sample size")
        k = n * ((p / c) ** (1.0 / (n + 1)) - 1.0)
        return BoundRule(ScaledRule(k, "exp_os"), mean)
    raise InputError(f"unknown rule kind {kind!r}; choose from {ETO_KINDS}")


# -- portfolio -------------------------------------------------------------------

PORTFOLIO_CLASSES = ("full", "uniform", "block")


def portfolio_rule(cls, d):
    if cls == "full":
        return identity_rule(d)
    if cls == "uniform":
        return uniform_rule(d)
    if cls == "block":
        return block_rule(d)
    raise InputError(f"unknown portfolio class {cls!r}; choose from {PORTFOLIO_CLASSES}")


def resolve_center(centering, xi):
    if isinstance(centering, str):
        if centering == "sample":
            return xi.mean(axis=0)
        if centering == "zero":
            return np.zeros(xi.shape[1])
        raise InputError(f"unknown centering {centering!r}")
    center = np.asarray(centering, dtype=float).reshape(-1)
    if center.size != xi.shape[1]:
        raise InputError("centering vector has the wrong dimension")
    return center


def _portfolio_pieces(cls, xi, center):
    B = portfolio_rule(cls, xi.shape[1]).basis
    U = (xi - center) @ B          # (n, k): (xi - c)^T B
    L = xi @ B                     # (n, k): xi^T B
    G = B.T @ B
    return B, U, L, G


def _weighted_solve(U, L, G, w, lam1, lam2):
    M = U.T @ (w[:, None] * U) + lam2 * G
    rhs = 0.5 * lam1 * (w @ L)
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise RankError("portfolio normal equations are singular") from exc


def _portfolio_losses(theta, U, L, G, lam1, lam2):
    u = U @ theta
    return u * u + lam2 * float(theta @ G @ theta) - lam1 * (L @ theta)


def _portfolio_grads(theta, U, L, G, lam1, lam2):
    u = U @ theta
    return 2.0 * u[:, None] * U + 2.0 * lam2 * (G @ theta) - lam1 * L


def fit_portfolio(cls, data, lam1=1.0, lam2=1.0, centering="sample"):
    """Closed-form minimiser of the empirical mean-variance cost over a rule class."""
    xi = _samples(data)
    n = xi.shape[0]
    if n == 0:
        raise InsufficientDataError("portfolio fit needs data")
    center = resolve_center(centering, xi)
    B, U, L, G = _portfolio_pieces(cls, xi, center)
    w = np.full(n, 1.0 / n)
    theta = _weighted_solve(U, L, G, w, lam1, lam2)
    resid = float(np.linalg.norm(w @ _portfolio_grads(theta, U, L, G, lam1, lam2)))
    return FitResult(theta, f"portfolio_{cls}", {"center": center, "foc_residual": resid})


def chi2_worst_case_weights(losses, eps):
    """Worst-case reweighting of an empirical distribution over a chi-square ball.

    Maximises ``sum q_i l_i`` over ``q >= 0``, ``sum q = 1``,
    ``n sum q_i^2 - 1 <= eps``. The optimum has ``q_i`` proportional to
    ``(l_i - eta)_+`` with the shift ``eta`` set so the ball constraint binds.
    """
    l = np.asarray(losses, dtype=float).reshape(-1)
    n = l.size
    if n == 0:
        raise InsufficientDataError("no losses")
    if eps < 0.0 or not math.isfinite(eps):
        raise DomainError("radius must be a finite non-negative number")
    uniform = np.full(n, 1.0 / n)
    lmax, lmin = float(l.max()), float(l.min())
    if eps == 0.0 or lmax == lmin:
        return uniform
    top = l == lmax
    k = int(top.sum())
    if eps >= n / k - 1.0:
        return top / k
    mean = float(l.mean())
    var = float(np.mean((l - mean) ** 2))
    spread = math.sqrt(var / eps)
    if mean - spread <= lmin:
        return uniform + (l - mean) / (n * spread)
    eta = _kernels.chi2_shift(l, float(eps), lmin, lmax, CHI2_MAX_BISECT)
    d = np.maximum(l - eta, 0.0)
    return d / d.sum()


def chi2_worst_case_value(losses, eps):
    q = chi2_worst_case_weights(losses, eps)
    return float(q @ np.asarray(losses, dtype=float).reshape(-1)), q


def _golden(f, lo, hi, tol):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * (1.0 + abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_dro_chi2(cls, data, lam1=1.0, lam2=1.0, centering="sample", rho=0.0,
                 tol=DRO_TOL, max_iter=DRO_MAX_ITER):
    """Minimise the chi-square worst-case empirical cost with radius ``rho / n``.

    Scalar classes use golden-section search; vector classes take Danskin
    gradient steps preconditioned by the worst-case-weighted Hessian (the
    weighted re-solve) with Armijo backtracking.
    """
    if rho < 0.0:
        raise DomainError("rho must be non-negative")
    xi = _samples(data)
    n = xi.shape[0]
    base = fit_portfolio(cls, xi, lam1, lam2, centering)
    if rho == 0.0 or np.all(xi == xi[0]):
        return FitResult(base.theta, f"dro_{cls}", dict(base.diagnostics, rho=rho, eps=0.0, iterations=0))
    eps = rho / n
    center = base.diagnostics["center"]
    B, U, L, G = _portfolio_pieces(cls, xi, center)

    def worst(theta):
        return chi2_worst_case_value(_portfolio_losses(theta, U, L, G, lam1, lam2), eps)

    if B.shape[1] == 1:
        scale = max(abs(float(base.theta[0])), 1e-8)
        lo, hi = -10.0 * scale, 10.0 * scale
        fun = lambda t: worst(np.array([t]))[0]
        for _ in range(60):
            t = _golden(fun, lo, hi, 1e-13)
            width = hi - lo
            if t - lo < 1e-3 * width:
                lo -= width
            elif hi - t < 1e-3 * width:
                hi += width
            else:
                break
        # golden section stalls near sqrt(machine eps) in theta; the descent
        # loop below polishes the residual
        theta = np.array([t])
    else:
        theta = base.theta.copy()
    val, q = worst(theta)
    resid = math.inf
    for it in range(1, max_iter + 1):
        grad = q @ _portfolio_grads(theta, U, L, G, lam1, lam2)
        resid = float(np.linalg.norm(grad))
        if resid <= tol:
            break
        step = _weighted_solve(U, L, G, q, lam1, lam2) - theta
        slope = float(grad @ step)
        if slope >= 0.0:
            step, slope = -grad, -resid * resid
        t = 1.0
        flat = 1e-13 * (1.0 + abs(val))
        while True:
            cand = theta + t * step
            cval, cq = worst(cand)
            if cval <= val + 1e-4 * t * slope:
                break
            # near the optimum the decrease drops below rounding; fall back
            # to accepting steps that shrink the gradient
            if cval - val <= flat:
                cgrad = cq @ _portfolio_grads(cand, U, L, G, lam1, lam2)
                if np.linalg.norm(cgrad) < resid:
                    break
            if t < 1e-12:
                break
            t *= 0.5
        if t < 1e-12:
            break
        theta, val, q = cand, cval, cq
    else:
        it = max_iter
    if resid > tol:
        grad = q @ _portfolio_grads(theta, U, L, G, lam1, lam2)
        resid = float(np.linalg.norm(grad))
        if resid > tol:
            raise SolverError(f"DRO fit stalled with gradient norm {resid:.3e} after {it} iterations", resid)
    diag = {"center": center, "rho": rho, "eps": eps, "worst_value": val,
            "foc_residual": resid, "iterations": it, "weights": q}
    return FitResult(theta, f"dro_{cls}", diag)


def fit_gaussian_eto_portfolio(data, lam1=1.0, lam2=1.0, ddof=1):
    """Fit independent Gaussian margins and return the plug-in portfolio rule."""
    xi = _samples(data)
    fit = fit_moments(xi, ddof)
    return fit, BoundRule(GaussianPortfolioRule(xi.shape[1], lam1, lam2), fit.theta)


def fit_ols(features, targets, ridge=0.0):
    """Least squares (or ridge) coefficients from the normal equations."""
    U = np.asarray(features, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    y = np.asarray(targets, dtype=float).reshape(-1)
    if U.shape[0] != y.size:
        raise InputError("features and targets have different lengths")
    if ridge < 0.0:
        raise DomainError("ridge penalty must be non-negative")
    A = U.T @ U + ridge * np.eye(U.shape[1])
    w = np.linalg.eigvalsh(A)
    if w.size and w[0] <= 1e-12 * max(w[-1], 1e-300):
        raise RankError("Gram matrix is singular; add a ridge penalty")
    theta = np.linalg.solve(A, U.T @ y)
    resid = float(np.linalg.norm(U.T @ (U @ theta - y) + ridge * theta)) / max(U.shape[0], 1)
    return FitResult(theta, "ols" if ridge == 0.0 else "ridge", {"foc_residual": resid})
