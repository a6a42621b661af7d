"""Empirical influence functions of fitted parameters and their covariance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from oic.errors import InputError, InsufficientDataError, RankError
from oic.numkit import pinv
from oic.problems import compose_grad_theta, compose_hess_theta

PROVENANCES = ("moment", "m_estimator", "ols", "custom")
COND_MAX = 1e12


@dataclass(frozen=True)
class InfluenceSet:
    """Per-sample influence vectors, one row per sample.

    ``provenance`` records which provider produced them; the moment provider
    pairs with the divide-by-n variance convention.
    """

    vectors: np.ndarray
    provenance: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise InputError("influence vectors must form an (n, dim_theta) matrix")
        if not np.all(np.isfinite(v)):
            raise InputError("influence vectors contain non-finite entries")
        if self.provenance not in PROVENANCES:
            raise InputError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "vectors", v)

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def dim_theta(self):
        return self.vectors.shape[1]


def _samples(data):
    xi = getattr(data, "xi", data)
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    return xi


def _contexts(data, z):
    if z is None:
        z = getattr(data, "z", None)
    return None if z is None else np.asarray(z, dtype=float)


def if_moment_mean_var(data):
    """Influence of per-coordinate mean and divide-by-n variance.

    Columns are all means first, then all variances: ``theta = (mu, sigma^2)``.
    """
    xi = _samples(data)
    n = xi.shape[0]
    if n < 2:
        raise InsufficientDataError("moment influence needs at least two samples")
    mu = xi.mean(axis=0)
    dev = xi - mu
    var = np.mean(dev * dev, axis=0)
    return InfluenceSet(np.hstack([dev, dev * dev - var]), "moment")


def if_mean(data):
    """Influence of the sample mean alone."""
    xi = _samples(data)
    if xi.shape[0] < 1:
        raise InsufficientDataError("mean influence needs at least one sample")
    return InfluenceSet(xi - xi.mean(axis=0), "moment")


def _invert_hessian(H, singular):
    if H.size == 0:
        return H.copy(), 1.0
    w = np.abs(np.linalg.eigvalsh(0.5 * (H + H.T)))
    cond = np.inf if w.min() == 0.0 else w.max() / w.min()
    if cond > COND_MAX:
        if singular == "pinv":
            return pinv(H), cond
        raise RankError(
            f"average Hessian is singular (condition number {cond:.3e}); "
            "set singular='pinv' to use the pseudo-inverse"
        )
    return np.linalg.inv(H), cond


def if_m_estimator(cost, rule, theta, data, z=None, singular="raise", hessian=None):
    """``-H^{-1} grad_theta h(x*(theta); xi_i)`` with ``H`` the mean composed Hessian.

    ``hessian`` overrides the averaged Hessian (e.g. a density-based curvature
    for kinked costs whose pointwise Hessian vanishes).
    """
    if singular not in ("raise", "pinv"):
        raise InputError("singular policy must be 'raise' or 'pinv'")
    xi = _samples(data)
    z = _contexts(data, z)
    G = np.atleast_2d(compose_grad_theta(cost, rule, theta, xi, z))
    if hessian is None:
        H = np.mean(np.atleast_3d(compose_hess_theta(cost, rule, theta, xi, z)), axis=0)
    else:
        H = np.atleast_2d(np.asarray(hessian, dtype=float))
    Hinv, _ = _invert_hessian(H, singular)
    return InfluenceSet(-G @ Hinv.T, "m_estimator")


def if_ols(features, targets, theta, ridge=0.0):
    """Influence of the (ridge) least-squares coefficients.

    With ``ridge = 0`` this is ``r_i * S^{-1} u_i`` with ``S`` the mean Gram
    matrix. For ``ridge > 0`` the penalty ``ridge * ||theta||^2`` on the summed
    loss enters as ``(S + ridge/n I)^{-1} (r_i u_i - ridge/n theta)``.
    """
    U = np.asarray(features, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    y = np.asarray(targets, dtype=float).reshape(-1)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    n = U.shape[0]
    if y.size != n:
        raise InputError("features and targets have different lengths")
    if theta.size != U.shape[1]:
        raise InputError("theta does not match the feature dimension")
    lam = ridge / n
    S = U.T @ U / n + lam * np.eye(U.shape[1])
    Sinv, _ = _invert_hessian(S, "raise")
    r = y - U @ theta
    return InfluenceSet((r[:, None] * U - lam * theta) @ Sinv.T, "ols")


def psi_hat(inf):
    """``(1/n) sum IF_i IF_i^T``."""
    v = inf.vectors
    if v.shape[0] == 0:
        raise InsufficientDataError("empty influence set")
    psi = v.T @ v / v.shape[0]
    return 0.5 * (psi + psi.T)
