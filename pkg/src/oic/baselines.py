"""Resampling evaluators used as comparison points for the debiased estimates.

A *refitter* is any callable ``refit(dataset) -> theta``; it must be
deterministic for a given subset.
"""
from __future__ import annotations

import numpy as np

from oic.dgp import RESAMPLE, Dataset, rng_stream
from oic.errors import DomainError, InsufficientDataError, OICError, RefitError


def _as_dataset(data):
    return data if isinstance(data, Dataset) else Dataset(np.asarray(data, dtype=float))


def _losses(cost, rule, theta, data):
    x = rule.value(theta, data.z) if rule.contextual else rule.value(theta)
    return np.atleast_1d(cost.value(x, data.xi))


def _refit(refit, data, index):
    try:
        return refit(data)
    except OICError as exc:
        raise RefitError(f"refit failed on subset {index}: {exc}", index) from exc
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        raise RefitError(f"refit failed on subset {index}: {exc}", index) from exc


def _holdout_losses(refit, cost, rule, data, folds):
    out = np.empty(data.n)
    for k, fold in enumerate(folds):
        keep = np.ones(data.n, dtype=bool)
        keep[fold] = False
        theta = _refit(refit, data.subset(np.flatnonzero(keep)), k)
        out[fold] = _losses(cost, rule, theta, data.subset(fold))
    return out


def fold_partition(n, K, seed, *keys):
    """Seeded shuffle split into ``K`` contiguous folds; leading folds take the remainder."""
    perm = rng_stream(seed, RESAMPLE, *keys).permutation(n)
    return np.array_split(perm, K)


def kfold_cv(refit, cost, rule, data, K, seed=0, keys=()):
    """Mean held-out cost over a ``K``-fold partition."""
    data = _as_dataset(data)
    n = data.n
    if not 2 <= K <= n:
        raise DomainError(f"K must lie in [2, {n}], got {K}")
    folds = [np.sort(f) for f in fold_partition(n, K, seed, *keys)]
    return float(np.mean(_holdout_losses(refit, cost, rule, data, folds)))


def loocv(refit, cost, rule, data):
    """Leave-one-out cross-validated cost."""
    data = _as_dataset(data)
    if data.n < 2:
        raise InsufficientDataError("leave-one-out needs at least two samples")
    folds = [np.array([i]) for i in range(data.n)]
    return float(np.mean(_holdout_losses(refit, cost, rule, data, folds)))


def bootstrap_debias(refit, cost, rule, data, B=50, seed=0, keys=(), theta=None):
    """``2 A_o - mean_b A_o,b`` with ``A_o,b`` the in-sample cost of a refit on resample ``b``.

    ``theta`` may pass the full-data fit to skip one refit.
    """
    data = _as_dataset(data)
    if B < 1:
        raise DomainError("B must be at least 1")
    n = data.n
    if theta is None:
        theta = _refit(refit, data, -1)
    a_o = float(np.mean(_losses(cost, rule, theta, data)))
    rng = rng_stream(seed, RESAMPLE, *keys)
    boot = np.empty(B)
    for b in range(B):
        sub = data.subset(rng.integers(0, n, size=n))
        theta_b = _refit(refit, sub, b)
        boot[b] = np.mean(_losses(cost, rule, theta_b, sub))
    return 2.0 * a_o - float(boot.mean())


def jackknife_debias(refit, cost, rule, data, theta=None):
    """``n A_o - (n - 1)/n sum_k A_o,k`` with leave-one-out in-sample costs ``A_o,k``."""
    data = _as_dataset(data)
    n = data.n
    if n < 2:
        raise InsufficientDataError("jackknife needs at least two samples")
    if theta is None:
        theta = _refit(refit, data, -1)
    a_o = float(np.mean(_losses(cost, rule, theta, data)))
    loo = np.empty(n)
    idx = np.arange(n)
    for k in range(n):
        sub = data.subset(idx[idx != k])
        loo[k] = np.mean(_losses(cost, rule, _refit(refit, sub, k), sub))
    return n * a_o - (n - 1) / n * float(loo.sum())
