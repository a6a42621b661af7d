"""Hot inner loops, each in a numba flavour and a numpy flavour.

The public name (``jacobi_eigh``, ``kde_eval``, ``chi2_shift``) is bound to one
of the two at import time according to ``oic._accel.USE_NUMBA``.
"""
from __future__ import annotations

import math

import numpy as np

from oic._accel import njit, pick

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# -- cyclic Jacobi eigensolver -------------------------------------------------


@njit
def _jacobi_eigh_nb(a, tol, max_sweeps):
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += A[i, j] * A[i, j]
    scale = math.sqrt(scale)
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * A[i, j] * A[i, j]
        if math.sqrt(off) <= tol * scale or off == 0.0:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    return w, V, sweeps


def _jacobi_eigh_np(a, tol, max_sweeps):
    n = a.shape[0]
    A = np.array(a, dtype=float, copy=True)
    V = np.eye(n)
    scale = np.sqrt(np.sum(A * A))
    iu = np.triu_indices(n, 1)
    sweeps = 0
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(A[iu] ** 2))
        if off <= tol * scale or off == 0.0:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V, sweeps


# -- Gaussian kernel density ---------------------------------------------------


@njit
def _kde_eval_nb(samples, points, bandwidth):
    n = samples.shape[0]
    out = np.empty(points.shape[0])
    for j in range(points.shape[0]):
        acc = 0.0
        for i in range(n):
            u = (points[j] - samples[i]) / bandwidth
            acc += math.exp(-0.5 * u * u)
        out[j] = acc * _INV_SQRT_2PI / (n * bandwidth)
    return out


def _kde_eval_np(samples, points, bandwidth):
    u = (points[:, None] - samples[None, :]) / bandwidth
    return np.exp(-0.5 * u * u).sum(axis=1) * _INV_SQRT_2PI / (samples.shape[0] * bandwidth)


# -- chi-square worst-case weights: shift search ------------------------------
# q_i proportional to (loss_i - eta)_+ ; find eta in [lo, hi] with
# n * sum(q^2) - 1 = eps. The left side increases with eta.


@njit
def _chi2_shift_nb(losses, eps, lo, hi, max_iter):
    n = losses.shape[0]
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s1 = 0.0
        s2 = 0.0
        for i in range(n):
            d = losses[i] - mid
            if d > 0.0:
                s1 += d
                s2 += d * d
        phi = n * s2 / (s1 * s1) - 1.0
        if phi > eps:
            hi = mid
        else:
            lo = mid
    return lo


def _chi2_shift_np(losses, eps, lo, hi, max_iter):
    n = losses.shape[0]
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        d = np.maximum(losses - mid, 0.0)
        phi = n * np.dot(d, d) / d.sum() ** 2 - 1.0
        if phi > eps:
            hi = mid
        else:
            lo = mid
    return lo


jacobi_eigh = pick(_jacobi_eigh_nb, _jacobi_eigh_np)
kde_eval = pick(_kde_eval_nb, _kde_eval_np)
chi2_shift = pick(_chi2_shift_nb, _chi2_shift_np)

KERNELS = {
    "jacobi_eigh": (_jacobi_eigh_nb, _jacobi_eigh_np),
    "kde_eval": (_kde_eval_nb, _kde_eval_np),
    "chi2_shift": (_chi2_shift_nb, _chi2_shift_np),
}
