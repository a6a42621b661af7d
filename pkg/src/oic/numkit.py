"""Small dense linear algebra and univariate statistics used by the estimators."""
from __future__ import annotations

import math

import numpy as np

from oic import _kernels
from oic.errors import DegenerateDataError, DimensionError, DomainError, InputError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
PINV_REL_TOL = 1e-10


def _square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} has non-finite entries")
    return m


def trace(m):
    """Sum of the diagonal of a square matrix."""
    m = _square(m)
    return float(np.trace(m))


def sym_eig(m, tol=1e-10):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and orthonormal eigenvectors as columns, so that
    ``m == V @ diag(w) @ V.T``.

    Raises:
        InputError: if ``m`` departs from symmetry by more than ``tol * ||m||``.
    """
    m = _square(m)
    if m.shape[0] == 0:
        return np.empty(0), np.empty((0, 0))
    norm = np.linalg.norm(m)
    if np.max(np.abs(m - m.T), initial=0.0) > tol * max(norm, 1.0):
        raise InputError("matrix is not symmetric within tolerance")
    sym = 0.5 * (m + m.T)
    w, V, _ = _kernels.jacobi_eigh(sym, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def pinv(m, rel_tol=PINV_REL_TOL):
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Eigenvalues with ``|lambda| <= rel_tol * max|lambda|`` are treated as zero.
    """
    m = _square(m)
    if m.size == 0:
        return m.copy()
    w, V = sym_eig(m, tol=max(rel_tol, 1e-10))
    wmax = np.max(np.abs(w))
    if wmax == 0.0:
        return np.zeros_like(m)
    keep = np.abs(w) > rel_tol * wmax
    inv_w = np.zeros_like(w)
    inv_w[keep] = 1.0 / w[keep]
    p = (V * inv_w) @ V.T
    return 0.5 * (p + p.T)


def spd_solve(a, b):
    """Solve ``a x = b`` for symmetric positive definite ``a`` via Cholesky."""
    a = _square(a)
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise DomainError("matrix is not positive definite") from exc
    y = np.linalg.solve(L, b)
    return np.linalg.solve(L.T, y)


def normal_pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_cdf(x):
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


# Acklam's rational approximation to the normal quantile.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_quantile(p):
    """Inverse standard normal CDF, accurate to about 1e-15 for p in (0, 1).

    Rational approximation followed by one Halley refinement step.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    # Halley step; the upper tail works on the complement to keep precision.
    if p > 0.5:
        e = 0.5 * math.erfc(x / math.sqrt(2.0)) - (1.0 - p)
        e = -e
    else:
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def silverman_bandwidth(samples):
    samples = np.asarray(samples, dtype=float).ravel()
    sd = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
    return 1.06 * sd * samples.size ** (-0.2)


def kde_density(samples, at, bandwidth=None):
    """Gaussian kernel density estimate at one point or an array of points.

    Default bandwidth is Silverman's rule ``1.06 * sd * n**(-1/5)``.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise InputError("kde needs at least one sample")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(samples)
        if not bandwidth > 0.0:
            raise DegenerateDataError("samples have zero spread; pass an explicit bandwidth")
    elif not bandwidth > 0.0:
        raise DomainError("bandwidth must be positive")
    pts = np.atleast_1d(np.asarray(at, dtype=float))
    dens = _kernels.kde_eval(samples, pts.ravel(), float(bandwidth)).reshape(pts.shape)
    if np.ndim(at) == 0:
        return float(dens[0])
    return dens


def empirical_quantile(samples, q):
    """Left-continuous inverse of the empirical CDF: the ceil(n*q)-th order statistic."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise InputError("empirical quantile of an empty sample")
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    n = samples.size
    # guard against n*q landing a hair above an integer
    k = math.ceil(n * q - 1e-12)
    k = min(max(k, 1), n)
    return float(np.partition(samples, k - 1)[k - 1])
