"""Cost models, parametric decision rules and their theta-derivatives.

Cost models are batch-first: ``x`` may be one decision ``(dim_x,)`` shared by
all samples or one decision per sample ``(n, dim_x)``; ``xi`` is ``(n, dim_xi)``
for a batch or ``(dim_xi,)`` for a single sample. A single sample paired with
a single decision returns scalars / vectors / matrices without the batch axis.

Decision rules map ``theta`` (and optionally a context ``z``) to a decision and
expose the Jacobian ``(dim_x, dim_theta)`` and the stacked component Hessians
``(dim_x, dim_theta, dim_theta)``. Given a batch of contexts ``(n, dim_z)`` they
return the batched versions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from oic.errors import DimensionError, DomainError, InputError, SingularityError
from oic.numkit import normal_quantile


def _batch(x, xi, dim_x, dim_xi):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    single = x.ndim <= 1 and xi.ndim <= 1
    if x.ndim == 0:
        x = x.reshape(1)
    if xi.ndim == 0:
        xi = xi.reshape(1)
    X = np.atleast_2d(x)
    XI = np.atleast_2d(xi)
    if X.shape[1] != dim_x:
        raise DimensionError(f"decision has dimension {X.shape[1]}, expected {dim_x}")
    if XI.shape[1] != dim_xi:
        raise DimensionError(f"sample has dimension {XI.shape[1]}, expected {dim_xi}")
    if X.shape[0] not in (1, XI.shape[0]) and XI.shape[0] != 1:
        raise DimensionError(f"{X.shape[0]} decisions for {XI.shape[0]} samples")
    n = max(X.shape[0], XI.shape[0])
    return np.broadcast_to(X, (n, dim_x)), np.broadcast_to(XI, (n, dim_xi)), single


class CostModel:
    """Base class for a cost ``h(x; xi)`` with analytic x-derivatives.

    Subclasses implement the ``_value``, ``_grad`` and ``_hess`` batch kernels
    on 2-D arrays; the public methods handle shapes.
    """

    dim_x: int
    dim_xi: int
    smooth: bool = True

    def value(self, x, xi):
        X, XI, single = _batch(x, xi, self.dim_x, self.dim_xi)
        out = self._value(X, XI)
        return float(out[0]) if single else out

    def grad_x(self, x, xi):
        X, XI, single = _batch(x, xi, self.dim_x, self.dim_xi)
        out = self._grad(X, XI)
        return out[0] if single else out

    def hess_x(self, x, xi):
        X, XI, single = _batch(x, xi, self.dim_x, self.dim_xi)
        out = self._hess(X, XI)
        return out[0] if single else out

    def _value(self, X, XI):
        raise NotImplementedError

    def _grad(self, X, XI):
        raise NotImplementedError

    def _hess(self, X, XI):
        raise NotImplementedError


class NewsvendorCost(CostModel):
    """``h(x; xi) = c*x - p*min(xi, x)``; kink at ``x == xi``.

    The x-gradient follows the averaged one-sided convention at the kink.
    """

    smooth = False

    def __init__(self, p, c):
        if not (p > c > 0):
            raise DomainError("newsvendor needs price p > cost c > 0")
        self.p = float(p)
        self.c = float(c)
        self.dim_x = 1
        self.dim_xi = 1

    def _value(self, X, XI):
        return self.c * X[:, 0] - self.p * np.minimum(XI[:, 0], X[:, 0])

    def _grad(self, X, XI):
        x, d = X[:, 0], XI[:, 0]
        g = np.where(x < d, self.c - self.p, self.c)
        g = np.where(x == d, self.c - 0.5 * self.p, g)
        return g[:, None]

    def _hess(self, X, XI):
        return np.zeros((X.shape[0], 1, 1))

    def kinks(self, xi):
        return np.asarray(xi, dtype=float).reshape(-1)


class PortfolioCost(CostModel):
    """Mean-variance portfolio cost.

    ``h(x; xi) = x^T (A(xi) + lam2 I) x - lam1 xi^T x`` with
    ``A(xi) = (xi - center)(xi - center)^T``.
    """

    def __init__(self, center, lam1=1.0, lam2=1.0):
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.lam1 = float(lam1)
        self.lam2 = float(lam2)
        self.dim_x = self.dim_xi = self.center.size

    def _value(self, X, XI):
        u = XI - self.center
        proj = np.einsum("nd,nd->n", u, X)
        return proj ** 2 + self.lam2 * np.einsum("nd,nd->n", X, X) - self.lam1 * np.einsum("nd,nd->n", XI, X)

    def _grad(self, X, XI):
        u = XI - self.center
        proj = np.einsum("nd,nd->n", u, X)
        return 2.0 * u * proj[:, None] + 2.0 * self.lam2 * X - self.lam1 * XI

    def _hess(self, X, XI):
        u = XI - self.center
        H = 2.0 * u[:, :, None] * u[:, None, :]
        H += 2.0 * self.lam2 * np.eye(self.dim_x)
        return H


class SquaredLossCost(CostModel):
    """``h(x; xi) = (xi - x)^2`` for a scalar decision and scalar outcome."""

    def __init__(self):
        self.dim_x = 1
        self.dim_xi = 1

    def _value(self, X, XI):
        return (XI[:, 0] - X[:, 0]) ** 2

    def _grad(self, X, XI):
        return 2.0 * (X - XI)

    def _hess(self, X, XI):
        return np.full((X.shape[0], 1, 1), 2.0)


class GaussianNLLCost(CostModel):
    """Negative log-likelihood of ``N(mu, s)`` at ``xi``; decision ``x = (mu, s)``."""

    def __init__(self):
        self.dim_x = 2
        self.dim_xi = 1

    def _check(self, X):
        if np.any(X[:, 1] <= 0.0):
            raise DomainError("variance must be positive")

    def _value(self, X, XI):
        self._check(X)
        r = XI[:, 0] - X[:, 0]
        s = X[:, 1]
        return 0.5 * np.log(2.0 * math.pi * s) + r * r / (2.0 * s)

    def _grad(self, X, XI):
        self._check(X)
        r = XI[:, 0] - X[:, 0]
        s = X[:, 1]
        return np.column_stack([-r / s, 0.5 / s - r * r / (2.0 * s * s)])

    def _hess(self, X, XI):
        self._check(X)
        r = XI[:, 0] - X[:, 0]
        s = X[:, 1]
        H = np.empty((X.shape[0], 2, 2))
        H[:, 0, 0] = 1.0 / s
        H[:, 0, 1] = H[:, 1, 0] = r / (s * s)
        H[:, 1, 1] = -0.5 / (s * s) + r * r / s ** 3
        return H


class ConstantCost(CostModel):
    def __init__(self, const, dim_x=1, dim_xi=1):
        self.const = float(const)
        self.dim_x = dim_x
        self.dim_xi = dim_xi

    def _value(self, X, XI):
        return np.full(X.shape[0], self.const)

    def _grad(self, X, XI):
        return np.zeros((X.shape[0], self.dim_x))

    def _hess(self, X, XI):
        return np.zeros((X.shape[0], self.dim_x, self.dim_x))


def newsvendor_cost(p, c):
    return NewsvendorCost(p, c)


def portfolio_cost(center, lam1=1.0, lam2=1.0):
    return PortfolioCost(center, lam1, lam2)


def squared_loss_contextual(dim_z):
    """Squared loss with the linear contextual rule ``x = theta^T z``."""
    return SquaredLossCost(), ContextualLinearRule(dim_z)


# -- decision rules ------------------------------------------------------------


class DecisionRule:
    dim_theta: int
    dim_x: int
    contextual: bool = False

    def _theta(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.dim_theta:
            raise DimensionError(f"theta has dimension {theta.size}, expected {self.dim_theta}")
        return theta

    def value(self, theta, z=None):
        raise NotImplementedError

    def jac(self, theta, z=None):
        raise NotImplementedError

    def hess(self, theta, z=None):
        """Stacked component Hessians, shape ``(dim_x, dim_theta, dim_theta)``."""
        raise NotImplementedError

    def hess_theta_component(self, i, theta, z=None):
        return self.hess(theta, z)[..., i, :, :]


class LinearRule(DecisionRule):
    """``x = B theta`` for a fixed basis matrix ``B`` of shape ``(dim_x, dim_theta)``."""

    def __init__(self, basis, name="linear"):
        self.basis = np.asarray(basis, dtype=float)
        if self.basis.ndim != 2:
            raise DimensionError("basis must be a matrix")
        self.dim_x, self.dim_theta = self.basis.shape
        self.name = name

    def value(self, theta, z=None):
        return self.basis @ self._theta(theta)

    def jac(self, theta, z=None):
        self._theta(theta)
        return self.basis.copy()

    def hess(self, theta, z=None):
        self._theta(theta)
        return np.zeros((self.dim_x, self.dim_theta, self.dim_theta))


def identity_rule(d):
    return LinearRule(np.eye(d), name="identity")


def uniform_rule(d):
    return LinearRule(np.ones((d, 1)), name="uniform")


def block_rule(d):
    if d % 2:
        raise DimensionError("block rule needs an even dimension")
    B = np.zeros((d, 2))
    B[: d // 2, 0] = 1.0
    B[d // 2:, 1] = 1.0
    return LinearRule(B, name="block")


class ScaledRule(DecisionRule):
    """``x = k * theta`` for scalar theta (exponential newsvendor rules)."""

    def __init__(self, k, name="scaled"):
        self.k = float(k)
        self.dim_theta = self.dim_x = 1
        self.name = name

    def value(self, theta, z=None):
        return self.k * self._theta(theta)

    def jac(self, theta, z=None):
        self._theta(theta)
        return np.array([[self.k]])

    def hess(self, theta, z=None):
        self._theta(theta)
        return np.zeros((1, 1, 1))


class NormalQuantileRule(DecisionRule):
    """``x = mu + sqrt(s) * zq`` with ``theta = (mu, s)``, ``s`` a variance."""

    def __init__(self, zq):
        self.zq = float(zq)
        self.dim_theta = 2
        self.dim_x = 1
        self.name = "normal"

    def _sd(self, theta):
        theta = self._theta(theta)
        if theta[1] <= 0.0:
            raise DomainError("variance must be positive for the normal rule Jacobian")
        return theta, math.sqrt(theta[1])

    def value(self, theta, z=None):
        theta = self._theta(theta)
        if theta[1] < 0.0:
            raise DomainError("negative variance")
        return np.array([theta[0] + math.sqrt(theta[1]) * self.zq])

    def jac(self, theta, z=None):
        _, sd = self._sd(theta)
        return np.array([[1.0, self.zq / (2.0 * sd)]])

    def hess(self, theta, z=None):
        theta, sd = self._sd(theta)
        H = np.zeros((1, 2, 2))
        H[0, 1, 1] = -self.zq / (4.0 * sd * theta[1])
        return H


class ContextualLinearRule(DecisionRule):
    """``x = theta^T z``; scalar decision from a context vector."""

    contextual = True

    def __init__(self, dim_z):
        self.dim_theta = int(dim_z)
        self.dim_x = 1
        self.name = "contextual_linear"

    def _z(self, z):
        if z is None:
            raise InputError("contextual rule needs a context")
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim_theta:
            raise DimensionError(f"context has dimension {z.shape[-1]}, expected {self.dim_theta}")
        return z

    def value(self, theta, z=None):
        theta = self._theta(theta)
        z = self._z(z)
        return (z @ theta)[..., None]

    def jac(self, theta, z=None):
        self._theta(theta)
        z = self._z(z)
        return z[..., None, :].copy()

    def hess(self, theta, z=None):
        self._theta(theta)
        z = self._z(z)
        return np.zeros(z.shape[:-1] + (1, self.dim_theta, self.dim_theta))


class GaussianPortfolioRule(DecisionRule):
    """Plug-in portfolio under independent Gaussian margins.

    ``theta = (mu_1..mu_d, s_1..s_d)`` and ``x_i = lam1 mu_i / (2 (s_i + lam2))``,
    the minimiser of the expected cost when each margin is centred at its own
    mean.
    """

    def __init__(self, d, lam1=1.0, lam2=1.0):
        self.d = int(d)
        self.dim_x = self.d
        self.dim_theta = 2 * self.d
        self.lam1 = float(lam1)
        self.lam2 = float(lam2)
        self.name = "gaussian_eto"

    def value(self, theta, z=None):
        theta = self._theta(theta)
        mu, s = theta[: self.d], theta[self.d:]
        return self.lam1 * mu / (2.0 * (s + self.lam2))

    def jac(self, theta, z=None):
        theta = self._theta(theta)
        mu, s = theta[: self.d], theta[self.d:]
        den = s + self.lam2
        J = np.zeros((self.d, 2 * self.d))
        idx = np.arange(self.d)
        J[idx, idx] = self.lam1 / (2.0 * den)
        J[idx, self.d + idx] = -self.lam1 * mu / (2.0 * den ** 2)
        return J

    def hess(self, theta, z=None):
        theta = self._theta(theta)
        mu, s = theta[: self.d], theta[self.d:]
        den = s + self.lam2
        H = np.zeros((self.d, 2 * self.d, 2 * self.d))
        for i in range(self.d):
            j = self.d + i
            H[i, i, j] = H[i, j, i] = -self.lam1 / (2.0 * den[i] ** 2)
            H[i, j, j] = self.lam1 * mu[i] / den[i] ** 3
        return H


class FunctionRule(DecisionRule):
    """Decision rule assembled from user callables."""

    def __init__(self, dim_theta, dim_x, value, jac, hess=None, contextual=False, name="function"):
        self.dim_theta = dim_theta
        self.dim_x = dim_x
        self._value = value
        self._jac = jac
        self._hess = hess
        self.contextual = contextual
        self.name = name

    def value(self, theta, z=None):
        th = self._theta(theta)
        return np.asarray(self._value(th, z) if self.contextual else self._value(th), dtype=float)

    def jac(self, theta, z=None):
        th = self._theta(theta)
        return np.asarray(self._jac(th, z) if self.contextual else self._jac(th), dtype=float)

    def hess(self, theta, z=None):
        th = self._theta(theta)
        if self._hess is None:
            return np.zeros((self.dim_x, self.dim_theta, self.dim_theta))
        return np.asarray(self._hess(th, z) if self.contextual else self._hess(th), dtype=float)


# -- chain rule ----------------------------------------------------------------


def _decisions(rule, theta, z):
    if rule.contextual and z is None:
        raise InputError("contextual rule needs contexts")
    x = rule.value(theta, z)
    J = rule.jac(theta, z)
    return x, J


def compose_grad_theta(cost, rule, theta, xi, z=None):
    """Gradient of ``theta -> h(x*(theta [, z]); xi)``: ``J^T grad_x h``.

    Returns ``(dim_theta,)`` for one sample or ``(n, dim_theta)`` for a batch.
    """
    if rule.dim_x != cost.dim_x:
        raise DimensionError(f"rule yields dim_x={rule.dim_x}, cost expects {cost.dim_x}")
    x, J = _decisions(rule, theta, z)
    g = cost.grad_x(x, xi)
    if J.ndim == 2:
        return g @ J
    return np.einsum("nd,ndk->nk", np.atleast_2d(g), J)


def compose_hess_theta(cost, rule, theta, xi, z=None):
    """Hessian of ``theta -> h(x*(theta [, z]); xi)``.

    Full second-order chain rule: ``J^T (d2h/dx2) J + sum_i (dh/dx_i) d2x_i/dtheta2``.
    """
    if rule.dim_x != cost.dim_x:
        raise DimensionError(f"rule yields dim_x={rule.dim_x}, cost expects {cost.dim_x}")
    x, J = _decisions(rule, theta, z)
    R = rule.hess(theta, z)
    g = cost.grad_x(x, xi)
    H = cost.hess_x(x, xi)
    if J.ndim == 2 and H.ndim == 2:
        out = J.T @ H @ J + np.einsum("d,dkl->kl", g, R)
        return 0.5 * (out + out.T)
    H = np.atleast_3d(H) if H.ndim == 2 else H
    g = np.atleast_2d(g)
    if J.ndim == 2:
        out = np.einsum("dk,nde,el->nkl", J, H, J)
    else:
        out = np.einsum("ndk,nde,nel->nkl", J, H, J)
    if R.ndim == 3:
        out += np.einsum("nd,dkl->nkl", g, R)
    else:
        out += np.einsum("nd,ndkl->nkl", g, R)
    return 0.5 * (out + np.swapaxes(out, 1, 2))


@dataclass(frozen=True)
class FirstOrderCondition:
    """Scalar optimality condition ``f(theta, x) = 0`` with its partials.

    Each callable takes ``(theta, x)``; shapes: ``f_x``, ``f_xx`` scalar,
    ``f_theta``, ``f_xtheta`` of length ``dim_theta``, ``f_thetatheta`` square.
    """

    f_x: Callable
    f_theta: Callable
    f_xx: Callable
    f_xtheta: Callable
    f_thetatheta: Callable


def implicit_decision_derivatives(foc, theta, x, tol=1e-12):
    """First and second theta-derivatives of ``x(theta)`` defined by ``foc``.

    Returns ``(dx_dtheta, d2x_dtheta2)``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    fx = float(foc.f_x(theta, x))
    if abs(fx) < tol:
        raise SingularityError(f"|f_x| = {abs(fx):.3e} below {tol}; implicit function undefined")
    ft = np.atleast_1d(np.asarray(foc.f_theta(theta, x), dtype=float))
    ftt = np.atleast_2d(np.asarray(foc.f_thetatheta(theta, x), dtype=float))
    fxt = np.atleast_1d(np.asarray(foc.f_xtheta(theta, x), dtype=float))
    fxx = float(foc.f_xx(theta, x))
    dx = -ft / fx
    d2 = (-fx * fx * ftt + fx * (np.outer(ft, fxt) + np.outer(fxt, ft)) - fxx * np.outer(ft, ft)) / fx ** 3
    return dx, d2


# -- constraints -----------------------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    """Inequality ``g(x) <= 0`` with x-derivatives."""

    value: Callable
    grad_x: Callable
    hess_x: Callable


def linear_constraint(a, b=0.0):
    """``a^T x - b <= 0``."""
    a = np.asarray(a, dtype=float).reshape(-1)
    return Constraint(
        value=lambda x: float(a @ np.asarray(x, dtype=float) - b),
        grad_x=lambda x: a.copy(),
        hess_x=lambda x: np.zeros((a.size, a.size)),
    )


@dataclass
class ConstraintSet:
    constraints: Sequence[Constraint]
    active_tol: float = 1e-8

    def values(self, x):
        return np.array([c.value(x) for c in self.constraints])

    def active(self, x):
        return [j for j, c in enumerate(self.constraints) if abs(c.value(x)) <= self.active_tol]

    def grad_theta(self, j, rule, theta, z=None):
        x = rule.value(theta, z)
        return rule.jac(theta, z).T @ np.asarray(self.constraints[j].grad_x(x), dtype=float)

    def hess_theta(self, j, rule, theta, z=None):
        x = rule.value(theta, z)
        J = rule.jac(theta, z)
        g = np.asarray(self.constraints[j].grad_x(x), dtype=float)
        H = np.asarray(self.constraints[j].hess_x(x), dtype=float)
        out = J.T @ H @ J + np.einsum("d,dkl->kl", g, rule.hess(theta, z))
        return 0.5 * (out + out.T)


# -- kink handling and kernel smoothing ------------------------------------------


def subgradient_convention(cost, x, xi):
    """x-gradient with kinks resolved to the average of one-sided derivatives.

    Built-in piecewise costs already follow this convention in ``grad_x``.
    """
    return cost.grad_x(x, xi)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear ``f(u) = a + b u + sum_k w_k |u - kink_k|``."""

    kinks: tuple
    weights: tuple
    a: float
    b: float

    @classmethod
    def from_slopes(cls, kinks, slopes, anchor=(0.0, 0.0)):
        """Build from sorted kinks, the ``len(kinks) + 1`` slopes, and one point ``(u0, f(u0))``."""
        kinks = tuple(float(k) for k in kinks)
        slopes = [float(s) for s in slopes]
        if len(slopes) != len(kinks) + 1:
            raise DimensionError("need one more slope than kinks")
        if list(kinks) != sorted(kinks):
            raise InputError("kinks must be sorted")
        b = 0.5 * (slopes[0] + slopes[-1])
        w = tuple(0.5 * (slopes[k + 1] - slopes[k]) for k in range(len(kinks)))
        u0, f0 = anchor
        a = f0 - b * u0 - sum(wk * abs(u0 - zk) for wk, zk in zip(w, kinks))
        return cls(kinks, w, a, b)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = self.a + self.b * u
        for wk, zk in zip(self.weights, self.kinks):
            out = out + wk * np.abs(u - zk)
        return out

    def one_sided(self, u):
        """``(left, right)`` derivatives at ``u``."""
        left = right = self.b
        for wk, zk in zip(self.weights, self.kinks):
            left += wk * (1.0 if u > zk else -1.0)
            right += wk * (1.0 if u >= zk else -1.0)
        return left, right

    @property
    def convex(self):
        return all(w >= 0.0 for w in self.weights)


def newsvendor_kink_function(p, c):
    """``f(z) = c z^+ + (p - c) z^-`` so that ``h = (c - p) xi + f(x - xi)``."""
    return PiecewiseLinear.from_slopes([0.0], [-(p - c), c])


KERNELS = ("box", "epanechnikov")


@dataclass(frozen=True)
class SmoothedCost:
    """Kernel-smoothed ``f_m(z) = m * int f(u) phi(m (z - u)) du``.

    ``f`` is a :class:`PiecewiseLinear` (exact closed form) or a callable
    (adaptive quadrature; pass ``df`` for gradients).
    """

    f: object
    kernel: str = "box"
    m: float = 100.0
    df: Callable | None = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise InputError(f"unsupported kernel {self.kernel!r}; choose from {KERNELS}")
        if not self.m > 0:
            raise DomainError("smoothing level m must be positive")


def _abs_smooth(y, m, kernel, order):
    """``E|y - T/m|`` (order 0), its first (1) or second (2) derivative in y."""
    y = np.asarray(y, dtype=float)
    w = np.clip(m * y, -1.0, 1.0)
    inside = np.abs(m * y) < 1.0
    if kernel == "box":
        if order == 0:
            return np.where(inside, (w * w + 1.0) / (2.0 * m), np.abs(y))
        if order == 1:
            return np.where(inside, w, np.sign(y))
        return np.where(inside, m, 0.0)
    if order == 0:
        return np.where(inside, (0.75 * w ** 2 - w ** 4 / 8.0 + 0.375) / m, np.abs(y))
    if order == 1:
        return np.where(inside, 1.5 * w - 0.5 * w ** 3, np.sign(y))
    return np.where(inside, m * 1.5 * (1.0 - w * w), 0.0)


def _kernel_pdf(kernel):
    if kernel == "box":
        return lambda t: 0.5 if abs(t) <= 1.0 else 0.0
    return lambda t: 0.75 * (1.0 - t * t) if abs(t) <= 1.0 else 0.0


def _quad_smooth(fun, s, z):
    from scipy.integrate import quad

    pdf = _kernel_pdf(s.kernel)
    val, _ = quad(lambda t: fun(z - t / s.m) * pdf(t), -1.0, 1.0, epsabs=1e-10, epsrel=1e-10, limit=200)
    return val


def smooth_value(s, z):
    if isinstance(s.f, PiecewiseLinear):
        z = np.asarray(z, dtype=float)
        out = s.f.a + s.f.b * z
        for wk, zk in zip(s.f.weights, s.f.kinks):
            out = out + wk * _abs_smooth(z - zk, s.m, s.kernel, 0)
        return float(out) if out.ndim == 0 else out
    if np.ndim(z):
        return np.array([_quad_smooth(s.f, s, zz) for zz in np.ravel(z)]).reshape(np.shape(z))
    return _quad_smooth(s.f, s, float(z))


def smooth_grad(s, z):
    if isinstance(s.f, PiecewiseLinear):
        z = np.asarray(z, dtype=float)
        out = s.f.b + np.zeros_like(z)
        for wk, zk in zip(s.f.weights, s.f.kinks):
            out = out + wk * _abs_smooth(z - zk, s.m, s.kernel, 1)
        return float(out) if out.ndim == 0 else out
    if s.df is not None:
        if np.ndim(z):
            return np.array([_quad_smooth(s.df, s, zz) for zz in np.ravel(z)]).reshape(np.shape(z))
        return _quad_smooth(s.df, s, float(z))
    step = 1e-4 / s.m
    return (smooth_value(s, np.asarray(z) + step) - smooth_value(s, np.asarray(z) - step)) / (2 * step)


def smooth_hess(s, z):
    """Second derivative; only available in closed form for piecewise-linear ``f``."""
    if not isinstance(s.f, PiecewiseLinear):
        raise InputError("second derivative needs a piecewise-linear f")
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for wk, zk in zip(s.f.weights, s.f.kinks):
        out = out + wk * _abs_smooth(z - zk, s.m, s.kernel, 2)
    return float(out) if out.ndim == 0 else out


class SmoothedNewsvendorCost(CostModel):
    """Newsvendor cost with its kink smoothed at level ``m``."""

    def __init__(self, p, c, m=100.0, kernel="box"):
        self.p, self.c = float(p), float(c)
        self.dim_x = self.dim_xi = 1
        self.smoother = SmoothedCost(newsvendor_kink_function(p, c), kernel=kernel, m=m)

    def _value(self, X, XI):
        return (self.c - self.p) * XI[:, 0] + smooth_value(self.smoother, X[:, 0] - XI[:, 0])

    def _grad(self, X, XI):
        return np.asarray(smooth_grad(self.smoother, X[:, 0] - XI[:, 0]))[:, None]

    def _hess(self, X, XI):
        return np.asarray(smooth_hess(self.smoother, X[:, 0] - XI[:, 0]))[:, None, None]


def normal_newsvendor_rule(p, c):
    return NormalQuantileRule(normal_quantile(1.0 - c / p))
