"""Seeded synthetic data generators and ground-truth expected costs.

Random streams are counter-based: every draw comes from a Philox generator
keyed by ``(seed, *keys)``, so replication ``r`` produces the same bytes no
matter which worker runs it or in what order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from oic.errors import DimensionError, DomainError, InputError
from oic.estimators import exponential_newsvendor_expectation, truncnormal_newsvendor_expectation

# stream tags
INSTANCE, SAMPLE, RESAMPLE, TRUTH = 0, 1, 2, 3

KINDS = ("portfolio", "newsvendor_normal", "newsvendor_exponential", "regression_linear", "quadratic")

DEFAULTS = {
    "portfolio": {},
    "newsvendor_normal": {"mu0": 10.0, "sigma0": 3.0},
    "newsvendor_exponential": {"m0": 10.0},
    "regression_linear": {"noise": 1.0, "coef": 1.0},
    "quadratic": {"mu0": 0.0, "sigma0": 1.0},
}


def rng_stream(seed, *keys):
    """Independent generator for the stream addressed by ``(seed, *keys)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class Dataset:
    """Samples ``xi`` of shape ``(n, dim_xi)`` with optional contexts ``z``."""

    xi: np.ndarray
    z: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim == 1:
            xi = xi[:, None]
        object.__setattr__(self, "xi", xi)
        if self.z is not None:
            z = np.asarray(self.z, dtype=float)
            if z.ndim == 1:
                z = z[:, None]
            if z.shape[0] != xi.shape[0]:
                raise DimensionError("contexts and samples have different lengths")
            object.__setattr__(self, "z", z)

    @property
    def n(self):
        return self.xi.shape[0]

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.xi[idx], None if self.z is None else self.z[idx], self.meta)

    def to_csv(self, path):
        header = [f"xi_{j}" for j in range(self.xi.shape[1])]
        cols = [self.xi]
        if self.z is not None:
            header += [f"z_{j}" for j in range(self.z.shape[1])]
            cols.append(self.z)
        rows = np.hstack(cols)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([format(v, ".17g") for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            rows = np.array([[float(v) for v in row] for row in r], dtype=float)
        rows = rows.reshape(-1, len(header))
        xi_cols = [j for j, h in enumerate(header) if h.startswith("xi_")]
        z_cols = [j for j, h in enumerate(header) if h.startswith("z_")]
        if len(xi_cols) + len(z_cols) != len(header):
            raise InputError("dataset header must contain only xi_* and z_* columns")
        return cls(rows[:, xi_cols], rows[:, z_cols] if z_cols else None)


@dataclass(frozen=True)
class DgpSpec:
    kind: str
    n: int
    dim: int = 1
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown data kind {self.kind!r}; choose from {KINDS}")
        if self.n < 1:
            raise DomainError("n must be positive")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise InputError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = dict(DEFAULTS[self.kind], **self.params)
        object.__setattr__(self, "params", merged)
        if self.kind == "portfolio" and self.dim % 2:
            raise DimensionError("portfolio dimension must be even")
        if self.kind == "newsvendor_normal" and not merged["sigma0"] > 0:
            raise DomainError("sigma0 must be positive")
        if self.kind == "newsvendor_exponential" and not merged["m0"] > 0:
            raise DomainError("m0 must be positive")
        if self.kind == "quadratic" and not merged["sigma0"] > 0:
            raise DomainError("sigma0 must be positive")


# -- portfolio -------------------------------------------------------------------


@dataclass(frozen=True)
class PortfolioInstance:
    mu: np.ndarray
    cov: np.ndarray
    factor: np.ndarray  # cov = factor @ factor.T


def portfolio_instance(dim, seed):
    """Two independent Gaussian blocks with means U(0, 4) and covariance C C^T, c_ij ~ U(0, 1/2)."""
    if dim % 2:
        raise DimensionError("portfolio dimension must be even")
    rng = rng_stream(seed, INSTANCE)
    h = dim // 2
    mu = rng.uniform(0.0, 4.0, size=dim)
    factor = np.zeros((dim, dim))
    factor[:h, :h] = rng.uniform(0.0, 0.5, size=(h, h))
    factor[h:, h:] = rng.uniform(0.0, 0.5, size=(h, h))
    return PortfolioInstance(mu, factor @ factor.T, factor)


def gen_portfolio(n, dim, seed, rep=0, instance=None):
    inst = portfolio_instance(dim, seed) if instance is None else instance
    rng = rng_stream(seed, SAMPLE, rep)
    eps = rng.standard_normal((n, dim))
    return Dataset(inst.mu + eps @ inst.factor.T, meta={"instance": inst})


def portfolio_true_cost(instance, x, center, lam1=1.0, lam2=1.0):
    """``x^T (Sigma + d d^T + lam2 I) x - lam1 mu^T x`` with ``d = mu - center``.

    Only first and second moments of the law enter the expected cost.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    d = instance.mu - np.asarray(center, dtype=float).reshape(-1)
    return float(x @ instance.cov @ x + (d @ x) ** 2 + lam2 * (x @ x) - lam1 * (instance.mu @ x))


# -- newsvendor --------------------------------------------------------------------


def gen_newsvendor(kind, n, params=None, seed=0, rep=0):
    """Demand samples: ``max(0, N(mu0, sigma0^2))`` or exponential with mean ``m0``."""
    spec = DgpSpec(f"newsvendor_{kind}", n, 1, dict(params or {}), seed)
    return generate(spec, rep)


def newsvendor_true_cost(spec, x, p, c):
    x = float(np.asarray(x).reshape(-1)[0])
    if spec.kind == "newsvendor_exponential":
        return exponential_newsvendor_expectation(x, spec.params["m0"], p, c)
    if spec.kind == "newsvendor_normal":
        return truncnormal_newsvendor_expectation(x, spec.params["mu0"], spec.params["sigma0"], p, c)
    raise InputError(f"{spec.kind} is not a newsvendor kind")


# -- dispatch --------------------------------------------------------------------


def generate(spec, rep=0):
    """Dataset for replication ``rep`` of ``spec``."""
    prm = spec.params
    if spec.kind == "portfolio":
        return gen_portfolio(spec.n, spec.dim, spec.seed, rep)
    rng = rng_stream(spec.seed, SAMPLE, rep)
    if spec.kind == "newsvendor_normal":
        xi = np.maximum(0.0, rng.normal(prm["mu0"], prm["sigma0"], size=spec.n))
        return Dataset(xi)
    if spec.kind == "newsvendor_exponential":
        return Dataset(rng.exponential(prm["m0"], size=spec.n))
    if spec.kind == "quadratic":
        return Dataset(rng.normal(prm["mu0"], prm["sigma0"], size=spec.n))
    # regression_linear: intercept plus (dim - 1) standard normal features
    z = np.ones((spec.n, spec.dim))
    if spec.dim > 1:
        z[:, 1:] = rng.standard_normal((spec.n, spec.dim - 1))
    beta = np.full(spec.dim, float(prm["coef"]))
    y = z @ beta + prm["noise"] * rng.standard_normal(spec.n)
    return Dataset(y, z)


def true_cost(spec, x, **cost_params):
    """Expected cost of a fixed decision under the law of ``spec``.

    ``cost_params``: ``p, c`` for newsvendor kinds; ``center, lam1, lam2`` for
    portfolio; nothing for the quadratic kind (``x`` is the decision); for
    regression ``x`` is the coefficient vector.
    """
    prm = spec.params
    if spec.kind.startswith("newsvendor"):
        return newsvendor_true_cost(spec, x, cost_params["p"], cost_params["c"])
    if spec.kind == "portfolio":
        inst = cost_params.get("instance") or portfolio_instance(spec.dim, spec.seed)
        return portfolio_true_cost(inst, x, cost_params["center"],
                                   cost_params.get("lam1", 1.0), cost_params.get("lam2", 1.0))
    if spec.kind == "quadratic":
        x = float(np.asarray(x).reshape(-1)[0])
        return prm["sigma0"] ** 2 + (x - prm["mu0"]) ** 2
    theta = np.asarray(x, dtype=float).reshape(-1)
    diff = theta - prm["coef"]
    return float(prm["noise"] ** 2 + diff @ diff)


def monte_carlo_true_cost(cost, x, sampler, n_test=100_000, seed=0):
    """``(mean, se)`` of ``cost.value(x, xi)`` over ``n_test`` fresh draws from ``sampler(rng, n)``."""
    rng = rng_stream(seed, TRUTH)
    xi = np.asarray(sampler(rng, n_test), dtype=float)
    vals = cost.value(x, xi if xi.ndim == 2 else xi[:, None])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_test))
