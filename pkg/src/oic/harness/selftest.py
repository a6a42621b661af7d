"""Fast exact-identity suites that gate a build.

Each suite returns ``(passed, detail)``. Estimator callables can be swapped
in through ``run_selftest(overrides=...)`` so a deliberately broken formula
can be shown to trip the right suite.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from oic.baselines import loocv
from oic.dgp import rng_stream
from oic.estimators import ParametricExpectation, oic_general, oic_ierm, p_oic
from oic.fitters import fit_ols
from oic.influence import if_m_estimator
from oic.numkit import pinv
from oic.problems import (
    ContextualLinearRule,
    PiecewiseLinear,
    SmoothedCost,
    SquaredLossCost,
    identity_rule,
    smooth_value,
)

SELFTEST_SEED = 20240601


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _ols_instances(count, seed):
    rng = rng_stream(seed, 0)
    for _ in range(count):
        d = int(rng.integers(1, 11))
        n = int(rng.integers(d + 5, 201))
        U = rng.standard_normal((n, d))
        y = U @ rng.standard_normal(d) + rng.standard_normal(n)
        yield U, y


def suite_cp(ierm=oic_ierm, seed=SELFTEST_SEED, count=50):
    """Least-squares trace correction against its closed forms.

    On general designs the correction is the sandwich ``2 Tr[S^{-1} M] / n``
    with ``S`` the mean Gram matrix and ``M`` the residual-weighted one. On
    intercept-only designs ``M = mean(r^2) S`` and the classical Cp penalty
    ``2 d sum r^2 / n^2`` is exact.
    """
    cost = SquaredLossCost()
    worst = 0.0
    for U, y in _ols_instances(count, seed):
        n, d = U.shape
        theta = fit_ols(U, y).theta
        r = y - U @ theta
        S = U.T @ U / n
        M = (U * (r * r)[:, None]).T @ U / n
        want = 2.0 * float(np.trace(np.linalg.solve(S, M))) / n
        got = ierm(cost, ContextualLinearRule(d), theta, y[:, None], U).correction
        worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    rng = rng_stream(seed, 4)
    for _ in range(count):
        n = int(rng.integers(2, 201))
        U = np.ones((n, 1))
        y = rng.standard_normal(n)
        theta = fit_ols(U, y).theta
        r = y - U @ theta
        want = 2.0 * float(r @ r) / n**2
        got = ierm(cost, ContextualLinearRule(1), theta, y[:, None], U).correction
        worst = max(worst, abs(got - want))
    return worst <= 1e-9, f"max |err| = {worst:.2e}"


def suite_equivalence(ierm=oic_ierm, general=oic_general, seed=SELFTEST_SEED, count=50):
    """Trace form equals the influence form with M-estimator influence vectors."""
    cost = SquaredLossCost()
    worst = 0.0
    for U, y in _ols_instances(count, seed):
        d = U.shape[1]
        rule = ContextualLinearRule(d)
        theta = fit_ols(U, y).theta
        a = ierm(cost, rule, theta, y[:, None], U).correction
        inf = if_m_estimator(cost, rule, theta, y[:, None], U)
        b = general(cost, rule, theta, y[:, None], inf, U).correction
        worst = max(worst, abs(a - b))
    return worst <= 1e-10, f"max |err| = {worst:.2e}"


def suite_poic_toy(poic=p_oic):
    """Gaussian location model with unit variance: ``1 + 1/n`` exactly."""
    worst = 0.0
    for n in (5, 50, 500):
        est = poic(ParametricExpectation(lambda th: 1.0), [0.3], [[2.0]], [[1.0]], n)
        worst = max(worst, abs(est.total - (1.0 + 1.0 / n)))
    return worst <= 1e-15, f"max |err| = {worst:.2e}"


def suite_moore_penrose(seed=SELFTEST_SEED, count=30):
    """``A A+ A = A``, ``A+ A A+ = A+`` and symmetric products on rank-deficient matrices."""
    rng = rng_stream(seed, 1)
    worst = 0.0
    for _ in range(count):
        d = int(rng.integers(2, 9))
        r = int(rng.integers(1, d + 1))
        B = rng.standard_normal((d, r))
        A = B @ B.T
        P = pinv(A)
        scale = max(1.0, float(np.abs(A).max()), float(np.abs(P).max()))
        errs = (A @ P @ A - A, P @ A @ P - P, A @ P - (A @ P).T, P @ A - (P @ A).T)
        worst = max(worst, max(float(np.abs(e).max()) for e in errs) / scale)
    return worst <= 1e-8, f"max rel err = {worst:.2e}"


def suite_smoothing(seed=SELFTEST_SEED):
    """Smoothed convex piecewise-linear functions lie above and converge to the original."""
    rng = rng_stream(seed, 2)
    f = PiecewiseLinear.from_slopes([-1.0, 0.0, 2.0], [-3.0, -1.0, 0.5, 1.5], (0.0, 0.25))
    grid = np.concatenate([rng.uniform(-4.0, 4.0, size=25), f.kinks])
    below, gaps = 0.0, []
    for kernel in ("box", "epanechnikov"):
        for m in (1.0, 10.0, 100.0):
            s = SmoothedCost(f, kernel, m)
            diff = np.array([smooth_value(s, z) - f(z) for z in grid])
            below = min(below, float(diff.min()))
            gaps.append(float(np.abs(diff).max()))
    ok = below >= -1e-12 and gaps[2] < gaps[1] < gaps[0] and gaps[5] < gaps[4] < gaps[3]
    return ok, f"min f_m - f = {below:.1e}, sup gap at m=100: {max(gaps[2], gaps[5]):.1e}"


def suite_loocv_trend(seed=SELFTEST_SEED, reps=100):
    """Median ``n |A_oic - A_loocv|`` shrinks as ``n`` grows on the Gaussian mean toy."""
    cost, rule = SquaredLossCost(), identity_rule(1)
    refit = lambda d: d.xi.mean(axis=0)
    meds = []
    for n in (50, 100, 200):
        vals = np.empty(reps)
        for r in range(reps):
            xi = rng_stream(seed, 3, n, r).standard_normal((n, 1))
            theta = xi.mean(axis=0)
            est = oic_ierm(cost, rule, theta, xi).total
            vals[r] = n * abs(est - loocv(refit, cost, rule, xi))
        meds.append(float(np.median(vals)))
    ok = meds[0] >= meds[1] >= meds[2]
    return ok, "medians " + ", ".join(f"{m:.4f}" for m in meds)


SUITES = {
    "cp": suite_cp,
    "equivalence": suite_equivalence,
    "poic_toy": suite_poic_toy,
    "moore_penrose": suite_moore_penrose,
    "smoothing": suite_smoothing,
    "loocv_trend": suite_loocv_trend,
}

# which override names each suite accepts
_HOOKS = {
    "cp": ("ierm",),
    "equivalence": ("ierm", "general"),
    "poic_toy": ("poic",),
}


def run_selftest(overrides=None, names=None):
    """Run the suites and return one :class:`SuiteResult` per suite."""
    overrides = overrides or {}
    out = []
    for name in names or SUITES:
        kwargs = {k: overrides[k] for k in _HOOKS.get(name, ()) if k in overrides}
        t0 = time.perf_counter()
        try:
            ok, detail = SUITES[name](**kwargs)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out


def format_matrix(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'suite':<{width}}  result  seconds  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:7.3f}  {r.detail}")
    total = sum(r.seconds for r in results)
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} passed in {total:.2f} s")
    return "\n".join(lines)
