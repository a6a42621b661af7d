"""Acceptance criteria, each run at its stated size and tolerance.

Every test records a PASS/FAIL line (shown in the terminal summary). Criteria
whose stated identity does not hold for a faithful implementation are marked
``xfail(strict=True)``: they still run in full and report FAIL, and the suite
turns red if one of them ever starts passing. The reasoning for each is in the
``reason`` string.
"""
from __future__ import annotations

import math
import os
import time

import numpy as np
import pytest

from oic.dgp import rng_stream
from oic.estimators import ParametricExpectation, oic_constrained, oic_general, oic_ierm, p_oic
from oic.fitters import chi2_worst_case_weights, fit_ols
from oic.harness.config import load_config, parse_config
from oic.harness.report import write_rows
from oic.harness.runner import decision_quality, run_experiment
from oic.influence import if_m_estimator, if_moment_mean_var, if_ols
from oic.numkit import pinv
from oic.problems import (
    ConstraintSet,
    ContextualLinearRule,
    GaussianNLLCost,
    PiecewiseLinear,
    SmoothedCost,
    SquaredLossCost,
    identity_rule,
    linear_constraint,
    smooth_value,
)

SEED = 12345
CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

pytestmark = pytest.mark.slow


def _ols_instances(count=50, seed=SEED):
    rng = rng_stream(seed, 0)
    for _ in range(count):
        d = int(rng.integers(1, 11))
        n = int(rng.integers(d + 5, 201))
        U = rng.standard_normal((n, d))
        y = U @ rng.standard_normal(d) + rng.standard_normal(n)
        yield U, y


def _rows(report, model, evaluator):
    return next(r for r in report.rows if r.model == model and r.evaluator == evaluator)


def _raw(report, model, evaluator):
    return [r for r in report.raw if r.model == model and r.evaluator == evaluator]


@pytest.mark.xfail(
    strict=True,
    reason="the trace correction uses the gradient outer product mean(r^2 u u^T); the closed form "
    "2 d sum r^2 / n^2 replaces it by mean(r^2) mean(u u^T), which only coincides on "
    "intercept-only designs",
)
def test_criterion_01_cp_exactness(record):
    t0 = time.perf_counter()
    cost = SquaredLossCost()
    worst = 0.0
    for U, y in _ols_instances():
        n, d = U.shape
        theta = fit_ols(U, y).theta
        r = y - U @ theta
        want = 2.0 * d * float(r @ r) / n**2
        got = oic_ierm(cost, ContextualLinearRule(d), theta, y[:, None], U).correction
        worst = max(worst, abs(got - want))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 1.0
    record(1, ok, f"max |A_c - 2 d sum r^2/n^2| = {worst:.3e} (tol 1e-9), {dt:.2f} s")
    assert ok


def test_criterion_02_estimator_equivalence(record):
    t0 = time.perf_counter()
    cost = SquaredLossCost()
    worst = 0.0
    for U, y in _ols_instances():
        rule = ContextualLinearRule(U.shape[1])
        theta = fit_ols(U, y).theta
        a = oic_ierm(cost, rule, theta, y[:, None], U).correction
        inf = if_m_estimator(cost, rule, theta, y[:, None], U)
        b = oic_general(cost, rule, theta, y[:, None], inf, U).correction
        worst = max(worst, abs(a - b))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 1.0
    record(2, ok, f"max |trace - influence| = {worst:.3e} (tol 1e-10), {dt:.2f} s")
    assert ok


def test_criterion_03_poic_toy(record):
    t0 = time.perf_counter()
    n = 50
    # unit-variance location model: E_theta (theta - xi)^2 = 1, curvature 2, Psi = 1
    est = p_oic(ParametricExpectation(lambda th: 1.0), [0.0], [[2.0]], [[1.0]], n)
    exact = est.total == 1.0 + 1.0 / n
    cfg = parse_config(f"""
[dgp]
kind = quadratic
n = {n}
[models]
names = mean
[evaluators]
names = empirical
[run]
replications = 1000
seed_base = {SEED}
""", env={})
    truths = np.array([r.truth for r in _raw(run_experiment(cfg), "mean", "empirical")])
    mean, se = truths.mean(), truths.std(ddof=1) / math.sqrt(truths.size)
    z = abs(mean - (1.0 + 1.0 / n)) / se
    dt = time.perf_counter() - t0
    ok = exact and z <= 3.0 and dt < 10.0
    record(3, ok, f"A_p = {est.total!r}; MC truth {mean:.5f} +/- {se:.5f} vs 1.02 ({z:.2f} SE), {dt:.1f} s")
    assert ok


def test_criterion_04_aic_recovery(record):
    t0 = time.perf_counter()
    cost, rule = GaussianNLLCost(), identity_rule(2)
    n, reps = 2000, 200
    traces = np.empty(reps)
    for r in range(reps):
        xi = rng_stream(SEED, 4, r).normal(1.0, 2.0, size=(n, 1))
        theta = np.array([xi.mean(), xi.var()])
        traces[r] = n * oic_ierm(cost, rule, theta, xi).correction
    m = float(traces.mean())
    dt = time.perf_counter() - t0
    ok = abs(m - 2.0) <= 0.2 and dt < 30.0
    record(4, ok, f"mean Tr[I^-1 J] = {m:.4f} (target 2 +/- 10%), {dt:.1f} s")
    assert ok


def test_criterion_05_newsvendor_saa_debiasing(record):
    t0 = time.perf_counter()
    cfg = parse_config(f"""
[dgp]
kind = newsvendor_exponential
n = 50
m0 = 10
[models]
names = saa
p = 5
c = 2
[evaluators]
names = empirical, oic
[run]
replications = 1000
seed_base = {SEED}
""", env={})
    rep = run_experiment(cfg)
    emp, oic = _rows(rep, "saa", "empirical"), _rows(rep, "saa", "oic")
    bound = max(2.0 * oic.se_bias, 0.25 * abs(emp.mean_bias))
    dt = time.perf_counter() - t0
    ok = abs(oic.mean_bias) <= bound and oic.failures == 0 and dt < 60.0
    record(5, ok, f"|bias| OIC {abs(oic.mean_bias):.4f} <= {bound:.4f} "
                  f"(apparent bias {emp.mean_bias:.4f}, SE {oic.se_bias:.4f}), {dt:.1f} s")
    assert ok


def test_criterion_06_portfolio_bias_pattern(record):
    t0 = time.perf_counter()
    cfg = load_config(os.path.join(CONFIGS, "portfolio.ini"), env={})
    assert (cfg.dgp.n, cfg.dgp.dim, cfg.model_params["rho"], cfg.replications) == (100, 10, 3.0, 100)
    rep = run_experiment(cfg)
    true_saa = _rows(rep, "saa_full", "empirical").mean_bias
    true_dro = _rows(rep, "dro_full", "empirical").mean_bias

    def est_bias(label):
        # a method's estimate of the bias is its estimate minus the apparent cost
        return _rows(rep, "saa_full", label).mean_est - _rows(rep, "saa_full", "empirical").mean_est

    gap = {lab: abs(est_bias(lab) - true_saa) for lab in ("oic", "cv5", "cv2")}
    dt = time.perf_counter() - t0
    ok = (true_saa > 0 and gap["oic"] <= gap["cv5"] and gap["oic"] <= gap["cv2"]
          and true_dro <= true_saa and dt < 600.0)
    record(6, ok, f"true bias SAA {true_saa:.4f}, DRO {true_dro:.4f}; |est - true| "
                  f"OIC {gap['oic']:.4f}, 5-CV {gap['cv5']:.4f}, 2-CV {gap['cv2']:.4f}, {dt:.1f} s")
    assert ok


@pytest.mark.xfail(
    strict=True,
    reason="on the Gaussian mean toy the bootstrap removes (1 + 1/n)/2 of the bias in expectation and "
    "the jackknife exactly half, so the 0.5 ratio is out of reach for the bootstrap and a coin "
    "flip for the jackknife",
)
def test_criterion_07_bootstrap_jackknife(record):
    t0 = time.perf_counter()
    cfg = parse_config(f"""
[dgp]
kind = quadratic
n = 50
[models]
names = mean
[evaluators]
names = empirical, bootstrap, jackknife
bootstrap_b = 50
[run]
replications = 1000
seed_base = {SEED}
""", env={})
    rep = run_experiment(cfg)
    base = abs(_rows(rep, "mean", "empirical").mean_bias)
    boot = abs(_rows(rep, "mean", "bootstrap").mean_bias)
    jack = abs(_rows(rep, "mean", "jackknife").mean_bias)
    dt = time.perf_counter() - t0
    ok = boot <= 0.5 * base and jack <= 0.5 * base and dt < 60.0
    record(7, ok, f"|bias| apparent {base:.5f}, bootstrap {boot:.5f} ({boot / base:.3f}x), "
                  f"jackknife {jack:.5f} ({jack / base:.3f}x); need <= 0.5x, {dt:.1f} s")
    assert ok


def test_criterion_08_loocv_equivalence(record):
    t0 = time.perf_counter()
    meds = []
    for n in (50, 100, 200):
        cfg = parse_config(f"""
[dgp]
kind = quadratic
n = {n}
[models]
names = mean
[evaluators]
names = oic, loocv
[run]
replications = 200
seed_base = {SEED}
""", env={})
        rep = run_experiment(cfg)
        a = np.array([r.estimate for r in _raw(rep, "mean", "oic")])
        b = np.array([r.estimate for r in _raw(rep, "mean", "loocv")])
        meds.append(float(np.median(n * np.abs(a - b))))
    dt = time.perf_counter() - t0
    ok = meds[0] >= meds[1] >= meds[2] and dt < 60.0
    record(8, ok, "median n|A - A_loocv| at n=50,100,200: " + ", ".join(f"{m:.5f}" for m in meds)
           + f", {dt:.1f} s")
    assert ok


def test_criterion_09_decision_selection(record):
    t0 = time.perf_counter()
    parts, ok = [], True
    for kind in ("exponential", "normal"):
        for n in (50, 100):
            cfg = load_config(os.path.join(CONFIGS, f"newsvendor_{kind}_n{n}.ini"), env={})
            assert cfg.replications == 100 and cfg.dgp.n == n
            assert cfg.models == ("saa", "normal_eto", "exp_eto", "exp_os")
            rows = {r.criterion: r.mean_true_cost for r in decision_quality(cfg)}
            ok &= rows["oic"] <= rows["empirical"]
            ok &= all(rows["truth"] <= v for v in rows.values())
            parts.append(f"{kind[:3]}-{n}: OIC {rows['oic']:.3f} EM {rows['empirical']:.3f} "
                         f"truth {rows['truth']:.3f}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 300.0
    record(9, ok, "; ".join(parts) + f", {dt:.1f} s")
    assert ok


def _property_suites(tmp_path):
    rng = rng_stream(SEED, 10)
    out = {}

    # Moore-Penrose identities on rank-deficient symmetric matrices
    worst = 0.0
    for _ in range(30):
        d = int(rng.integers(2, 9))
        B = rng.standard_normal((d, int(rng.integers(1, d + 1))))
        A = B @ B.T
        P = pinv(A)
        errs = (A @ P @ A - A, P @ A @ P - P, A @ P - (A @ P).T, P @ A - (P @ A).T)
        scale = max(1.0, float(np.abs(A).max()), float(np.abs(P).max()))
        worst = max(worst, max(float(np.abs(e).max()) for e in errs) / scale)
    out["moore_penrose"] = worst < 1e-8

    # influence vectors sum to zero
    xi = rng.normal(size=(40, 3))
    U = rng.normal(size=(40, 4))
    y = U @ rng.normal(size=4) + rng.normal(size=40)
    theta = fit_ols(U, y).theta
    s1 = np.abs(if_moment_mean_var(xi).vectors.sum(axis=0)).max()
    s2 = np.abs(if_ols(U, y, theta).vectors.sum(axis=0)).max()
    out["influence_sum_zero"] = s1 < 1e-10 and s2 < 1e-10

    # projector idempotence and constrained -> unconstrained reduction
    cost, rule = SquaredLossCost(), identity_rule(1)
    data = rng.normal(size=(30, 1))
    th = data.mean(axis=0)
    tight = oic_constrained(cost, rule, th, data, ConstraintSet([linear_constraint([1.0], float(th[0]))]))
    loose = oic_constrained(cost, rule, th, data, ConstraintSet([linear_constraint([1.0], 1e6)]))
    plain = oic_ierm(cost, rule, th, data)
    out["projector"] = tight.diagnostics["idempotence"] < 1e-12 and loose.total == plain.total

    # smoothing a convex piecewise-linear function lifts it and converges back
    f = PiecewiseLinear.from_slopes([-1.0, 0.5], [-2.0, 0.3, 1.0], (0.0, 0.0))
    grid = np.concatenate([rng.uniform(-3, 3, 50), f.kinks])
    gaps = []
    above = True
    for m in (1.0, 10.0, 100.0):
        diff = np.asarray(smooth_value(SmoothedCost(f, "epanechnikov", m), grid)) - f(grid)
        above &= bool(diff.min() >= -1e-12)
        gaps.append(float(diff.max()))
    out["smoothing"] = above and gaps[0] > gaps[1] > gaps[2]

    # chi-square worst-case weights against a brute-force grid on n = 3
    ok = True
    for _ in range(20):
        l = rng.normal(size=3)
        eps = float(rng.uniform(0.05, 1.5))
        q = chi2_worst_case_weights(l, eps)
        feas = q.min() >= -1e-12 and abs(q.sum() - 1) < 1e-12 and 3 * q @ q - 1 <= eps + 1e-9
        g = np.linspace(0.0, 1.0, 401)
        Q1, Q2 = np.meshgrid(g, g)
        Q3 = 1.0 - Q1 - Q2
        mask = (Q3 >= 0) & (3 * (Q1**2 + Q2**2 + Q3**2) - 1 <= eps)
        best = np.max((Q1 * l[0] + Q2 * l[1] + Q3 * l[2])[mask])
        ok &= bool(feas) and q @ l >= best - 1e-9 and q @ l - best < 1e-2
    out["chi2_weights"] = ok

    # E[x^T A x] = Tr[A C] for zero-mean x with covariance C
    L = rng.normal(size=(3, 3))
    C = L @ L.T
    A = rng.normal(size=(3, 3))
    x = rng.normal(size=(400_000, 3)) @ L.T
    q = np.einsum("ni,ij,nj->n", x, A, x)
    out["quadratic_form"] = abs(q.mean() - np.trace(A @ C)) <= 4 * q.std() / math.sqrt(q.size)

    # bit-determinism across worker counts
    cfg = parse_config(f"""
[dgp]
kind = newsvendor_exponential
n = 30
[models]
names = saa, exp_eto
[evaluators]
names = empirical, oic, kcv, bootstrap
folds = 3
bootstrap_b = 10
[run]
replications = 12
seed_base = {SEED}
""", env={})
    blobs = []
    for w in (1, 3):
        rep = run_experiment(cfg, workers=w)
        write_rows(tmp_path / f"r{w}.csv", rep.rows)
        write_rows(tmp_path / f"w{w}.csv", rep.raw)
        blobs.append((tmp_path / f"r{w}.csv").read_bytes() + (tmp_path / f"w{w}.csv").read_bytes())
    out["determinism"] = blobs[0] == blobs[1]
    return out


def test_criterion_10_property_suites(record, tmp_path):
    t0 = time.perf_counter()
    res = _property_suites(tmp_path)
    dt = time.perf_counter() - t0
    ok = all(res.values()) and dt < 120.0
    record(10, ok, ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in res.items()) + f", {dt:.1f} s")
    assert ok
