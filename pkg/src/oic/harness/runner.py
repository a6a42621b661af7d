"""Monte Carlo replication loop, aggregation, decision selection and DRO sweeps.

Each replication owns the random streams keyed by ``(seed_base, rep)``; rows
are sorted by replication before any reduction and means use ``math.fsum``,
so results do not depend on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from oic.baselines import bootstrap_debias, jackknife_debias, kfold_cv, loocv
from oic.dgp import generate, portfolio_instance, true_cost
from oic.errors import ConfigError, InputError, OICError
from oic.estimators import apparent_cost, oic_dro
from oic.fitters import fit_dro_chi2, portfolio_rule
from oic.harness.experiments import _portfolio_center, fit_model
from oic.problems import PortfolioCost

FAILURES = (OICError, ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class RawRow:
    rep: int
    model: str
    evaluator: str
    estimate: float
    truth: float
    apparent: float
    status: str


def _evaluate(label, fitted, data, cfg, rep):
    cost, rule, theta, refit = fitted.cost, fitted.rule, fitted.theta, fitted.refit
    if label == "empirical":
        return apparent_cost(cost, rule, theta, data)
    if label == "oic":
        return fitted.oic().total
    if label == "poic":
        if fitted.poic is None:
            raise InputError(f"no parametric model behind {fitted.name}")
        return fitted.poic().total
    if label.startswith("cv"):
        k = int(label[2:])
        return kfold_cv(refit, cost, rule, data, k, cfg.seed_base, keys=(rep, k))
    if label == "loocv":
        return loocv(refit, cost, rule, data)
    if label == "bootstrap":
        return bootstrap_debias(refit, cost, rule, data, cfg.bootstrap_b, cfg.seed_base, keys=(rep,), theta=theta)
    if label == "jackknife":
        return jackknife_debias(refit, cost, rule, data, theta=theta)
    raise InputError(f"unknown evaluator {label}")


def replicate(cfg, rep):
    """All (model, evaluator) rows for one replication."""
    data = generate(cfg.dgp, rep)
    rows = []
    labels = cfg.evaluator_labels()
    for name in cfg.models:
        try:
            fitted = fit_model(name, data, cfg.dgp, cfg.model_params)
            app = apparent_cost(fitted.cost, fitted.rule, fitted.theta, data)
        except FAILURES as exc:
            msg = f"fit: {type(exc).__name__}"
            rows += [RawRow(rep, name, lab, math.nan, math.nan, math.nan, msg) for lab in labels]
            continue
        for lab in labels:
            try:
                est = float(_evaluate(lab, fitted, data, cfg, rep))
                status = "ok" if math.isfinite(est) else "nonfinite"
            except FAILURES as exc:
                est, status = math.nan, f"{type(exc).__name__}"
            rows.append(RawRow(rep, name, lab, est, fitted.truth, app, status))
    return rows


def _replicate_star(args):
    return replicate(*args)


def run_replications(cfg, workers=None):
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, r) for r in range(cfg.replications)]
    if workers <= 1:
        chunks = [replicate(cfg, r) for r in range(cfg.replications)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_replicate_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: r.rep)
    return rows


def _mean(vals):
    return math.fsum(vals) / len(vals) if vals else math.nan


def _se(vals):
    k = len(vals)
    if k < 2:
        return math.nan
    m = _mean(vals)
    return math.sqrt(math.fsum((v - m) ** 2 for v in vals) / (k - 1)) / math.sqrt(k)


@dataclass(frozen=True)
class ReportRow:
    model: str
    evaluator: str
    mean_bias: float
    se_bias: float
    mean_mse: float
    mean_est: float
    mean_true: float
    failures: int


def aggregate(cfg, rows):
    """One report row per (model, evaluator); bias is ``truth - estimate``."""
    out = []
    for name in cfg.models:
        for lab in cfg.evaluator_labels():
            sel = [r for r in rows if r.model == name and r.evaluator == lab and r.status == "ok"]
            bias = [r.truth - r.estimate for r in sel]
            out.append(ReportRow(
                name, lab, _mean(bias), _se(bias),
                _mean([b * b for b in bias]),
                _mean([r.estimate for r in sel]),
                _mean([r.truth for r in sel]),
                cfg.replications - len(sel),
            ))
    return out


@dataclass(frozen=True)
class ExperimentReport:
    rows: list
    raw: list
    config_hash: str
    seed: int


def run_experiment(cfg, workers=None):
    raw = run_replications(cfg, workers)
    return ExperimentReport(aggregate(cfg, raw), raw, cfg.hash, cfg.seed_base)


# -- decision selection ------------------------------------------------------------


@dataclass(frozen=True)
class SelectionRow:
    criterion: str
    mean_true_cost: float
    se: float
    failures: int
    selected: str


def decision_quality(cfg, raw=None, workers=None):
    """Mean true cost of the model each criterion would pick (``truth`` is the oracle)."""
    raw = run_replications(cfg, workers) if raw is None else raw
    by_rep = {}
    for r in raw:
        by_rep.setdefault(r.rep, []).append(r)
    out = []
    for crit in ["truth"] + cfg.evaluator_labels():
        picked, counts, fails = [], {m: 0 for m in cfg.models}, 0
        for rep in range(cfg.replications):
            rows = by_rep.get(rep, [])
            if crit == "truth":
                cand = {}
                for r in rows:
                    if math.isfinite(r.truth):
                        cand.setdefault(r.model, r.truth)
                cand = [(cand[m], m, cand[m]) for m in cfg.models if m in cand]
            else:
                ok = {r.model: r for r in rows if r.evaluator == crit and r.status == "ok"}
                cand = [(ok[m].estimate, m, ok[m].truth) for m in cfg.models if m in ok]
            if not cand:
                fails += 1
                continue
            # min() keeps the first model listed on ties
            score, model, truth = min(cand, key=lambda t: t[0])
            picked.append(truth)
            counts[model] += 1
        sel = ";".join(f"{m}:{counts[m]}" for m in cfg.models)
        out.append(SelectionRow(crit, _mean(picked), _se(picked), fails, sel))
    return out


# -- DRO sweep -----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    rho: float
    mean_est: float
    mean_true: float
    mean_apparent: float
    mean_worst: float
    sign_agreement: float
    curve_agrees: str
    failures: int


def _sweep_class(cfg):
    for m in cfg.models:
        if m.startswith(("dro_", "saa_")):
            return m.split("_")[1]
    return "full"


def _sweep_rep(cfg, rep, rhos, cls):
    prm = cfg.model_params
    data = generate(cfg.dgp, rep)
    xi = data.xi
    inst = portfolio_instance(cfg.dgp.dim, cfg.dgp.seed)
    center = _portfolio_center(prm, xi, inst)
    cost = PortfolioCost(center, prm["lam1"], prm["lam2"])
    rule = portfolio_rule(cls, cfg.dgp.dim)
    out = []
    for rho in rhos:
        try:
            fit = fit_dro_chi2(cls, xi, prm["lam1"], prm["lam2"], center, rho)
            est = oic_dro(cost, rule, fit.theta, xi, singular=prm["singular"])
            truth = true_cost(cfg.dgp, rule.value(fit.theta), center=center,
                              lam1=prm["lam1"], lam2=prm["lam2"], instance=inst)
            worst = fit.diagnostics.get("worst_value", est.apparent)
            out.append((rho, est.total, truth, est.apparent, worst))
        except FAILURES:
            out.append((rho, math.nan, math.nan, math.nan, math.nan))
    return out


def _sweep_star(args):
    return _sweep_rep(*args)


def dro_sweep(cfg, rhos, workers=None):
    """Estimated and true cost of the chi-square DRO fit across radii ``rho``.

    ``sign_agreement`` is the fraction of replications where the estimate moves
    in the same direction as the true cost relative to ``rho = 0``;
    ``curve_agrees`` compares the directions of the replication means.
    """
    if cfg.dgp.kind != "portfolio":
        raise ConfigError("dro-sweep needs a portfolio config")
    rhos = [float(r) for r in rhos]
    if any(r < 0 for r in rhos):
        raise ConfigError("rho values must be non-negative")
    grid = sorted(set([0.0] + rhos))
    cls = _sweep_class(cfg)
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, r, grid, cls) for r in range(cfg.replications)]
    if workers <= 1:
        per_rep = [_sweep_rep(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_sweep_star, jobs))
    rows = []
    base = [rep[0] for rep in per_rep]
    for j, rho in enumerate(grid):
        if rho not in rhos:
            continue
        cells = [rep[j] for rep in per_rep]
        ok = [(c, b) for c, b in zip(cells, base) if math.isfinite(c[1]) and math.isfinite(b[1])]
        est = [c[1] for c, _ in ok]
        tru = [c[2] for c, _ in ok]
        if rho == 0.0:
            agree, curve = math.nan, ""
        else:
            hits = [np.sign(c[1] - b[1]) == np.sign(c[2] - b[2]) for c, b in ok]
            agree = _mean([float(h) for h in hits])
            d_est = _mean(est) - _mean([b[1] for _, b in ok])
            d_tru = _mean(tru) - _mean([b[2] for _, b in ok])
            curve = "yes" if np.sign(d_est) == np.sign(d_tru) else "no"
        rows.append(SweepRow(rho, _mean(est), _mean(tru), _mean([c[3] for c, _ in ok]),
                             _mean([c[4] for c, _ in ok]), agree, curve, len(cells) - len(ok)))
    return rows
