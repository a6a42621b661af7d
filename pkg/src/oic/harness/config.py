"""Experiment configuration: an INI file with sections dgp, models, evaluators, run.

Every key is listed in ``SCHEMA``; anything else is rejected.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field

from oic.dgp import DEFAULTS, KINDS, DgpSpec
from oic.errors import ConfigError, OICError

EVALUATORS = ("empirical", "oic", "poic", "kcv", "loocv", "bootstrap", "jackknife")

# section -> key -> (parser, default)
SCHEMA = {
    "dgp": {
        "kind": (str, None),
        "n": (int, None),
        "dim": (int, 1),
        "mu0": (float, None),
        "sigma0": (float, None),
        "m0": (float, None),
        "noise": (float, None),
        "coef": (float, None),
    },
    "models": {
        "names": (str, None),
        "p": (float, 5.0),
        "c": (float, 2.0),
        "lam1": (float, 1.0),
        "lam2": (float, 1.0),
        "centering": (str, "sample"),
        "rho": (float, 3.0),
        "ridge": (float, 0.0),
        "singular": (str, "raise"),
    },
    "evaluators": {
        "names": (str, "empirical, oic"),
        "folds": (str, "2, 5"),
        "bootstrap_b": (int, 50),
    },
    "run": {
        "replications": (int, 100),
        "seed_base": (int, 0),
        "workers": (int, 1),
        "out": (str, "results"),
    },
}

CENTERINGS = ("sample", "true", "zero")


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    dgp: DgpSpec
    models: tuple
    model_params: dict
    evaluators: tuple
    folds: tuple
    bootstrap_b: int
    replications: int
    seed_base: int
    workers: int = 1
    out: str = "results"
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def hash(self):
        """SHA-256 of the settings that affect results (worker count and paths excluded)."""
        keep = {s: {k: v for k, v in kv.items() if not (s == "run" and k in ("workers", "out"))}
                for s, kv in self.raw.items()}
        keep["run"]["seed_base"] = self.seed_base
        blob = json.dumps(keep, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def evaluator_labels(self):
        labels = []
        for e in self.evaluators:
            if e == "kcv":
                labels += [f"cv{k}" for k in self.folds]
            else:
                labels.append(e)
        return labels


def parse_config(text, env=None):
    """Parse and validate config text; ``OIC_SEED`` in ``env`` overrides ``run.seed_base``."""
    env = os.environ if env is None else env
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    extra = set(cp.sections()) - set(SCHEMA)
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    raw = {}
    for section, keys in SCHEMA.items():
        got = dict(cp[section]) if cp.has_section(section) else {}
        unknown = set(got) - set(keys)
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        vals = {}
        for key, (typ, default) in keys.items():
            if key in got:
                try:
                    vals[key] = typ(got[key])
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from exc
            elif default is not None:
                vals[key] = default
        raw[section] = vals

    d = raw["dgp"]
    for key in ("kind", "n"):
        if key not in d:
            raise ConfigError(f"[dgp] {key} is required")
    if d["kind"] not in KINDS:
        raise ConfigError(f"[dgp] kind must be one of {KINDS}")
    params = {k: v for k, v in d.items() if k not in ("kind", "n", "dim")}
    bad = set(params) - set(DEFAULTS[d["kind"]])
    if bad:
        raise ConfigError(f"[dgp] keys {sorted(bad)} do not apply to kind {d['kind']}")

    seed = raw["run"]["seed_base"]
    if env.get("OIC_SEED"):
        try:
            seed = int(env["OIC_SEED"])
        except ValueError as exc:
            raise ConfigError("OIC_SEED must be an integer") from exc
    try:
        spec = DgpSpec(d["kind"], d["n"], d.get("dim", 1), params, seed)
    except OICError as exc:
        raise ConfigError(f"[dgp] {exc}") from exc

    m = raw["models"]
    if "names" not in m:
        raise ConfigError("[models] names is required")
    models = tuple(_split(m["names"]))
    from oic.harness.experiments import check_model_names

    check_model_names(spec.kind, models)
    if m["centering"] not in CENTERINGS:
        raise ConfigError(f"[models] centering must be one of {CENTERINGS}")
    if m["singular"] not in ("raise", "pinv"):
        raise ConfigError("[models] singular must be 'raise' or 'pinv'")
    if not m["p"] > m["c"] > 0:
        raise ConfigError("[models] need p > c > 0")
    if m["rho"] < 0:
        raise ConfigError("[models] rho must be non-negative")

    e = raw["evaluators"]
    evaluators = tuple(_split(e["names"]))
    unknown = set(evaluators) - set(EVALUATORS)
    if unknown:
        raise ConfigError(f"[evaluators] unknown names {sorted(unknown)}; choose from {EVALUATORS}")
    try:
        folds = tuple(int(k) for k in _split(e["folds"]))
    except ValueError as exc:
        raise ConfigError(f"[evaluators] folds: {exc}") from exc
    if "kcv" in evaluators and (not folds or min(folds) < 2 or max(folds) > spec.n):
        raise ConfigError(f"[evaluators] folds must lie in [2, n={spec.n}]")
    if e["bootstrap_b"] < 1:
        raise ConfigError("[evaluators] bootstrap_b must be positive")

    r = raw["run"]
    if r["replications"] < 1:
        raise ConfigError("[run] replications must be positive")
    if r["workers"] < 1:
        raise ConfigError("[run] workers must be positive")
    params = {k: m[k] for k in ("p", "c", "lam1", "lam2", "centering", "rho", "ridge", "singular")}
    return ExperimentConfig(spec, models, params, evaluators, folds, e["bootstrap_b"],
                            r["replications"], seed, r["workers"], r["out"], raw)


def load_config(path, env=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, env)
