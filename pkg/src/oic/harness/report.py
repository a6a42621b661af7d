"""CSV and JSON writers for experiment outputs."""
from __future__ import annotations

import csv
import dataclasses
import json
import os
import platform


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def write_rows(path, rows):
    """Write dataclass rows to CSV with full double precision."""
    if not rows:
        raise ValueError("nothing to write")
    fields = [f.name for f in dataclasses.fields(rows[0])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for row in rows:
            w.writerow([_fmt(getattr(row, f)) for f in fields])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def versions():
    import numba
    import numpy
    import scipy

    import oic

    return {
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "oic": oic.__version__,
        "numba_enabled": oic.USE_NUMBA,
    }


def write_experiment(out_dir, cfg, report, wall_time):
    os.makedirs(out_dir, exist_ok=True)
    write_rows(os.path.join(out_dir, "report.csv"), report.rows)
    write_rows(os.path.join(out_dir, "raw.csv"), report.raw)
    meta = {
        "config_hash": report.config_hash,
        "seed": report.seed,
        "replications": cfg.replications,
        "models": list(cfg.models),
        "evaluators": cfg.evaluator_labels(),
        "versions": versions(),
        "wall_time_s": wall_time,
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
