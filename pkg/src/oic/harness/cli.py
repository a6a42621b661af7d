"""``oic`` command line: run, decisions, dro-sweep, selftest, gen."""
from __future__ import annotations

import argparse
import os
import sys
import time

from oic.dgp import generate
from oic.errors import OICError
from oic.harness.config import load_config
from oic.harness.report import write_experiment, write_rows
from oic.harness.runner import decision_quality, dro_sweep, run_experiment
from oic.harness.selftest import format_matrix, run_selftest


def _table(rows):
    import dataclasses

    if not rows:
        return ""
    names = [f.name for f in dataclasses.fields(rows[0])]
    cells = [[f"{v:.6g}" if isinstance(v, float) else str(v) for v in dataclasses.astuple(r)] for r in rows]
    widths = [max(len(n), *(len(c[j]) for c in cells)) for j, n in enumerate(names)]
    lines = ["  ".join(n.ljust(w) for n, w in zip(names, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _cmd_run(args):
    cfg = load_config(args.config)
    out = args.out or cfg.out
    t0 = time.perf_counter()
    report = run_experiment(cfg, args.workers)
    wall = time.perf_counter() - t0
    write_experiment(out, cfg, report, wall)
    print(_table(report.rows))
    print(f"\nwrote {out}/report.csv, raw.csv, meta.json ({wall:.1f} s, config {cfg.hash[:12]})")
    return 0


def _cmd_decisions(args):
    cfg = load_config(args.config)
    rows = decision_quality(cfg, workers=args.workers)
    print(_table(rows))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_rows(os.path.join(args.out, "decisions.csv"), rows)
    return 0


def _cmd_sweep(args):
    cfg = load_config(args.config)
    try:
        rhos = [float(r) for r in args.rho.split(",") if r.strip()]
    except ValueError:
        print(f"error: cannot parse --rho {args.rho!r}", file=sys.stderr)
        return 2
    rows = dro_sweep(cfg, rhos, workers=args.workers)
    print(_table(rows))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_rows(os.path.join(args.out, "dro_sweep.csv"), rows)
    return 0


def _cmd_selftest(args):
    results = run_selftest()
    print(format_matrix(results))
    return 0 if all(r.passed for r in results) else 1


def _cmd_gen(args):
    cfg = load_config(args.config)
    data = generate(cfg.dgp, args.rep)
    data.to_csv(args.out)
    print(f"wrote {data.n} rows to {args.out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="oic", description="Debiased evaluation of data-driven decisions.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="bias/MSE table over Monte Carlo replications")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: [run] out)")
    p.add_argument("--workers", type=int, help="process count (results do not depend on it)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("decisions", help="mean true cost of the model each criterion selects")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="also write decisions.csv here")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_decisions)

    p = sub.add_parser("dro-sweep", help="estimated vs true cost of the DRO fit across radii")
    p.add_argument("--config", required=True)
    p.add_argument("--rho", default="0,1,3,10", help="comma-separated radii")
    p.add_argument("--out", help="also write dro_sweep.csv here")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("selftest", help="exact identity suites")
    p.set_defaults(func=_cmd_selftest)

    p = sub.add_parser("gen", help="write one replication's dataset as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rep", type=int, default=0, help="replication index")
    p.set_defaults(func=_cmd_gen)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except OICError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
