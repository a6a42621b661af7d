"""Time each hot kernel in its numba and numpy flavours.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Both flavours are imported from ``oic._kernels`` regardless of
``OIC_DISABLE_NUMBA``; the first numba call (compilation or cache load) is
excluded from the timings.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from oic._accel import HAVE_NUMBA
from oic._kernels import KERNELS


def _cases(rng):
    B = rng.standard_normal((12, 12))
    sym = B @ B.T
    samples = rng.exponential(10.0, size=1000)
    points = np.linspace(0.0, 40.0, 200)
    losses = rng.normal(size=2000)
    return {
        "jacobi_eigh": (sym, 1e-12, 100),
        "kde_eval": (samples, points, 1.5),
        "chi2_shift": (losses, 0.05, float(losses.min()), float(losses.max()), 200),
    }


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    cases = _cases(np.random.default_rng(args.seed))
    print(f"numba available: {HAVE_NUMBA}")
    print(f"{'kernel':<12} {'numba (us)':>12} {'numpy (us)':>12} {'speedup':>8}  max |diff|")
    for name, (fast, slow) in KERNELS.items():
        call = cases[name]
        ref = slow(*call)
        out = fast(*call)  # warm-up / compile
        if name == "jacobi_eigh":  # compare eigenvalues; vectors may differ in sign
            out, ref = np.sort(out[0]), np.sort(ref[0])
        diff = float(np.max(np.abs(np.asarray(out) - np.asarray(ref))))
        t_fast = _best(fast, call, args.repeat)
        t_slow = _best(slow, call, args.repeat)
        print(f"{name:<12} {t_fast * 1e6:12.1f} {t_slow * 1e6:12.1f} {t_slow / t_fast:8.1f}x  {diff:.2e}")


if __name__ == "__main__":
    main()
