"""Numba versus pure-numpy timing of the two hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3]

The field advance is timed through a full absorption run, the two-level
propagator through a Landau-Zener sweep. Results are also checked for
agreement between the backends.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from qrouter import _accel
from qrouter.core import params_for_depth
from qrouter.hardware import subspace_params, two_level_sweep
from qrouter.pulses import ControlSpec, SignalSpec
from qrouter.solver import run_absorption


def _best_of(fn, repeat):
    out, best = None, np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench_absorption(use_numba, repeat):
    p = params_for_depth(6.0)
    sig = SignalSpec()
    ctrl = ControlSpec(13.8, 64.6, 1.54, 0.0747, -0.0108)
    return _best_of(lambda: run_absorption(p, sig, ctrl, samples=10, use_numba=use_numba).eta_abs, repeat)


def bench_sweep(use_numba, repeat):
    tp = subspace_params("H1", 5000.0, 250.0, 1e-7)
    return _best_of(lambda: two_level_sweep(tp, use_numba=use_numba).survival, repeat)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba unavailable (or disabled); only the numpy path can be timed")
    cases = [("field advance (absorption run)", bench_absorption), ("two-level sweep", bench_sweep)]
    print(f"{'kernel':34s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'|diff|':>9s}")
    for name, fn in cases:
        t_np, v_np = fn(False, args.repeat)
        if _accel.HAVE_NUMBA:
            fn(True, 1)  # compile outside the timing
            t_nb, v_nb = fn(True, args.repeat)
            print(f"{name:34s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:8.1f} {abs(v_np - v_nb):9.1e}")
        else:
            print(f"{name:34s} {t_np:10.3f} {'-':>10s} {'-':>8s} {'-':>9s}")


if __name__ == "__main__":
    main()
