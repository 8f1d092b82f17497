"""Compare the native (Cython) kernel backend against the pure NumPy
fallback on the operations that dominate engine runtime.

Usage: python benchmarks/backend_benchmark.py [--sizes 1000,10000,100000]

The two backends implement the same series/bisection algorithm, so results
agree to the quantile tolerance; this script reports wall time and the max
deviation between them.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dspace import _kernels
from dspace.canned import sixfactor_problem
from dspace.grid import GridSpec, evaluate_grid
from dspace.normalize import normalize_problem


def time_it(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,10000,100000",
                        help="comma-separated batch sizes for the width kernel")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    try:
        native = _kernels.get_backend("native")
    except ImportError:
        print("native backend not built; run pip install -e . first")
        return
    pure = _kernels.get_backend("pure")

    rng = np.random.default_rng(0)
    print(f"{'operation':<38} {'native':>10} {'pure':>10} {'speedup':>9} {'max |diff|':>12}")
    for n in sizes:
        se2 = rng.uniform(0.005, 4.0, size=n)
        t_nat = time_it(lambda: native.ti_halfwidths(se2, 1.0, 19.0, 0.05, 0.99))
        t_pure = time_it(lambda: pure.ti_halfwidths(se2, 1.0, 19.0, 0.05, 0.99))
        diff = float(np.max(np.abs(
            native.ti_halfwidths(se2, 1.0, 19.0, 0.05, 0.99)
            - pure.ti_halfwidths(se2, 1.0, 19.0, 0.05, 0.99))))
        print(f"{'ti_halfwidths n=%d' % n:<38} {t_nat:>9.4f}s {t_pure:>9.4f}s "
              f"{t_pure / t_nat:>8.1f}x {diff:>12.2e}")

    ncp = rng.uniform(0.0, 20.0, size=5000)
    t_nat = time_it(lambda: native.ncx2_ppf(0.99, 1.0, ncp))
    t_pure = time_it(lambda: pure.ncx2_ppf(0.99, 1.0, ncp))
    diff = float(np.max(np.abs(native.ncx2_ppf(0.99, 1.0, ncp)
                               - pure.ncx2_ppf(0.99, 1.0, ncp))))
    print(f"{'ncx2_ppf n=5000':<38} {t_nat:>9.4f}s {t_pure:>9.4f}s "
          f"{t_pure / t_nat:>8.1f}x {diff:>12.2e}")

    # end-to-end: grid feasibility evaluation is the heaviest exact-TI user;
    # swap the module-level kernel functions that tolerance.py resolves
    # dynamically (DSPACE_PURE=1 is the supported way outside benchmarks)
    nprob = normalize_problem(sixfactor_problem())
    import dspace._kernels as kmod

    def run_grid(backend):
        saved = (kmod.ncx2_ppf, kmod.chi2_ppf, kmod.ti_halfwidths)
        kmod.ncx2_ppf = backend.ncx2_ppf
        kmod.chi2_ppf = backend.chi2_ppf
        kmod.ti_halfwidths = backend.ti_halfwidths
        try:
            return evaluate_grid(nprob, GridSpec(5))
        finally:
            kmod.ncx2_ppf, kmod.chi2_ppf, kmod.ti_halfwidths = saved

    t_nat = time_it(lambda: run_grid(native), repeats=1)
    t_pure = time_it(lambda: run_grid(pure), repeats=1)
    print(f"{'grid eval 5^6 (six-factor model)':<38} {t_nat:>9.4f}s "
          f"{t_pure:>9.4f}s {t_pure / t_nat:>8.1f}x {'':>12}")


if __name__ == "__main__":
    main()
