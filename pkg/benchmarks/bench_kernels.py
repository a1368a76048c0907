"""Compare the numba and numpy kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row times one kernel under both backends (the numba column excludes
compilation; every kernel is called once before timing).
"""

import argparse
import os
import time

import numpy as np

from mwcomplete import _kernels
from mwcomplete.experiments import ExperimentPlan, derive_seed, generate_instance
from mwcomplete.linalg import svd
from mwcomplete.sampling import apply_r_omega, draw_mask
from mwcomplete.solver import SolveOptions, solve_standard


def _best_of(fn, repeat):
    fn()  # warm-up (compiles on the numba path)
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _cases():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((20, 20))
    x = np.linspace(-50, 50, 100_000)
    plan = ExperimentPlan(preset="fig2", trials=1)
    truth, _ = generate_instance(plan, derive_seed(0, 1, 0))
    mask = draw_mask(20, 0.6, 7)
    y = apply_r_omega(truth, mask)
    opts = SolveOptions(max_iters=3000)
    return {
        "jacobi svd 20x20": lambda: svd(a),
        "bessel j0 (1e5 pts)": lambda: _kernels.j0(x),
        "counter rng (1e5)": lambda: _kernels.counter_uniform(123, 100_000),
        "admm solve n=20 p=0.6": lambda: solve_standard(y, mask, opts),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rows = {}
    for backend, flag in (("numba", "0"), ("numpy", "1")):
        os.environ["MWCOMPLETE_DISABLE_NUMBA"] = flag
        for name, fn in _cases().items():
            rows.setdefault(name, {})[backend] = _best_of(fn, args.repeat)
    os.environ.pop("MWCOMPLETE_DISABLE_NUMBA")
    print(f"{'kernel':<24}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for name, t in rows.items():
        print(f"{name:<24}{1e3 * t['numba']:>12.3f}{1e3 * t['numpy']:>12.3f}{t['numpy'] / t['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
