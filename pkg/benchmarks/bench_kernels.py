"""Times the hot kernels in both lanes and checks they agree bitwise.

Usage:
    python benchmarks/bench_kernels.py [--scenarios N] [--steps N] [--nodes N]

The jit lane is only timed when numba is importable and BONDINT_NUMBA
is not 0; the numpy reference always runs.
"""

import argparse
import time

import numpy as np

from bondint import _kernels as K


def best_of(fn, args, repeat=5):
    fn(*args)  # warm-up, includes jit compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenarios", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=128)
    ap.add_argument("--nodes", type=int, default=50)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    d_values = 0.01 * rng.standard_normal((args.scenarios, args.steps))
    contrib = 0.01 * rng.standard_normal((args.scenarios, args.steps))
    times = np.linspace(0.0, 1.0, args.steps + 1)
    idx = np.arange(1.0, args.nodes + 1.0)
    jump_times = rng.exponential(idx**2, size=(args.scenarios, args.nodes))
    inv_sq = idx**-2.0

    cases = [
        ("running_sign_weights", K.running_sign_weights, K.running_sign_weights_numpy, (d_values,)),
        ("capped_sup_stat", K.capped_sup_stat, K.capped_sup_stat_numpy, (contrib,)),
        ("jump_node_values", K.jump_node_values, K.jump_node_values_numpy, (times, jump_times, inv_sq)),
    ]

    print(f"scenarios={args.scenarios} steps={args.steps} nodes={args.nodes}")
    print(f"numba lane active: {K.USE_NUMBA}")
    print(f"{'kernel':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}  bitwise")
    for name, fast, ref, call_args in cases:
        t_ref = best_of(ref, call_args)
        if K.USE_NUMBA:
            t_fast = best_of(fast, call_args)
            same = np.array_equal(fast(*call_args), ref(*call_args))
            print(
                f"{name:<24}{1e3 * t_ref:>12.2f}{1e3 * t_fast:>12.2f}"
                f"{t_ref / t_fast:>9.2f}  {'yes' if same else 'NO'}"
            )
        else:
            print(f"{name:<24}{1e3 * t_ref:>12.2f}{'-':>12}{'-':>9}  -")


if __name__ == "__main__":
    main()
