"""Compare the numba and numpy simulation backends.

Usage: python benchmarks/bench_kernels.py [--horizon T] [--replications R] [--repeat K]

Both backends consume the same pre-drawn uniforms, so the script also checks
that they produce identical price paths before timing them.
"""

import argparse
import time

import numpy as np

from dynprice._accel import HAS_NUMBA
from dynprice.config import bundled_config, load_config
from dynprice.policies import PolicySpec
from dynprice.sim import _accounting, _compile_for, simulate_block, stable_hash


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=10_000)
    ap.add_argument("--replications", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAS_NUMBA:
        raise SystemExit("numba unavailable or disabled (unset DYNPRICE_DISABLE_NUMBA to compare)")

    scenario = load_config(bundled_config("case1.cfg")).scenario
    seeds = [stable_hash(0, 0, 1, r) for r in range(args.replications)]
    steps = args.horizon * args.replications
    print(f"T={args.horizon} R={args.replications} ({steps:.2e} steps per run), best of {args.repeat}")
    print(f"{'policy':<8} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'Msteps/s (numba)':>17}")
    for kind in ("lrt", "xlrt", "elrt", "cmbp"):
        compiled = _compile_for(scenario, PolicySpec(kind), 1)
        acct = _accounting(compiled, scenario, 1)
        a = simulate_block(compiled, acct, seeds[:2], 100, "numba")  # compile outside the timing
        b = simulate_block(compiled, acct, seeds[:2], 100, "numpy")
        assert np.array_equal(a[0], b[0])
        tn = best_of(lambda: simulate_block(compiled, acct, seeds, args.horizon, "numba"), args.repeat)
        tp = best_of(lambda: simulate_block(compiled, acct, seeds, args.horizon, "numpy"), args.repeat)
        print(f"{kind:<8} {tn:>9.3f} {tp:>9.3f} {tp / tn:>7.1f}x {steps / tn / 1e6:>17.1f}")


if __name__ == "__main__":
    main()
