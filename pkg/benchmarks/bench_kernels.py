"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--samples 5000] [--repeat 3]

Both backends run the same workloads; results are checked for equality
before timings are reported.
"""
import argparse
import time

import numpy as np

from detq import _backend
from detq.classical import ClassicalState, run_batch, simulate, simulate_discrete
from detq.ensemble import EnsembleSpec, sample_arrays
from detq.model import GridSpec, ModelSpec, snap_to_grid


def ring_model(n=3, L=10.0, points=12, seed=0):
    rng = np.random.default_rng(seed)
    flips, plus = [], []
    for k in range(points):
        i, j = (int(x) + 1 for x in rng.choice(n, 2, replace=False))
        (plus if k % 4 == 3 else flips).append((i, j, float(rng.uniform(0, L))))
    return ModelSpec(n, L, flip_points=flips, set_plus_points=plus)


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple) and isinstance(a[0], np.ndarray):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return a == b


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=5000)
    ap.add_argument("--t", type=float, default=50.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    try:
        _backend.get("cython")
    except ImportError:
        print("compiled kernels not built; only the pure-Python backend is available")
        return

    spec = ring_model()
    Q, S = sample_arrays(spec, EnsembleSpec(args.samples, seed=1))
    state = ClassicalState(0.0, (0.3, 4.1, 7.7), (1, -1, 1))
    grid = GridSpec(400, spec.domain_length)
    snapped, _ = snap_to_grid(spec, grid)
    start = ClassicalState(0.0, (grid.center(3), grid.center(150), grid.center(301)), (1, -1, 1))

    workloads = [
        (f"batch ({args.samples} samples, t={args.t})",
         lambda b: run_batch(Q, S, spec, 0.0, args.t, [(1, 5.0)], backend=b)),
        ("single trajectory (t=20000)", lambda b: simulate(state, spec, 20000.0, backend=b)),
        ("discrete stepper (200000 steps)", lambda b: simulate_discrete(start, snapped, grid, 200000, backend=b)),
    ]
    print(f"{'workload':40s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for name, fn in workloads:
        tp, rp = best_of(lambda: fn("python"), args.repeat)
        tc, rc = best_of(lambda: fn("cython"), args.repeat)
        if not same(rp, rc):
            raise SystemExit(f"backends disagree on {name}")
        print(f"{name:40s} {tp:12.4f} {tc:12.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
