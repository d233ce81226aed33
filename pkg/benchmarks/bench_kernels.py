"""Time the batch kernels under both backends and report the speedup.

Usage:
    python benchmarks/bench_kernels.py [--rows 200000] [--centers 256] [--p 8]

The numba path is JIT-compiled on first call, so each backend gets a warmup
call before timing.  Outputs are cross-checked so the comparison is honest:
a backend that returned different answers would be disqualified, not timed.
"""

import argparse
import os
import time

import numpy as np

from tripletdist._kernels import (HAS_NUMBA, assign_centers, quad_forms_by_index)


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--centers", type=int, default=256)
    ap.add_argument("--p", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    X = rng.uniform(0.0, 1.0, (args.rows, args.p))
    centers = rng.uniform(0.0, 1.0, (args.centers, args.p))
    V = rng.normal(size=(args.rows, args.p))
    A = rng.normal(size=(args.centers, args.p, args.p))
    H = A @ np.swapaxes(A, 1, 2)  # PSD stack
    idx = rng.integers(0, args.centers, args.rows)

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    if not HAS_NUMBA:
        print("numba is not importable: timing the numpy fallback only")

    results: dict[str, dict[str, float]] = {}
    outputs: dict[str, tuple] = {}
    for backend in backends:
        os.environ["TRIPLETDIST_BACKEND"] = backend
        assign_centers(X[:64], centers)          # warmup / JIT compile
        quad_forms_by_index(V[:64], H, idx[:64])
        results[backend] = {
            "assign_centers": best_of(lambda: assign_centers(X, centers),
                                      args.repeats),
            "quad_forms": best_of(lambda: quad_forms_by_index(V, H, idx),
                                  args.repeats),
        }
        outputs[backend] = (assign_centers(X, centers),
                            quad_forms_by_index(V, H, idx))
    os.environ.pop("TRIPLETDIST_BACKEND", None)

    if len(backends) == 2:
        (idx_np, d2_np), forms_np = outputs["numpy"][0], outputs["numpy"][1]
        (idx_nb, d2_nb), forms_nb = outputs["numba"][0], outputs["numba"][1]
        assert np.array_equal(idx_np, idx_nb), "backends disagree on assignments"
        assert np.allclose(d2_np, d2_nb, rtol=1e-12, atol=1e-12)
        assert np.allclose(forms_np, forms_nb, rtol=1e-10, atol=1e-12)
        print("cross-check: backends agree\n")

    header = (f"{args.rows} rows, {args.centers} centers, p={args.p}, "
              f"best of {args.repeats}")
    print(header)
    print("-" * len(header))
    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for kernel in ("assign_centers", "quad_forms"):
        row = f"{kernel:<16}"
        for b in backends:
            row += f"{results[b][kernel] * 1e3:>10.2f}ms"
        if len(backends) == 2:
            row += f"{results['numpy'][kernel] / results['numba'][kernel]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
