"""Time the compiled and numpy kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from mopde import kernels


def inputs(n, dim, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.0, 50.0, n)
    xi = rng.standard_normal((n, dim))
    coefs = np.tile([1.0, 0.5], (n, 1))
    exps = np.column_stack([rng.uniform(1.5, 4.0, n), np.full(n, 2.0)])
    return s, xi, coefs, exps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    s, xi, coefs, exps = inputs(args.n, 2)
    cases = {
        "legendre_power_sum": lambda b: b.legendre_power_sum(s, coefs, exps),
        "radial_power_flux": lambda b: b.radial_power_flux(xi, coefs, exps),
        "radial_power_jacobian": lambda b: b.radial_power_jacobian(xi, coefs, exps, 1e-8),
    }
    backends = kernels.backends()
    print(f"n = {args.n}, best of {args.repeat}; active backend: {kernels.BACKEND}")
    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for label, fn in cases.items():
        times = {name: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
                 for name, b in backends.items()}
        row = f"{label:<24}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
