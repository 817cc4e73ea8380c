"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from hetclose import _kernels_py

try:
    from hetclose import _kernels
except ImportError:  # extension not built
    _kernels = None


def cases(gen):
    k = 64
    hs = [gen.integers(0, 40, size=(2000, k)) for _ in range(4)]
    small = [gen.integers(0, 6, size=10) for _ in range(4)]
    syms = gen.integers(0, 1024, size=(4096, 256))
    cols = np.broadcast_to(np.arange(256), syms.shape)
    x, y = gen.poisson(30, size=(2000, k)), gen.poisson(80, size=(2000, k))
    return {
        "hadamard_bits 4096x256": lambda m: m.hadamard_bits(syms, cols),
        "central_z 2000x64": lambda m: m.central_z(*hs),
        "uneven_stat 2000x64": lambda m: m.uneven_stat(x, y, 30.0, 80.0),
        "max_sensitivity k=10": lambda m: m.max_sensitivity(*small),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    gen = np.random.default_rng(0)
    print(f"{'kernel':28s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(gen).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:28s} {t_py:10.3f} {'n/a':>10s}")
            continue
        assert np.allclose(fn(_kernels_py), fn(_kernels), rtol=1e-12)
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:28s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:8.1f}x")


if __name__ == "__main__":
    main()
