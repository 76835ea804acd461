"""Compare the numba and numpy kernel paths on the shapes the lab actually
runs: classifier convolutions (100 filters x widths 3/5/7, E=4) and the
Q-network convolution (10 filters x width 3), across sequence lengths.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from nopnet import kernels


def bench(fn, *args, reps=200):
    fn(*args)  # warm (JIT compile on the numba path)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps * 1e3


def main():
    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.BACKEND} "
          f"(numba importable: {kernels._HAS_NUMBA})")
    header = f"{'shape':>28} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    cases = []
    for n in (100, 450, 2000):
        for f, h in ((100, 3), (100, 5), (100, 7), (10, 3)):
            cases.append((n, f, h, 4))
    for n, f, h, e in cases:
        x = rng.normal(size=(n, e))
        w = rng.normal(size=(f, h, e))
        up = rng.normal(size=(n, f))
        t_np = bench(kernels._conv1d_forward_np, x, w)
        t_np += bench(kernels._conv1d_backward_np, x, w, up)
        if kernels._HAS_NUMBA:
            t_nb = bench(kernels._conv1d_forward_nb, x, w)
            t_nb += bench(kernels._conv1d_backward_nb, x, w, up)
            ratio = f"{t_np / t_nb:7.2f}x"
        else:
            t_nb, ratio = float("nan"), "    n/a"
        print(f"{f'N={n} F={f} h={h} E={e}':>28} {t_np:10.3f} {t_nb:10.3f} {ratio:>8}")

    print()
    for n in (450, 2000):
        x = rng.normal(size=(n, 100))
        t_np = bench(kernels._max_pool_np, x)
        if kernels._HAS_NUMBA:
            t_nb = bench(kernels._max_pool_nb, x)
            ratio = f"{t_np / t_nb:7.2f}x"
        else:
            t_nb, ratio = float("nan"), "    n/a"
        print(f"{f'maxpool N={n} F=100':>28} {t_np:10.3f} {t_nb:10.3f} {ratio:>8}")


if __name__ == "__main__":
    main()
