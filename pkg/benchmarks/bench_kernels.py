"""Compare the numba and pure-numpy paths of the hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``.  Both paths are called
directly, so the SURFSPIN_DISABLE_NUMBA flag does not matter here.
"""

import time

import numpy as np

from surfspin import kernels
from surfspin._accel import USE_NUMBA


def best_of(fn, repeat=5):
    fn()  # warm-up, includes compilation for the numba path
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    rng = np.random.default_rng(0)
    z = rng.uniform(-30, 30, 200_000) + 1j * rng.uniform(0, 30, 200_000)
    b, S = 5e-6, 7e-6
    n = 2_000_000
    cases = [
        ("faddeeva 2e5 points",
         lambda: kernels.faddeeva_numpy(z), lambda: kernels.faddeeva_numba(z)),
        ("strip sum 2e6 points",
         lambda: kernels.strip_inverse_product_sum_numpy(S + 1e-7, 300 * S, n, b, S),
         lambda: kernels.strip_inverse_product_sum_numba(S + 1e-7, 300 * S, n, b, S)),
    ]
    print(f"numba active by default: {USE_NUMBA}")
    print(f"{'kernel':24s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speed-up':>9s}")
    for name, f_np, f_nb in cases:
        a, b_ = f_np(), f_nb()
        assert np.allclose(a, b_, rtol=1e-10, atol=0), name
        t_np, t_nb = best_of(f_np), best_of(f_nb)
        print(f"{name:24s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:9.1f}")


if __name__ == "__main__":
    main()
