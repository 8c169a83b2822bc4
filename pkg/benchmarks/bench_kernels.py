"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call compiles (or loads the on-disk cache) and is reported
separately.  Results from both backends are checked for agreement.
"""

import argparse
import time

import numpy as np

from fairguard import _kernels as K
from fairguard.metrics import SR


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _close(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(np.asarray(u, float), np.asarray(v, float), atol=1e-10) for u, v in zip(a, b))


def cases():
    rng = np.random.default_rng(0)
    joint = (SR.e_mask & SR.e_prime_mask).astype(float)
    prime = SR.e_prime_mask.astype(float)

    n, p = 200_000, 4
    pos, y, z = rng.random(n), rng.integers(0, 2, n), rng.integers(1, p + 1, n)
    yield ("group_event_sums n=200k", lambda: K.group_event_sums_numpy(pos, y, z, joint, prime, p),
           (lambda: K.group_event_sums(pos, y, z, joint, prime, p)) if K.HAVE_NUMBA else None)

    lam = np.array([0.3, 0.25, 0.2])
    gam = np.array([0.5, 0.45, 0.4])
    yield ("scaling_grid_min p=3 steps=150", lambda: K.scaling_grid_min_numpy(lam, gam, 0.06, 150),
           (lambda: K.scaling_grid_min(lam, gam, 0.06, 150)) if K.HAVE_NUMBA else None)

    n_cells, n_pts = 10, 10
    cell = np.arange(n_pts)
    yy = rng.integers(0, 2, n_pts)
    zz = np.tile([1, 2], n_pts // 2)
    mass = rng.dirichlet(np.ones(n_pts), size=3)
    yield ("enumerate_metrics 2^10 classifiers", lambda: K.enumerate_metrics_numpy(n_cells, cell, yy, zz, mass, joint, prime, 2),
           (lambda: K.enumerate_metrics(n_cells, cell, yy, zz, mass, joint, prime, 2)) if K.HAVE_NUMBA else None)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {K.BACKEND}")
    print(f"{'kernel':38s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s} {'first call':>11s}  agree")
    for name, f_np, f_nb in cases():
        t_np, out_np = _time(f_np, args.repeat)
        if f_nb is None:
            print(f"{name:38s} {t_np * 1e3:9.2f}ms {'-':>10s}")
            continue
        t0 = time.perf_counter()
        f_nb()
        first = time.perf_counter() - t0
        t_nb, out_nb = _time(f_nb, args.repeat)
        print(f"{name:38s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x {first * 1e3:9.1f}ms  {_close(out_np, out_nb)}")


if __name__ == "__main__":
    main()
