"""Monodromy batch timing: numba kernels versus the pure-numpy path.

Usage: python3 benchmarks/bench_monodromy.py [--points 64] [--repeat 3]

Both backends integrate the same λ batch; the script reports the best wall
time of each and the largest relative difference between the two M(λ).
"""

import argparse
import time

import numpy as np

from floquet4 import _jit, _kernels
from floquet4.coeffs import CoefficientSet


def run(lams, c, use_numba, compound, rtol):
    return _kernels.integrate_many(lams, c.arrays(), derivative=False, compound=compound,
                                   rtol=rtol, h_max=min(0.0625, 0.25 / c.kmax), use_numba=use_numba)


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rtol", type=float, default=1e-12)
    ap.add_argument("--compound", action="store_true", help="also co-integrate the second compound")
    args = ap.parse_args()

    c = CoefficientSet(p_cos=[1.0, 0.5], q_const=0.3, q_sin=[0.2])
    s = np.linspace(-9.0, 9.0, args.points)
    lams = np.sign(s) * s ** 4 + 0j

    t_np, (y_np, _, steps, _) = best_time(lambda: run(lams, c, False, args.compound, args.rtol), args.repeat)
    print(f"numpy : {t_np:8.3f} s  ({args.points} points, {int(np.sum(steps))} steps)")
    if not _jit.HAVE_NUMBA:
        print("numba : unavailable (FLOQUET4_NO_NUMBA set or numba missing)")
        return
    t0 = time.perf_counter()
    run(lams[:1], c, True, args.compound, args.rtol)
    print(f"numba : first call incl. compilation {time.perf_counter() - t0:.2f} s")
    t_nb, (y_nb, _, _, _) = best_time(lambda: run(lams, c, True, args.compound, args.rtol), args.repeat)
    print(f"numba : {t_nb:8.3f} s")
    M_np, M_nb = y_np[:, :4, :4], y_nb[:, :4, :4]
    diff = np.max(np.abs(M_np - M_nb).max(axis=(1, 2)) / np.abs(M_np).max(axis=(1, 2)))
    print(f"speedup {t_np / t_nb:.1f}x, max relative difference in M {diff:.2e}")


if __name__ == "__main__":
    main()
