"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs each hot kernel on identical inputs through both implementations
and prints per-call times plus the speedup. The two backends draw the
same counter-stream randomness, so the timed work is identical apart
from the implementation language.

Usage: python benchmarks/bench_backends.py [--repeat R] [--quick]
"""

import argparse
import sys
import time

import numpy as np

from dpre import env, rng, walk
from dpre.backends import pykernels

try:
    from dpre.backends import _ckernels
except ImportError:
    _ckernels = None


def timed(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_case(name, py_fn, ck_fn, args, repeat):
    t_py, _ = timed(py_fn, args, repeat)
    t_ck, _ = timed(ck_fn, args, repeat)
    print(f"{name:<34} {t_py * 1e3:10.2f} {t_ck * 1e3:10.2f} "
          f"{t_py / t_ck:8.1f}x")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3,
                        help="timing repetitions, best-of (default: 3)")
    parser.add_argument("--quick", action="store_true",
                        help="smaller sizes for a fast smoke run")
    args = parser.parse_args(argv)

    if _ckernels is None:
        print("compiled backend is not built; nothing to compare",
              file=sys.stderr)
        return 1

    gauss = env.gaussian_unit()
    n_t = 32 if args.quick else 128
    n_c = 16 if args.quick else 64
    n_r = 512 if args.quick else 4096

    path = walk.sample_path(2, n_t, seed=rng.task_seed(1, 0))
    tab_w = pykernels.make_tables(gauss, 0.8, pykernels.MODE_WEIGHT,
                                  seed=5, tilt=(path, 0.8), t0=0, n=n_t)
    path_c = walk.sample_path(2, n_c, seed=rng.task_seed(1, 1))
    tab_e = pykernels.make_tables(gauss, 0.3, pykernels.MODE_EPS,
                                  seed=6, tilt=(path_c, 0.3), t0=0, n=n_c)
    tab_b = pykernels.make_tables(gauss, 0.3, pykernels.MODE_WEIGHT,
                                  seed=6, tilt=(path_c, 0.3), t0=0, n=n_c)
    tab_eta = pykernels.make_tables(gauss, 0.8, pykernels.MODE_ETA,
                                    seed=7, t0=0, n=16)
    gen = np.random.default_rng(0)
    first = gen.random(n_r + 1)
    ret = gen.random(n_r + 1)
    box = ((-4, 4), (-4, 4))

    print(f"{'kernel':<34} {'numpy ms':>10} {'cython ms':>10} {'speedup':>9}")
    bench_case(f"transfer_logw 2d n={n_t}",
               pykernels.transfer_logw, _ckernels.transfer_logw,
               (tab_w, n_t, 2, (0, 0), 0, None, None), args.repeat)
    bench_case(f"chaos_orders q=2 N={n_c}",
               pykernels.chaos_orders, _ckernels.chaos_orders,
               (tab_e, 2, n_c, box, 0, None), args.repeat)
    bench_case(f"backward_product N={n_c}",
               pykernels.backward_product, _ckernels.backward_product,
               (tab_b, n_c, box, 0, None), args.repeat)
    bench_case(f"renewal_sum N={n_r}",
               pykernels.renewal_sum, _ckernels.renewal_sum,
               (0.11, first, ret), args.repeat)
    bench_case("eta_block 16 steps 33x33",
               pykernels.eta_block, _ckernels.eta_block,
               (tab_eta, 0, 16, ((-16, 16), (-16, 16))), args.repeat)
    return 0


if __name__ == "__main__":
    sys.exit(main())
