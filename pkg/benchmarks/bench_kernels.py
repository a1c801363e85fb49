"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 20000] [--modes 8] [--dim 4] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from sgmw2 import _accel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--modes", type=int, default=8)
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.n, args.dim))
    z = rng.normal(size=(args.n, args.dim))
    means = rng.normal(0, 3, size=(args.modes, args.dim))
    logw = np.log(np.full(args.modes, 1.0 / args.modes))
    offset = np.zeros((1, args.dim))
    var, h = 0.7, 0.01

    kernels = {
        "score": lambda nb: _accel.mixture_score(x, means, var, logw, use_numba=nb),
        "logpdf": lambda nb: _accel.mixture_logpdf(x, means, var, logw, use_numba=nb),
        "em_step": lambda nb: _accel.em_step(x, means, var, logw, h, z, offset, use_numba=nb),
    }
    print(f"backend={_accel.backend()} n={args.n} modes={args.modes} dim={args.dim}")
    if not _accel.HAVE_NUMBA:
        print("numba disabled; only the numpy path is timed")
    print(f"{'kernel':<10}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in kernels.items():
        t_np = min(timeit.repeat(lambda: fn(False), number=1, repeat=args.repeat)) * 1e3
        if _accel.HAVE_NUMBA:
            fn(True)  # compile
            t_nb = min(timeit.repeat(lambda: fn(True), number=1, repeat=args.repeat)) * 1e3
            diff = float(np.abs(fn(True) - fn(False)).max())
            print(f"{name:<10}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>10.1f}{diff:>12.1e}")
        else:
            print(f"{name:<10}{t_np:>12.3f}{'-':>12}{'-':>10}{'-':>12}")


if __name__ == "__main__":
    main()
