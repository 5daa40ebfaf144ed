"""Time each hot kernel under the numpy and the numba backend.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both implementations are called directly, so the result does not depend on
``SELFSIM_DISABLE_NUMBA``.  The numba column excludes the first (compiling)
call.
"""

import argparse
import timeit

import numpy as np

from selfsim import _kernels as K


def cases(rng):
    x, w = rng.normal(0, 3, 4096), rng.uniform(0, 1, 4096)
    t = np.linspace(0, 50, 512)
    f, a = rng.uniform(0, 3, 256), rng.uniform(0, 1, 256)
    xi, eta = rng.normal(size=(2048, 256)), rng.normal(size=(2048, 256))
    pts = rng.uniform(0, 1, (1_000_000, 3))
    trial = rng.integers(0, 10_000, pts.shape[0])
    box = np.array([0.1, 0.6, 0.2, 0.9, 0.0, 0.5])
    pos, pw = rng.uniform(-1, 1, 1_000_000), rng.uniform(0, 1, 1_000_000)
    return {
        "cosine_sum": (x, w, t),
        "pair_sinc_mean": (x[:2048], w[:2048], 30.0),
        "spectral_paths": (f, a, xi, eta, t[:64]),
        "box_counts": (trial, pts, box, 10_000),
        "linear_deposit": (pos, pw, -2.0, 1 / 1024, 4096),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'kernel':<16} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, params in cases(np.random.default_rng(0)).items():
        py = getattr(K, name + "_numpy")
        t_np = min(timeit.repeat(lambda: py(*params), number=1, repeat=args.repeat))
        if K.HAVE_NUMBA:
            nb = getattr(K, name + "_numba")
            nb(*params)
            t_nb = min(timeit.repeat(lambda: nb(*params), number=1, repeat=args.repeat))
            print(f"{name:<16} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} {t_np / t_nb:>8.1f}")
        else:
            print(f"{name:<16} {1e3 * t_np:>10.2f} {'n/a':>10} {'':>8}")


if __name__ == "__main__":
    main()
