"""Time the numpy and numba kernels side by side.

    python3 benchmarks/bench_backends.py [--sizes 256,1024,3072] [--repeat 3]

Prints one row per (kernel, n) with the best-of-repeat wall time for each
backend, the speedup, and the largest absolute difference between outputs.
The numba column excludes JIT compilation (a warm-up call runs first).
"""
import argparse
import time

import numpy as np

from riloss import _backend
from riloss.kernels import KernelSpec, hoeffding_components


def cases(n, rng):
    inv = KernelSpec().inv
    r = rng.normal(size=(n, 1))
    s = rng.uniform(-1, 1, size=(n, 1))
    x = rng.normal(size=(max(1, n // 96), 96, 7))
    signs = rng.choice([-1.0, 1.0], size=(200, min(n, 512)))
    return {
        "plugin_hsic": lambda ops: ops.plugin_hsic(r, s, inv, inv),
        "plugin_hsic_grad": lambda ops: ops.plugin_hsic_grad(r, s, inv, inv),
        "ustat_hsic": lambda ops: ops.ustat_hsic(r, s, inv, inv),
        "rademacher_draws": lambda ops: ops.rademacher_draws(
            *_parts(r[:signs.shape[1]]), signs),
        "moving_average": lambda ops: ops.moving_average(x, 25),
    }


def _parts(x):
    hc = hoeffding_components(x, KernelSpec())
    return hc.f1, np.ascontiguousarray(hc.f2)


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def flat(out):
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(np.asarray(o, dtype=float)) for o in out])
    return np.ravel(np.asarray(out, dtype=float))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="256,1024,3072")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not _backend.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    np_ops, nb_ops = _backend.get("numpy"), _backend.get("numba")
    print(f"{'kernel':<18}{'n':>7}{'numpy s':>11}{'numba s':>11}{'speedup':>9}{'max diff':>11}")
    for n in (int(v) for v in args.sizes.split(",")):
        for name, fn in cases(n, np.random.default_rng(args.seed)).items():
            fn(nb_ops)  # compile
            t_np, o_np = best_of(lambda: fn(np_ops), args.repeat)
            t_nb, o_nb = best_of(lambda: fn(nb_ops), args.repeat)
            diff = float(np.max(np.abs(flat(o_np) - flat(o_nb))))
            print(f"{name:<18}{n:>7}{t_np:>11.4f}{t_nb:>11.4f}{t_np / t_nb:>9.2f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
