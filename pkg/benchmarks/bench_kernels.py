"""Compiled vs pure-Python kernels, plus LAPACK as a reference.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--reps 3]

Prints a CSV (kernel, backend, n, seconds) and the log-log slope of each
series. The python backend is only timed up to ``--python-max``.
"""
import argparse
import sys
import time

import numpy as np
from scipy import linalg

from igpk import kernels
from igpk.structmat import (
    build_gamma,
    choose_delta,
    increment_covariance,
    shifted_cholesky,
    twisted_factor,
)
from igpk.variogram import Brownian


def _median_time(fn, reps):
    fn()
    ts = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return float(np.median(ts))


def _instance(n, rng):
    model = Brownian(1.0)
    X = rng.random((n, 2))
    t = rng.random(2)
    G = build_gamma(model, X)
    g = model.to_locations(X, t)
    sc = shifted_cholesky(G, choose_delta(G, g))
    tf = twisted_factor(sc, g)
    M = increment_covariance(G, g)
    B = 0.1 * rng.standard_normal((4, n))
    U = np.ascontiguousarray(sc.U0)
    return U, np.ascontiguousarray(tf.r), tf.rho, M, B


def run(sizes, reps, python_max, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    backends = kernels.available_backends()
    for n in sizes:
        U, r, rho, M, B = _instance(n, rng)
        R1 = linalg.cholesky(U.T @ U + B.T @ B, lower=False)
        for name in backends:
            if name == "python" and n > python_max:
                continue
            impl = kernels.get_backend(name)
            rows.append(("increment_qr", name, n,
                         _median_time(lambda: impl.increment_qr(U, r, rho), reps)))
            rows.append(("chol_update", name, n,
                         _median_time(lambda: impl.chol_update(U.copy(), B), reps)))
            rows.append(("chol_downdate", name, n,
                         _median_time(lambda: impl.chol_downdate(R1.copy(), B, 1e-8), reps)))
            rows.append(("chol_unblocked", name, n,
                         _median_time(lambda: impl.chol_unblocked(M), reps)))
        rows.append(("cholesky", "lapack", n,
                     _median_time(lambda: linalg.cholesky(M, lower=True), reps)))
    return rows


def slopes(rows):
    out = {}
    for key in sorted({(k, b) for k, b, _, _ in rows}):
        pts = [(n, s) for k, b, n, s in rows if (k, b) == key]
        if len(pts) >= 2:
            n, s = np.array(pts).T
            out[key] = float(np.polyfit(np.log(n), np.log(s), 1)[0])
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--python-max", type=int, default=256)
    args = p.parse_args(argv)
    rows = run(args.sizes, args.reps, args.python_max)
    print("kernel,backend,n,seconds")
    for k, b, n, s in rows:
        print(f"{k},{b},{n},{s:.6e}")
    for (k, b), sl in slopes(rows).items():
        print(f"# slope {k}/{b}: {sl:.2f}", file=sys.stderr)
    speed = {}
    for k, b, n, s in rows:
        speed.setdefault((k, n), {})[b] = s
    for (k, n), d in sorted(speed.items()):
        if "compiled" in d and "python" in d:
            print(f"# {k} n={n}: compiled {d['python'] / d['compiled']:.1f}x faster",
                  file=sys.stderr)


if __name__ == "__main__":
    main()
