"""Command-line interface: ``igpk <command> ...``.

Exit codes: 0 success, 1 numeric failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__, kernels
from .errors import ConfigError, DomainError, NumericError
from .io import read_locations, read_model, read_observations, write_csv, write_json
from .kriging import ObservationModel, Observations, parse_method, weights_for
from .posterior import (
    median_shift,
    posterior_moments,
    sample_posterior,
    sample_prior_path,
    sample_stationary_prior,
    stationary_posterior,
)
from .simdata import VARIANTS, DemoConfig1D, SwotConfig, config_echo, make_demo_1d, make_swot
from .structmat import (
    build_gamma,
    choose_delta,
    cnd_diagnostics,
    shifted_cholesky,
    twisted_factor,
)

log = logging.getLogger("igpk")

BENCH_BUDGET = 0.3
BENCH_BATCH = 2e-3

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}


# ------------------------------------------------------------------ helpers

def _setup_logging():
    name = os.environ.get("IGPK_LOG", "warn").strip().lower()
    if name not in LOG_LEVELS:
        raise ConfigError(f"IGPK_LOG must be one of {sorted(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[name], format="igpk %(levelname)s: %(message)s",
                        stream=sys.stderr)
    log.setLevel(LOG_LEVELS[name])


def _require(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join(missing)}")


def _load_obs(args):
    names, locs, y = read_observations(args.obs)
    return names, Observations(locs, y)


def _load_targets(args, dim):
    names, T = read_locations(args.targets)
    if T.shape[1] != dim:
        raise ConfigError(f"targets have {T.shape[1]} coordinates, observations {dim}")
    return names, T


def _om(args):
    return ObservationModel(args.sigma or 0.0)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sink(args):
    return sys.stdout if args.out in (None, "-") else args.out


# ----------------------------------------------------------------- commands

def cmd_variogram(args):
    _require(args, "model")
    model = read_model(args.model)
    if args.steps < 1 or not args.dmax >= args.dmin >= 0:
        raise ConfigError("need 0 <= dmin <= dmax and steps >= 1")
    d = np.linspace(args.dmin, args.dmax, args.steps + 1)
    write_csv(_sink(args), ["d", "gamma"], np.column_stack([d, model.of_distance(d)]))


def cmd_predict(args):
    _require(args, "obs", "model", "targets")
    model = read_model(args.model)
    names, obs = _load_obs(args)
    _, T = _load_targets(args, obs.locs.shape[1])
    spec = parse_method(args.method)
    om = _om(args)

    def run(chunk):
        return weights_for(spec, obs.locs, obs.y, model, om, chunk, delta=args.delta)

    chunks = np.array_split(T, max(1, min(args.threads, len(T))))
    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    z = np.concatenate([p[0] for p in parts])
    Lam = np.hstack([p[1] for p in parts])
    header = names + ["zhat", "sum_lambda"] + [f"w_{k}" for k in range(obs.n)]
    write_csv(_sink(args), header, np.column_stack([T, z, Lam.sum(axis=0), Lam.T]))


def _posterior(args):
    _require(args, "obs", "model", "targets")
    model = read_model(args.model)
    names, obs = _load_obs(args)
    _, T = _load_targets(args, obs.locs.shape[1])
    if args.stationary:
        return names, T, stationary_posterior(obs, _om(args), model, T)
    return names, T, posterior_moments(obs, _om(args), model, T, delta=args.delta)


def cmd_posterior(args):
    names, T, pg = _posterior(args)
    write_csv(_sink(args), names + ["mu", "sd"], np.column_stack([T, pg.mu, pg.sd]))


def cmd_sample(args):
    if args.obs is None:
        _require(args, "model", "targets")
        model = read_model(args.model)
        names, T = read_locations(args.targets)
        anchor = np.zeros(T.shape[1]) if args.anchor is None else np.asarray(args.anchor, float)
        if model.stationary:
            vals = sample_stationary_prior(model, T, args.seed, args.k)
        else:
            vals = sample_prior_path(model, anchor, T, args.seed, args.k).values
    else:
        names, T, pg = _posterior(args)
        vals = sample_posterior(pg, args.seed, args.k)
    header = names + [f"draw_{j}" for j in range(args.k)]
    write_csv(_sink(args), header, np.column_stack([T, vals.T]))


def cmd_diag_cnd(args):
    _require(args, "model", "targets")
    model = read_model(args.model)
    _, X = read_locations(args.targets)
    G = build_gamma(model, X)
    dg = cnd_diagnostics(G)
    out = {
        "n": int(X.shape[0]),
        "n_positive_eigenvalues": int(dg.n_pos_eig),
        "perron_min": float(np.min(dg.perron)),
        "perron_positive": bool(np.all(dg.perron > 0)),
        "e_Ginv_e": float(dg.e_Ginv_e),
        "delta_min": float(dg.delta_min),
        "delta_chosen": float(choose_delta(G)),
    }
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")


# -------------------------------------------------------------------- demos

def demo_fig1(outdir, seed):
    """Write the four-variant 1-d demo tables into ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = DemoConfig1D(seed=seed)
    demo = make_demo_1d(cfg)
    s, y = demo.obs.locs[:, 0], demo.obs.y
    T = demo.lattice
    Tp = np.union1d(T, s)
    seeds = np.random.SeedSequence(seed).spawn(2 * len(VARIANTS))

    d = np.linspace(0.0, 2.0, 201)
    rows, tags = [], []
    for v in VARIANTS:
        rows.append(np.column_stack([d, demo.models[v].of_distance(d)]))
        tags += [(v,)] * d.size
    write_csv(out / "variograms.csv", ["variant", "d", "gamma"], np.vstack(rows),
              prefix_cols=tags)

    free = T[T != 0.0]
    prior_rows, prior_tags, mean_rows, mean_tags, post_rows, post_tags = [], [], [], [], [], []
    for i, v in enumerate(VARIANTS):
        m = demo.models[v]
        k = cfg.n_prior_draws
        if m.stationary:
            draws = sample_stationary_prior(m, T, seeds[2 * i], k)
        else:
            vals = sample_prior_path(m, [0.0], free, seeds[2 * i], k).values
            draws = np.zeros((k, T.size))
            draws[:, T != 0.0] = vals
        shown = draws if m.stationary else median_shift(draws)
        for j in range(k):
            prior_rows.append(np.column_stack([np.full(T.size, j), T, draws[j], shown[j]]))
            prior_tags += [(v,)] * T.size

        if m.stationary:
            pg = stationary_posterior(demo.obs, None, m, Tp)
        else:
            pg = posterior_moments(demo.obs, ObservationModel(0.0), m, Tp)
        mean_rows.append(np.column_stack([Tp, pg.mu, pg.sd]))
        mean_tags += [(v,)] * Tp.size
        pd = sample_posterior(pg, seeds[2 * i + 1], cfg.n_post_draws)
        for j in range(cfg.n_post_draws):
            post_rows.append(np.column_stack([np.full(Tp.size, j), Tp, pd[j]]))
            post_tags += [(v,)] * Tp.size

    write_csv(out / "prior_draws.csv", ["variant", "draw", "t", "value", "display"],
              np.vstack(prior_rows), int_cols=(0,), prefix_cols=prior_tags)
    write_csv(out / "post_mean.csv", ["variant", "t", "mu", "sd"], np.vstack(mean_rows),
              prefix_cols=mean_tags)
    write_csv(out / "post_draws.csv", ["variant", "draw", "t", "value"], np.vstack(post_rows),
              int_cols=(0,), prefix_cols=post_tags)
    write_csv(out / "observations.csv", ["t", "value"], np.column_stack([s, y]))
    echo = {"seed": seed, "n_obs": cfg.n_obs,
            "models": {v: demo.models[v].to_dict() for v in VARIANTS}}
    write_json(out / "config.json", echo)
    return demo


def demo_swot(outdir, seed, cfg=None, n_draws=3):
    """Write the swath demo tables into ``outdir``; returns (data, posterior)."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = cfg or SwotConfig(seed=seed)
    data = make_swot(cfg)
    pg = posterior_moments(data.obs, data.om, data.model, data.grid,
                           gamma_joint=data.gamma_joint)
    write_csv(out / "truth.csv", ["x", "y", "value"],
              np.column_stack([data.grid, data.truth_grid]))
    write_csv(out / "obs.csv", ["x", "y", "value", "truth"],
              np.column_stack([data.track, data.obs.y, data.truth_track]))
    write_csv(out / "post_mean.csv", ["x", "y", "mu", "sd"],
              np.column_stack([data.grid, pg.mu, pg.sd]))
    draws = sample_posterior(pg, np.random.SeedSequence(seed).spawn(1)[0], n_draws)
    for j in range(n_draws):
        write_csv(out / f"draws_{j}.csv", ["x", "y", "value"],
                  np.column_stack([data.grid, draws[j]]))
    write_json(out / "config.json", config_echo(cfg))
    return data, pg


def cmd_demo(args):
    _require(args, "out")
    if args.which == "fig1":
        demo_fig1(args.out, args.seed)
    else:
        cfg = SwotConfig(seed=args.seed, nx=args.nx, ny=args.ny, n_track=args.n_track)
        demo_swot(args.out, args.seed, cfg)


# -------------------------------------------------------------------- bench

def _bench_calls(impl, model, X, t):
    G = build_gamma(model, X)
    g = model.to_locations(X, t)
    sc = shifted_cholesky(G, choose_delta(G, g))
    U0 = np.ascontiguousarray(sc.U0)
    n = len(g)
    # buffers are reused across targets, as in a prediction loop
    work = impl.workspace(n)
    M, L = np.empty((n, n)), np.empty((n, n))

    def twisted():
        tf = twisted_factor(sc, g)
        impl.increment_qr(U0, np.ascontiguousarray(tf.r), tf.rho, work)

    def direct():
        np.add(g[:, None], g[None, :], out=M)
        np.subtract(M, G, out=M)
        impl.chol_unblocked(M, L)

    return {"twisted": twisted, "direct": direct}


def bench(sizes, reps=3, backend="auto", seed=0, threads=1):
    """Per-target factorization time for each ``n``.

    ``twisted`` is the border solve plus the Givens reduction against a
    precomputed shifted factor; ``direct`` is an unblocked Cholesky of the
    assembled increment covariance, both in the selected backend and both
    writing into buffers allocated once per ``n``.

    Sizes and methods are timed in interleaved rounds, so slow spells of
    the machine hit every size alike and cancel in the slopes. Each timing
    follows an untimed call, and a cheap call is repeated within a timing
    until it lasts ``BENCH_BATCH`` seconds. Each entry is the median over at least ``reps`` rounds and
    at least ``BENCH_BUDGET`` seconds per entry.

    Returns
    -------
    list of (n, method, seconds)
    """
    from .variogram import Brownian

    impl = kernels.get_backend(backend)
    rng = np.random.default_rng(seed)
    model = Brownian(1.0)
    cells = []
    for n in sizes:
        calls = _bench_calls(impl, model, rng.random((n, 2)), rng.random(2))
        for name in ("twisted", "direct"):
            fn = calls[name]
            batch = 1
            while True:  # doubling, as timeit's autorange
                t0 = time.perf_counter()
                for _ in range(batch):
                    fn()
                if time.perf_counter() - t0 >= BENCH_BATCH:
                    break
                batch *= 2
            cells.append((n, name, fn, batch, []))
    spent = 0.0
    rounds = 0
    while rounds < reps or spent < BENCH_BUDGET * len(cells):
        for _, _, fn, batch, times in cells:
            fn()  # warm the caches the previous entry evicted
            t0 = time.perf_counter()
            for _ in range(batch):
                fn()
            dt = time.perf_counter() - t0
            times.append(dt / batch)
            spent += dt
        rounds += 1
    return [(n, name, float(np.median(times))) for n, name, _, _, times in cells]


def bench_slopes(rows):
    """Least-squares slope of log(seconds) on log(n) per method."""
    res = {}
    for name in sorted({r[1] for r in rows}):
        n = np.array([r[0] for r in rows if r[1] == name], dtype=float)
        s = np.array([r[2] for r in rows if r[1] == name])
        res[name] = float(np.polyfit(np.log(n), np.log(s), 1)[0])
    return res


def cmd_bench(args):
    sizes = args.sizes
    if any(b <= a for a, b in zip(sizes, sizes[1:])) or sizes[0] < 2:
        raise ConfigError("sizes must be ascending and >= 2")
    if args.reps < 1:
        raise ConfigError("reps must be positive")
    rows = bench(sizes, args.reps, args.backend, args.seed)
    sink = _sink(args)
    own = not hasattr(sink, "write")
    fh = open(sink, "w", encoding="utf-8", newline="") if own else sink
    try:
        fh.write("n,method,seconds\n")
        for n, m, s in rows:
            fh.write(f"{n},{m},{s:.6e}\n")
    finally:
        if own:
            fh.close()
    for name, slope in bench_slopes(rows).items():
        log.info("%s slope %.3f", name, slope)


# ------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="igpk", description="Intrinsic GP kriging tools.")
    p.add_argument("--version", action="version", version=f"igpk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, obs=True):
        sp.add_argument("--model", help="variogram model JSON")
        if obs:
            sp.add_argument("--obs", help="observation CSV with a 'value' column")
        sp.add_argument("--targets", help="target/lattice location CSV")
        sp.add_argument("--sigma", type=float, default=0.0, help="observation noise sd")
        sp.add_argument("--delta", type=float, default=None, help="override the shift")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="output file ('-' for stdout)")
        sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("variogram", help="tabulate gamma(d)")
    common(sp, obs=False)
    sp.add_argument("--dmin", type=float, default=0.0)
    sp.add_argument("--dmax", type=float, default=1.0)
    sp.add_argument("--steps", type=int, default=100)
    sp.set_defaults(func=cmd_variogram)

    sp = sub.add_parser("predict", help="kriging predictions and weights")
    common(sp)
    sp.add_argument("--method", default="igp")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("posterior", help="posterior mean and sd on a lattice")
    common(sp)
    sp.add_argument("--stationary", action="store_true", help="zero-mean stationary GP")
    sp.set_defaults(func=cmd_posterior)

    sp = sub.add_parser("sample", help="posterior (or anchored prior) realizations")
    common(sp)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--stationary", action="store_true")
    sp.add_argument("--anchor", type=float, nargs="+", default=None)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("demo", help="reproduce a demo")
    sp.add_argument("which", choices=["fig1", "swot"])
    sp.add_argument("--out", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--nx", type=int, default=64)
    sp.add_argument("--ny", type=int, default=64)
    sp.add_argument("--n-track", dest="n_track", type=int, default=128)
    sp.set_defaults(func=cmd_demo)

    sp = sub.add_parser("bench", help="twisted vs direct factorization timings")
    sp.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024])
    sp.add_argument("--reps", type=int, default=5)
    sp.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("diag", help="diagnostics")
    sp.add_argument("what", choices=["cnd"])
    common(sp, obs=False)
    sp.set_defaults(func=cmd_diag_cnd)
    return p


def main(argv=None):
    try:
        _setup_logging()
        parser = build_parser()
        args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads must be positive")
        args.func(args)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    except (ConfigError, DomainError, OSError, KeyError) as exc:
        log.error("%s", exc)
        return 2
    except (NumericError, LinAlgError, FloatingPointError) as exc:
        log.error("numeric failure: %s", exc)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
