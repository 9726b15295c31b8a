"""Seeded synthetic datasets: the seven-point 1-d demo and a 2-d
altimetry-like swath with correlated observation error."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .io import write_csv
from .kriging import ObservationModel, Observations
from .posterior import sample_prior_path
from .structmat import build_gamma
from .variogram import (
    Brownian,
    ConvolvedBrownian,
    StationaryExp,
    StationaryGauss,
    calibrate,
)

VARIANTS = ("rough_stationary", "rough_intrinsic", "smooth_stationary", "smooth_intrinsic")


# ------------------------------------------------------------------ 1-d demo

@dataclass(frozen=True)
class DemoConfig1D:
    """Settings of the 1-d demo.

    The stationary pair is exponential and Gaussian with ``sigma2 = 1``,
    ``theta = 1``; the intrinsic pair (Brownian, convolved Brownian with
    kernel width ``smooth_r``) is calibrated to agree with it at ``calib_h``.
    Observation sites are stratified on [0, 1]; the values are a level plus
    an anchored draw from the calibrated Brownian prior.
    """

    n_obs: int = 7
    seed: int = 0
    sigma2: float = 1.0
    theta: float = 1.0
    calib_h: float = 0.05
    smooth_r: float = 0.1
    level: float = 2.0
    lattice_lo: float = -9.0
    lattice_hi: float = 10.0
    lattice_step: float = 0.05
    n_prior_draws: int = 5
    n_post_draws: int = 5

    def __post_init__(self):
        if self.n_obs < 2:
            raise ConfigError("need at least two observations")
        if not (self.lattice_lo < 0 and self.lattice_hi > 1 and self.lattice_step > 0):
            raise ConfigError("lattice must cover [0, 1] with a positive step")


@dataclass
class Demo1D:
    config: DemoConfig1D
    obs: Observations
    lattice: np.ndarray
    models: dict = field(default_factory=dict)


def demo_models(cfg):
    """The four variants, keyed by ``<row>_<kind>``."""
    exp_ = StationaryExp(cfg.sigma2, cfg.theta)
    gau = StationaryGauss(cfg.sigma2, cfg.theta)
    return {
        "rough_stationary": exp_,
        "rough_intrinsic": calibrate(Brownian(1.0), exp_, cfg.calib_h),
        "smooth_stationary": gau,
        "smooth_intrinsic": calibrate(ConvolvedBrownian(1.0, cfg.smooth_r, 1), gau, cfg.calib_h),
    }


def make_demo_1d(cfg=None):
    """Build the 1-d demo dataset; a pure function of ``cfg``."""
    cfg = cfg or DemoConfig1D()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_obs
    s = (np.arange(n) + 0.1 + 0.8 * rng.random(n)) / n
    models = demo_models(cfg)
    path = sample_prior_path(models["rough_intrinsic"], [0.0], s, rng.integers(2**63))
    y = cfg.level + path.values[0]
    # integer multiples of the step, so the anchor 0 is an exact node
    k0 = int(np.ceil(cfg.lattice_lo / cfg.lattice_step - 1e-9))
    k1 = int(np.floor(cfg.lattice_hi / cfg.lattice_step + 1e-9))
    lattice = cfg.lattice_step * np.arange(k0, k1 + 1)
    return Demo1D(cfg, Observations(s, y), lattice, models)


# -------------------------------------------------------------- swath demo

@dataclass(frozen=True)
class SwotConfig:
    """Settings of the 2-d swath demo (lengths in km, heights in m).

    The error covariance ``sigma^2 F F^T`` uses ``F = [sigma_w I | sigma_c K]``
    where the rows of ``K`` are unit-norm squared-exponential profiles
    along each swath line with length ``ell_c``. These error parameters are
    a labelled stand-in, not a mission specification.
    """

    region: tuple = (0.0, 512.0, 0.0, 512.0)
    nx: int = 64
    ny: int = 64
    n_track: int = 128
    track_sep: float = 120.0
    track_angle: float = 0.25
    track_margin: float = 16.0
    sigma2_z: float = 8e-5
    r: float = 50.0
    sigma: float = 1.0
    sigma_w: float = 0.01
    sigma_c: float = 0.005
    ell_c: float = 25.0
    seed: int = 0

    def __post_init__(self):
        x0, x1, y0, y1 = self.region
        if not (x1 > x0 and y1 > y0):
            raise ConfigError("region must have positive extent")
        for name in ("nx", "ny", "n_track"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("sigma2_z", "r", "ell_c"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("sigma", "sigma_w", "sigma_c"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")


@dataclass
class SwotData:
    config: SwotConfig
    grid: np.ndarray
    track: np.ndarray
    line: np.ndarray
    truth_grid: np.ndarray
    truth_track: np.ndarray
    obs: Observations
    om: ObservationModel
    anchor: np.ndarray
    gamma_joint: np.ndarray | None = None

    @property
    def model(self):
        return swot_model(self.config)


def swot_model(cfg):
    return ConvolvedBrownian(cfg.sigma2_z, cfg.r, 2)


def swot_grid(cfg):
    """Cell centres of the ``nx`` by ``ny`` lattice, x varying fastest."""
    x0, x1, y0, y1 = cfg.region
    xs = x0 + (np.arange(cfg.nx) + 0.5) * (x1 - x0) / cfg.nx
    ys = y0 + (np.arange(cfg.ny) + 0.5) * (y1 - y0) / cfg.ny
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def swot_track(cfg):
    """Two parallel tilted lines through the region centre.

    Returns the points and, per point, ``(line_id, along_track_km)``.
    """
    x0, x1, y0, y1 = cfg.region
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    ux, uy = math.sin(cfg.track_angle), math.cos(cfg.track_angle)
    px, py = uy, -ux
    half = 0.5 * (y1 - y0) - cfg.track_margin
    along = np.linspace(-half, half, cfg.n_track)
    pts, meta = [], []
    for lid, off in enumerate((-0.5 * cfg.track_sep, 0.5 * cfg.track_sep)):
        pts.append(np.column_stack([cx + off * px + along * ux, cy + off * py + along * uy]))
        meta.append(np.column_stack([np.full(cfg.n_track, lid), along]))
    pts = np.vstack(pts)
    if (pts[:, 0].min() < x0 or pts[:, 0].max() > x1
            or pts[:, 1].min() < y0 or pts[:, 1].max() > y1):
        raise DomainError("track leaves the region")
    return pts, np.vstack(meta)


def swot_error_factor(cfg, line):
    """``F = [sigma_w I | sigma_c K]`` for track metadata ``line``."""
    n = line.shape[0]
    same = line[:, 0][:, None] == line[:, 0][None, :]
    da = line[:, 1][:, None] - line[:, 1][None, :]
    K = np.where(same, np.exp(-0.5 * (da / cfg.ell_c) ** 2), 0.0)
    K /= np.linalg.norm(K, axis=1, keepdims=True)
    return np.hstack([cfg.sigma_w * np.eye(n), cfg.sigma_c * K])


def make_swot(cfg=None, keep_gamma=True):
    """Build the swath dataset.

    The truth is one anchored prior draw (anchor at the region corner) of
    the convolved-Brownian field, taken jointly on grid and track points;
    observations add ``sigma F v`` with ``v`` standard normal.
    """
    cfg = cfg or SwotConfig()
    rng = np.random.default_rng(cfg.seed)
    grid = swot_grid(cfg)
    track, line = swot_track(cfg)
    model = swot_model(cfg)
    pts = np.vstack([grid, track])
    G = build_gamma(model, pts)
    anchor = np.array([cfg.region[0], cfg.region[2]])
    path = sample_prior_path(model, anchor, pts, rng.integers(2**63), gamma=G)
    vals = path.values[0]
    N = grid.shape[0]
    truth_grid, truth_track = vals[:N], vals[N:]
    F = swot_error_factor(cfg, line)
    noisy = cfg.sigma > 0 and (cfg.sigma_w > 0 or cfg.sigma_c > 0)
    v = rng.standard_normal(F.shape[1])
    y = truth_track + (cfg.sigma * F @ v if noisy else 0.0)
    om = ObservationModel(cfg.sigma, F) if noisy else ObservationModel(0.0)
    return SwotData(cfg, grid, track, line, truth_grid, truth_track,
                    Observations(track, y), om, anchor, G if keep_gamma else None)


def config_echo(cfg):
    out = asdict(cfg)
    out["region"] = list(out["region"])
    return out


def export_dataset(data, outdir):
    """Write locations, observations, truth grid and the config echo."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "locations.csv", ["x", "y"], data.track)
    write_csv(out / "observations.csv", ["index", "y"],
              np.column_stack([np.arange(data.obs.n), data.obs.y]), int_cols=(0,))
    write_csv(out / "truth.csv", ["x", "y", "value"],
              np.column_stack([data.grid, data.truth_grid]))
    with open(out / "config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config_echo(data.config), fh, indent=2, sort_keys=True)
        fh.write("\n")
