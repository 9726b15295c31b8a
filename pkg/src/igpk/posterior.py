"""Joint posterior over a prediction lattice, sampling and prior paths."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DomainError, DowndateError
from .kriging import ObservationModel, Observations
from .structmat import (
    build_gamma,
    choose_delta,
    cholesky_downdate,
    cholesky_update,
    increment_factor,
    pivoted_cholesky_factor,
    noisy_shifted_factor,
    shifted_cholesky,
    twisted_factor,
)
from .variogram import as_location, as_locations

log = logging.getLogger("igpk")


@dataclass
class PosteriorGaussian:
    """Posterior mean ``mu`` and upper factor ``R`` with ``R^T R = Sigma``."""

    mu: np.ndarray
    R: np.ndarray
    delta: float | None = None
    clamp_log: list = field(default_factory=list)
    factor_path: str = "downdate"

    @property
    def cov(self):
        return self.R.T @ self.R

    @property
    def var(self):
        return np.einsum("ij,ij->j", self.R, self.R)

    @property
    def sd(self):
        return np.sqrt(self.var)


def posterior_moments(obs, om, model, lattice, delta=None, gamma_joint=None, factor="auto"):
    """IGP posterior of the field on ``lattice`` given ``obs``.

    Parameters
    ----------
    obs : Observations
    om : ObservationModel
    model : VariogramModel
    lattice : array_like, shape (N, d)
    delta : float, optional
        Shift for the joint (lattice, observation) system; by default
        chosen once on the joint variogram matrix.
    gamma_joint : ndarray, optional
        Precomputed variogram matrix of ``vstack([lattice, obs.locs])``.
    factor : {"auto", "downdate", "dense"}
        How the factor of ``Sigma`` is built; see Notes.

    Returns
    -------
    PosteriorGaussian

    Notes
    -----
    With ``A = sigma^2 FF^T + delta ee^T - Gamma_ss = R_s^T R_s`` and the
    shifted cross block ``C = delta ee^T - Gamma_st``, let ``B = R_s^{-T} C``,
    ``w = R_s^{-T} e``, ``z = R_s^{-T} y``, ``a = w^T w`` and
    ``u = e - B^T w``. Then

    ``mu = B^T z + u (w^T z) / a``,
    ``Sigma = (delta ee^T - Gamma_tt) - B^T B + u u^T / a``.

    The terms in ``u`` turn conditioning under the shifted covariance into
    conditioning with an unknown constant level, so both moments are free of
    ``delta``. The factor of ``Sigma`` is obtained from the shifted factor
    of the lattice block by one rank-one update followed by a downdate
    with ``B``; in that order every intermediate matrix is bounded below by
    ``Sigma`` itself.

    Downdating is only as good as the starting factor. When the lattice
    block is numerically singular (smooth variograms on dense lattices) its
    shifted factor carries a diagonal bump, which would land in ``Sigma``
    unchanged, and the hyperbolic rotations lose accuracy. In that case,
    or if the downdate fails, ``factor="auto"`` forms ``Sigma`` and factors
    it by Cholesky with complete pivoting, which is stable for semidefinite
    matrices; the factor is then triangular up to a column permutation.
    ``factor_path`` records which route was used.
    """
    if factor not in ("auto", "downdate", "dense"):
        raise ValueError(f"unknown factor route {factor!r}")
    if not isinstance(obs, Observations):
        raise DomainError("obs must be an Observations instance")
    om = om or ObservationModel()
    T = as_locations(lattice, obs.locs.shape[1])
    N, n = T.shape[0], obs.n
    if gamma_joint is None:
        gamma_joint = build_gamma(model, np.vstack([T, obs.locs]))
    if delta is None:
        delta = choose_delta(gamma_joint)
    Gtt = gamma_joint[:N, :N]
    Gts = gamma_joint[:N, N:]
    Gss = gamma_joint[N:, N:]

    sc_s = shifted_cholesky(Gss, delta, max_doublings=0)
    Rs = noisy_shifted_factor(sc_s, om.sigma, om.factor(n))
    lhs = np.column_stack([delta - Gts.T, np.ones(n), obs.y])
    sol = linalg.solve_triangular(Rs, lhs, trans="T", check_finite=False)
    B, w, z = sol[:, :N], sol[:, N], sol[:, N + 1]
    a = float(w @ w)
    beta = float(w @ z) / a
    u = 1.0 - B.T @ w
    mu = B.T @ z + beta * u

    if factor != "dense":
        sc_t = shifted_cholesky(Gtt, delta, max_doublings=0)
        if factor == "downdate" or not sc_t.bumped:
            try:
                R = cholesky_update(sc_t.U0, u / np.sqrt(a))
                R, clamps = cholesky_downdate(R, B, return_log=True)
            except DowndateError:
                if factor == "downdate":
                    raise
                log.info("downdate failed; factoring the posterior covariance directly")
            else:
                if clamps:
                    log.info("posterior factor: %d pivot(s) clamped", len(clamps))
                return PosteriorGaussian(mu, R, delta, clamps, "downdate")
    Sigma = (delta - Gtt) - B.T @ B + np.outer(u, u) / a
    R, rank = pivoted_cholesky_factor(0.5 * (Sigma + Sigma.T))
    if rank < N:
        log.info("posterior covariance has numerical rank %d of %d", rank, N)
    return PosteriorGaussian(mu, R, delta, [], "dense")


def sample_posterior(pg, rng_seed, k, normals=None, subset=None):
    """``k`` realizations ``mu + R^T v`` as rows of a ``(k, N)`` array.

    ``subset`` restricts the output to some lattice indices; the draws are
    the same as the corresponding columns of the full draws. ``normals``
    (shape ``(N, k)``) replaces the standard normal draws; it exists for
    testing.
    """
    N = pg.mu.size
    if normals is None:
        normals = np.random.default_rng(rng_seed).standard_normal((N, k))
    V = np.asarray(normals, dtype=float).reshape(N, k)
    if subset is None:
        return (pg.mu[:, None] + pg.R.T @ V).T
    idx = np.asarray(subset, dtype=int)
    return (pg.mu[idx, None] + pg.R[:, idx].T @ V).T


@dataclass
class PriorPath:
    anchor: np.ndarray
    points: np.ndarray
    values: np.ndarray


def sample_prior_path(model, anchor, points, rng_seed, k=1, gamma=None):
    """Draws of ``Z(p) - Z(anchor)`` on ``points``, with ``Z(anchor) = 0``.

    The increments relative to the anchor have covariance
    ``g e^T + e g^T - Gamma`` (``g`` the variogram column of the anchor),
    factored by the twisted Givens path.

    Returns
    -------
    PriorPath
        ``values`` has shape ``(k, N)``.
    """
    P = as_locations(points)
    a = as_location(anchor, P.shape[1])
    if np.any(np.max(np.abs(P - a), axis=1) <= 1e-12):
        raise DomainError("anchor must differ from every point")
    G = build_gamma(model, P) if gamma is None else gamma
    g = model.to_locations(P, a)
    sc = shifted_cholesky(G, choose_delta(G, g))
    L = increment_factor(sc, twisted_factor(sc, g))
    V = np.random.default_rng(rng_seed).standard_normal((P.shape[0], k))
    return PriorPath(a, P, (L @ V).T)


def median_shift(values):
    """Subtract each row's median; a display transform only."""
    values = np.atleast_2d(values)
    return values - np.median(values, axis=1, keepdims=True)


def _psd_upper_factor(S):
    """Upper ``R`` with ``R^T R = S`` after clipping negative eigenvalues."""
    ev, Q = linalg.eigh(0.5 * (S + S.T))
    ev = np.clip(ev, 0.0, None)
    return linalg.qr(np.sqrt(ev)[:, None] * Q.T, mode="r", check_finite=False)[0]


def sample_stationary_prior(model, points, rng_seed, k=1):
    """Zero-mean draws of a stationary field on ``points``, shape ``(k, N)``.

    The covariance ``sill - Gamma`` is factored through its eigenvalues
    (clipped at zero), so numerically singular smooth covariances work.
    """
    if not getattr(model, "stationary", False):
        raise DomainError("sample_stationary_prior needs a stationary model")
    P = as_locations(points)
    R = _psd_upper_factor(model.sill - build_gamma(model, P))
    V = np.random.default_rng(rng_seed).standard_normal((P.shape[0], k))
    return (R.T @ V).T


def stationary_posterior(obs, om, model, lattice):
    """Zero-mean GP regression under a stationary covariance.

    ``mu = C_ts (sigma^2 FF^T + C_ss)^{-1} y`` and
    ``Sigma = C_tt - C_ts (...)^{-1} C_st``, with ``C = sill - gamma``.
    Solves use a symmetric eigendecomposition with tiny eigenvalues
    dropped (relative 1e-14), since smooth covariances are numerically
    singular on dense data.
    """
    if not getattr(model, "stationary", False):
        raise DomainError("stationary_posterior needs a stationary model")
    om = om or ObservationModel()
    T = as_locations(lattice, obs.locs.shape[1])
    n = obs.n
    Css = model.sill - build_gamma(model, obs.locs) + om.covariance(n)
    Cts = model.sill - model.pairwise(T, obs.locs)
    Ctt = model.sill - build_gamma(model, T)
    lam, V = linalg.eigh(Css)
    keep = lam > 1e-14 * lam.max()
    W = V[:, keep] / np.sqrt(lam[keep])
    K = Cts @ W
    mu = K @ (W.T @ obs.y)
    R = _psd_upper_factor(Ctt - K @ K.T)
    return PosteriorGaussian(mu, R, factor_path="eigen")
