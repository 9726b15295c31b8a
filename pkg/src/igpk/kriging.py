"""Kriging weights: IGP (noisy and noise-free), limit, rational, Shepard,
variogram-Shepard and the Joseph-Kang regression smoother.

Every weight family except Joseph-Kang returns an affine weight vector
``lam`` (``sum(lam) == 1``) and the prediction is ``lam @ y``.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConfigError, DegenerateConfiguration, DomainError, NumericError
from .structmat import (
    build_gamma,
    choose_delta,
    increment_factor,
    increment_map,
    noisy_shifted_factor,
    shifted_cholesky,
    twisted_factor,
)
from .variogram import COINCIDE_TOL, as_location, as_locations, coincident_index

log = logging.getLogger("igpk")

AFFINE_METHODS = ("igp", "igp_noise_free", "limit", "rational", "shepard", "gamma_shepard")


# -------------------------------------------------------------------- types

@dataclass(frozen=True)
class ObservationModel:
    """Observation noise ``sigma^2 F F^T``; ``F=None`` means the identity."""

    sigma: float = 0.0
    F: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise DomainError("sigma must be finite and >= 0")
        if self.F is not None:
            F = np.asarray(self.F, dtype=float)
            if F.ndim != 2:
                raise DomainError("F must be a matrix")
            object.__setattr__(self, "F", F)

    def factor(self, n):
        if self.F is None:
            return np.eye(n)
        if self.F.shape[0] != n:
            raise DomainError(f"F has {self.F.shape[0]} rows, expected {n}")
        return self.F

    def covariance(self, n):
        F = self.factor(n)
        return self.sigma**2 * (F @ F.T)


@dataclass(frozen=True)
class Observations:
    locs: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        locs = as_locations(self.locs)
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size != locs.shape[0]:
            raise DomainError("number of values differs from number of locations")
        if not np.all(np.isfinite(y)):
            raise DomainError("observed values must be finite")
        object.__setattr__(self, "locs", locs)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.y.size


@dataclass
class KrigingWeights:
    lam: np.ndarray
    method: str
    target: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    @property
    def sum_check(self):
        return float(np.sum(self.lam))


@dataclass(frozen=True)
class RationalConfig:
    """Weight vector for rational kriging.

    ``c_source`` is one of ``perron``, ``ones``, ``r_inv_e`` or ``user``;
    only ``user`` takes an explicit ``c``.
    """

    c_source: str = "perron"
    c: np.ndarray | None = None

    def __post_init__(self):
        if self.c_source not in ("perron", "ones", "r_inv_e", "user"):
            raise ConfigError(f"unknown c source {self.c_source!r}")
        if (self.c_source == "user") != (self.c is not None):
            raise ConfigError("an explicit c goes with c_source='user' only")


def predict(w, y):
    """Linear predictor ``sum_k lam_k y_k``."""
    lam = w.lam if isinstance(w, KrigingWeights) else np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam.shape != y.shape:
        raise DomainError("weights and values differ in length")
    return float(lam @ y)


def _unit(n, k):
    e = np.zeros(n)
    e[k] = 1.0
    return e


# --------------------------------------------------------------- IGP kriging

class IGPKriger:
    """IGP kriging weights for a fixed observation set.

    The matrix ``A = sigma^2 FF^T + delta ee^T - Gamma`` is factored once
    (shifted Cholesky, then QR with the noise factor). For a target with
    variogram column ``g`` and ``k = delta e - g`` the weights are

    ``lam = P k + P e (1 - e^T P k) / (e^T P e)``,  ``P = A^{-1}``,

    which does not depend on ``delta``: the second term removes exactly
    the component the shift adds.

    Parameters
    ----------
    locs : array_like, shape (n, d)
    model : VariogramModel
    om : ObservationModel, optional
    delta : float, optional
        Shift; chosen from ``Gamma`` when omitted.
    """

    def __init__(self, locs, model, om=None, delta=None):
        self.locs = as_locations(locs)
        self.model = model
        self.om = om or ObservationModel()
        n = self.locs.shape[0]
        if n < 1:
            raise DomainError("need at least one observation")
        self.gamma = build_gamma(model, self.locs)
        if delta is None:
            self.sc = shifted_cholesky(self.gamma, choose_delta(self.gamma))
        else:
            self.sc = shifted_cholesky(self.gamma, delta, max_doublings=0)
        self.delta = self.sc.delta
        self.Rs = noisy_shifted_factor(self.sc, self.om.sigma, self.om.factor(n))
        w = linalg.solve_triangular(self.Rs, np.ones(n), trans="T", check_finite=False)
        self._Pe = linalg.solve_triangular(self.Rs, w, check_finite=False)
        self._ePe = float(w @ w)
        if not self._ePe > 1e-14 * n / max(self.delta, 1.0):
            raise DegenerateConfiguration("e^T N e vanishes")

    @property
    def n(self):
        return self.locs.shape[0]

    def _solve(self, K):
        Z = linalg.solve_triangular(self.Rs, K, trans="T", check_finite=False)
        return linalg.solve_triangular(self.Rs, Z, check_finite=False)

    def weights_from_gamma(self, gamma_t):
        """Weights for one or many variogram columns (``(n,)`` or ``(n, m)``)."""
        G = np.asarray(gamma_t, dtype=float)
        K = self.delta - G
        PK = self._solve(K)
        corr = (1.0 - PK.sum(axis=0)) / self._ePe
        Pe = self._Pe if G.ndim == 1 else self._Pe[:, None]
        return PK + Pe * corr

    def weights(self, t):
        t = as_location(t, self.locs.shape[1])
        if self.om.sigma == 0:
            hit = coincident_index(self.locs, t, COINCIDE_TOL)
            if hit is not None:
                return KrigingWeights(_unit(self.n, hit), "igp", t, {"coincident": hit})
        lam = self.weights_from_gamma(self.model.to_locations(self.locs, t))
        return KrigingWeights(lam, "igp", t)

    def weights_many(self, T):
        """Weight matrix, one column per target row of ``T``."""
        T = as_locations(T, self.locs.shape[1])
        Lam = self.weights_from_gamma(self.model.pairwise(self.locs, T))
        if self.om.sigma == 0:
            for j, t in enumerate(T):
                hit = coincident_index(self.locs, t, COINCIDE_TOL)
                if hit is not None:
                    Lam[:, j] = _unit(self.n, hit)
        return Lam


def igp_weights(obs, model, om, t, delta=None):
    """IGP kriging weights at one target (see :class:`IGPKriger`)."""
    locs = obs.locs if isinstance(obs, Observations) else as_locations(obs)
    return IGPKriger(locs, model, om, delta).weights(t)


def igp_weights_noise_free(gamma, gamma_t):
    """Noise-free IGP weights.

    ``lam = Gamma^{-1} g + Gamma^{-1} e (1 - e^T Gamma^{-1} g) / (e^T Gamma^{-1} e)``.
    At an observation location ``g`` is a column of ``Gamma`` and the
    weights reduce to the corresponding unit vector.
    """
    gamma = np.asarray(gamma, dtype=float)
    g = np.asarray(gamma_t, dtype=float)
    n = gamma.shape[0]
    try:
        # singularity is detected from the pivots below
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            lu = linalg.lu_factor(gamma, check_finite=False)
    except (linalg.LinAlgError, ValueError) as exc:
        raise DegenerateConfiguration("Gamma is singular") from exc
    if np.min(np.abs(np.diag(lu[0]))) <= n * np.finfo(float).eps * np.abs(gamma).max():
        raise DegenerateConfiguration("Gamma is singular")
    X = linalg.lu_solve(lu, np.column_stack([g, np.ones(n)]), check_finite=False)
    Gg, Ge = X[:, 0], X[:, 1]
    eGe = Ge.sum()
    if abs(eGe) <= 1e-14 * np.abs(Ge).sum():
        raise DegenerateConfiguration("e^T Gamma^{-1} e vanishes")
    lam = Gg + Ge * (1.0 - Gg.sum()) / eGe
    return KrigingWeights(lam, "igp_noise_free")


def igp_weights_increments(locs, model, om, t, kind="target"):
    """IGP weights from the posterior precision of increments.

    Unknowns are ``x = (Z(t), Z(s_1), ..., Z(s_n))``. The increments ``D x``
    (target-relative or consecutive) have covariance ``G G^T`` with ``G``
    from the twisted Givens factor (``J G`` for consecutive increments).
    With ``X = [0 | I]`` the weights are

    ``lam = (sigma^2 FF^T)^{-1} X W^{-1} e_1``,
    ``W = X^T (sigma^2 FF^T)^{-1} X + D^T (G G^T)^{-1} D``.

    Needs ``sigma > 0`` and ``FF^T`` nonsingular. Dense and O(n^3); it is a
    cross-check on :class:`IGPKriger`, not the production path.
    """
    locs = as_locations(locs)
    n = locs.shape[0]
    t = as_location(t, locs.shape[1])
    if om.sigma <= 0:
        raise DomainError("the precision form needs sigma > 0")
    gamma = build_gamma(model, locs)
    g = model.to_locations(locs, t)
    sc = shifted_cholesky(gamma, choose_delta(gamma, g))
    G = increment_factor(sc, twisted_factor(sc, g))
    imap = increment_map(kind, n)
    Gk = imap.J @ G
    Dq = linalg.cho_solve(linalg.cho_factor(Gk @ Gk.T), imap.D)
    Ninv = linalg.cho_factor(om.covariance(n))
    X = np.hstack([np.zeros((n, 1)), np.eye(n)])
    W = X.T @ linalg.cho_solve(Ninv, X) + imap.D.T @ Dq
    col = linalg.solve(W, _unit(n + 1, 0), assume_a="sym")
    lam = linalg.cho_solve(Ninv, X @ col)
    return KrigingWeights(lam, "igp", t, {"increments": imap.kind})


# ------------------------------------------------- limit and rational kriging

def _sill_system(gamma, gamma_t, sill):
    gamma = np.asarray(gamma, dtype=float)
    g = np.asarray(gamma_t, dtype=float)
    if not sill > 0:
        raise DomainError("sill must be positive")
    top = max(gamma.max(initial=0.0), g.max(initial=0.0))
    if top > sill * (1 + 1e-12):
        raise DomainError(f"sill {sill} below largest semivariance {top:.6g}")
    R = sill - gamma
    r = sill - g
    return R, r


def limit_weights(gamma, gamma_t, sill=1.0):
    """Limit-kriging weights ``x / (e^T x)`` with ``(sill ee^T - Gamma) x = sill e - g``."""
    R, r = _sill_system(gamma, gamma_t, sill)
    try:
        x = linalg.solve(R, r, assume_a="sym")
    except linalg.LinAlgError as exc:
        raise DegenerateConfiguration("sill ee^T - Gamma is singular") from exc
    den = x.sum()
    if abs(den) <= 1e-14 * max(np.abs(x).sum(), 1.0):
        raise DegenerateConfiguration("limit-kriging denominator vanishes")
    return KrigingWeights(x / den, "limit")


def perron_vector(R, tol=1e-10, maxiter=10_000):
    """Positive eigenvector of an elementwise-positive symmetric matrix.

    Power iteration from the uniform vector until the relative residual
    ``|R v - mu v| / (|mu| |v|)`` is at most ``tol``; normalized to sum 1.
    """
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0):
        raise DomainError("Perron vector needs an elementwise-positive matrix")
    n = R.shape[0]
    v = np.full(n, 1.0 / n)
    for _ in range(maxiter):
        w = R @ v
        mu = v @ w / (v @ v)
        if np.linalg.norm(w - mu * v) <= tol * abs(mu) * np.linalg.norm(v):
            return v / v.sum()
        v = w / w.sum()
    raise NumericError(f"power iteration did not converge in {maxiter} steps")


def _rational(R, r, c, src):
    Rc = R @ c
    den = r @ c
    if abs(den) <= 1e-14 * np.abs(r).sum() * np.abs(c).max():
        raise DegenerateConfiguration("r(t)^T c vanishes")
    Rir = linalg.solve(R, r, assume_a="sym")
    lam = Rir * Rc / den
    # (R^{-1} r)_k can be negative, so convexity is reported, not assumed
    flags = {"c_source": src, "nonnegative": bool(lam.min() >= -1e-12)}
    if src == "r_inv_e" and np.any(c <= 0):
        flags["c_nonpositive"] = True
    return KrigingWeights(lam, "rational", flags=flags)


def rational_weights(gamma, gamma_t, sill=1.0, cfg=None):
    """Rational kriging weights ``lam_k = (R^{-1} r)_k (R c)_k / (r^T c)``.

    ``R = sill ee^T - Gamma`` and ``r = sill e - g``. With ``c = R^{-1} e``
    these are the limit-kriging weights.
    """
    cfg = cfg or RationalConfig()
    R, r = _sill_system(gamma, gamma_t, sill)
    n = R.shape[0]
    if cfg.c_source == "perron":
        c = perron_vector(R)
    elif cfg.c_source == "ones":
        c = np.ones(n)
    elif cfg.c_source == "r_inv_e":
        c = linalg.solve(R, np.ones(n), assume_a="sym")
    else:
        c = np.asarray(cfg.c, dtype=float)
        if c.shape != (n,):
            raise DomainError("c has the wrong length")
    if cfg.c_source != "r_inv_e" and np.any(c <= 0):
        raise DomainError("c must be strictly positive")
    return _rational(R, r, c, cfg.c_source)


def rational_weights_surrogate(gamma_hat, gamma_hat_t, rho):
    """Rational weights (``c = e``) for the surrogate scale ``rho``.

    ``gamma_hat`` is held fixed and mapped back to a sill-one variogram
    ``gamma_hat / (rho + gamma_hat)``; as ``rho -> 0`` the weights approach
    Shepard weights with distance ``gamma_hat``.
    """
    gh = np.asarray(gamma_hat, dtype=float)
    ght = np.asarray(gamma_hat_t, dtype=float)
    return rational_weights(gh / (rho + gh), ght / (rho + ght), 1.0, RationalConfig("ones"))


# ------------------------------------------------------------------- Shepard

def shepard_from_distances(d, c=None, method="shepard"):
    """Shepard weights from distances ``d`` to the target."""
    d = np.asarray(d, dtype=float)
    n = d.size
    c = np.ones(n) if c is None else np.asarray(c, dtype=float)
    if c.shape != (n,) or np.any(c <= 0):
        raise DomainError("c must be a positive vector of matching length")
    if np.any(d < 0):
        raise DomainError("distances must be nonnegative")
    zero = np.flatnonzero(d <= COINCIDE_TOL)
    if zero.size > 1:
        raise DegenerateConfiguration("target coincides with several observations")
    if zero.size == 1:
        return KrigingWeights(_unit(n, zero[0]), method, flags={"coincident": int(zero[0])})
    q = c / d
    return KrigingWeights(q / q.sum(), method)


def shepard_weights(locs, t, distance=None, c=None):
    """Inverse-distance weights ``(c_k / d_k) / sum_j (c_j / d_j)``.

    ``distance(locs, t)`` returns the distances; Euclidean by default.
    """
    locs = as_locations(locs)
    t = as_location(t, locs.shape[1])
    d = np.linalg.norm(locs - t, axis=1) if distance is None else distance(locs, t)
    w = shepard_from_distances(d, c)
    w.target = t
    return w


def gamma_shepard_weights(model, locs, t, c=None):
    """Shepard weights with the variogram as the distance measure."""
    locs = as_locations(locs)
    t = as_location(t, locs.shape[1])
    w = shepard_from_distances(model.to_locations(locs, t), c, "gamma_shepard")
    w.target = t
    return w


# --------------------------------------------------------------- Joseph-Kang

def _monomial_exponents(dim, degree):
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            out.append(np.bincount(np.array(combo, dtype=int), minlength=dim))
    return np.array(out).reshape(-1, dim)


@dataclass
class PolynomialTrend:
    """Total-degree least-squares polynomial on box-scaled coordinates."""

    center: np.ndarray
    half: np.ndarray
    exponents: np.ndarray
    coef: np.ndarray

    def basis(self, X):
        Z = (as_locations(X) - self.center) / self.half
        return np.prod(Z[:, None, :] ** self.exponents[None, :, :], axis=2)

    def __call__(self, X):
        return self.basis(X) @ self.coef


def fit_polynomial(locs, y, degree):
    locs = as_locations(locs)
    y = np.asarray(y, dtype=float)
    if degree < 0:
        raise DomainError("degree must be >= 0")
    lo, hi = locs.min(axis=0), locs.max(axis=0)
    half = np.where(hi > lo, 0.5 * (hi - lo), 1.0)
    ex = _monomial_exponents(locs.shape[1], degree)
    if ex.shape[0] > locs.shape[0]:
        raise DegenerateConfiguration("more monomials than observations")
    trend = PolynomialTrend(0.5 * (hi + lo), half, ex, np.zeros(ex.shape[0]))
    B = trend.basis(locs)
    coef, _, rank, _ = np.linalg.lstsq(B, y, rcond=None)
    if rank < B.shape[1]:
        raise DegenerateConfiguration("polynomial basis is rank deficient")
    trend.coef = coef
    return trend


def joseph_kang_predict(locs, y, t, degree=1, distance=None, c=None, return_weights=False):
    """Regression fit plus Shepard-interpolated residuals.

    ``Z(t) = p(t) + sum_k lam_k(t) (y_k - p(s_k))`` with ``p`` the
    least-squares polynomial of the given total degree.
    """
    locs = as_locations(locs)
    y = np.asarray(y, dtype=float)
    p = fit_polynomial(locs, y, degree)
    w = shepard_weights(locs, t, distance, c)
    t = as_location(t, locs.shape[1])
    z = float(p(t[None, :])[0] + w.lam @ (y - p(locs)))
    if return_weights:
        w.method = "joseph_kang_residual"
        return z, w
    return z


# ---------------------------------------------------------------------- DFP

@dataclass
class GLimResult:
    matrix: np.ndarray | None
    f: float
    g: float
    h: float | None
    feasible: bool
    secant_residual: float | None = None


def g_lim_matrix(gamma, gamma_t, sill=1.0):
    """Secant (DFP-form) matrix reproducing limit kriging.

    With ``R = sill ee^T - Gamma``, ``v = sill e - g``, ``f = e^T R^{-1} v``,
    ``q = v^T R^{-1} v`` and ``h = (f + q) / f^2`` this returns
    ``R + h ee^T - (v e^T + e v^T) / f``, which maps ``R^{-1} v`` to ``e``.
    It is positive definite exactly when ``f > 0``; otherwise no such
    matrix exists and ``feasible`` is False.
    """
    R, v = _sill_system(gamma, gamma_t, sill)
    n = R.shape[0]
    e = np.ones(n)
    x = linalg.solve(R, v, assume_a="sym")
    f = float(e @ x)
    q = float(v @ x)
    if not f > 0:
        return GLimResult(None, f, q, None, False)
    h = (f + q) / f**2
    M = R + h * np.outer(e, e) - (np.outer(v, e) + np.outer(e, v)) / f
    res = float(np.max(np.abs(M @ x - e)))
    return GLimResult(M, f, q, h, True, res)


# ----------------------------------------------------------- method strings

@dataclass(frozen=True)
class MethodSpec:
    name: str
    option: str | int | None = None


def parse_method(text):
    """Parse ``igp``, ``igp0``, ``limit``, ``rational:perron|ones|rinv``,
    ``shepard``, ``gshepard`` or ``jk:<degree>``."""
    text = (text or "").strip()
    head, _, opt = text.partition(":")
    if head in ("igp", "igp0", "limit", "shepard", "gshepard") and not opt:
        return MethodSpec(head)
    if head == "rational":
        src = {"perron": "perron", "ones": "ones", "rinv": "r_inv_e"}.get(opt)
        if src:
            return MethodSpec("rational", src)
    if head == "jk":
        try:
            deg = int(opt)
        except ValueError:
            deg = -1
        if deg >= 0:
            return MethodSpec("jk", deg)
    raise ConfigError(f"cannot parse method {text!r}")


def weights_for(spec, locs, y, model, om, targets, sill=None, delta=None):
    """Evaluate a parsed method at each target.

    Returns ``(predictions, weight_matrix)`` with one weight column per
    target.
    """
    locs = as_locations(locs)
    T = as_locations(targets, locs.shape[1])
    y = np.asarray(y, dtype=float)
    n, m = locs.shape[0], T.shape[0]
    if spec.name == "igp":
        Lam = IGPKriger(locs, model, om, delta).weights_many(T)
        return y @ Lam, Lam
    Lam = np.empty((n, m))
    zs = np.empty(m)
    if spec.name in ("igp0", "limit", "rational"):
        gamma = build_gamma(model, locs)
        Gt = model.pairwise(locs, T)
        if spec.name != "igp0" and sill is None:
            if not model.stationary:
                raise ConfigError("limit and rational kriging need a stationary model or a sill")
            sill = model.sill
    for j in range(m):
        if spec.name == "igp0":
            hit = coincident_index(locs, T[j])
            lam = _unit(n, hit) if hit is not None else igp_weights_noise_free(gamma, Gt[:, j]).lam
        elif spec.name == "limit":
            lam = limit_weights(gamma, Gt[:, j], sill).lam
        elif spec.name == "rational":
            lam = rational_weights(gamma, Gt[:, j], sill, RationalConfig(spec.option)).lam
        elif spec.name == "shepard":
            lam = shepard_weights(locs, T[j]).lam
        elif spec.name == "gshepard":
            lam = gamma_shepard_weights(model, locs, T[j]).lam
        elif spec.name == "jk":
            zs[j], w = joseph_kang_predict(locs, y, T[j], spec.option, return_weights=True)
            Lam[:, j] = w.lam
            continue
        else:  # pragma: no cover - parse_method guards this
            raise ConfigError(spec.name)
        Lam[:, j] = lam
        zs[j] = lam @ y
    return zs, Lam
