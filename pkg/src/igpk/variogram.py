"""Variogram models, location handling and the convolved-Brownian oracle.

All models are immutable. A model maps a separation to a semivariance,
``gamma(s, t) = 0.5 * Var[Z(s) - Z(t)]``, and depends on locations only
through the (optionally axis-scaled) Euclidean distance.
"""
from __future__ import annotations

import dataclasses
import math
import numbers
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import ellipe

from .errors import ConfigError, DimensionError, DomainError, NumericError
from .special import kummer_1f1_minus_one, std_normal_cdf

COINCIDE_TOL = 1e-12
_SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------- locations

def as_locations(X, dim=None):
    """Coerce to an ``(n, d)`` float array of finite coordinates.

    A 1-d input is read as ``n`` points on the line.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionError(f"locations must be (n, d), got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DomainError("locations must be finite")
    if dim is not None and X.shape[1] != dim:
        raise DimensionError(f"expected dimension {dim}, got {X.shape[1]}")
    return X


def as_location(t, dim=None):
    """Coerce a single location to a length-``d`` vector."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.ndim != 1:
        raise DimensionError("a location is a vector of coordinates")
    if not np.all(np.isfinite(t)):
        raise DomainError("location must be finite")
    if dim is not None and t.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {t.size}")
    return t


def check_distinct(X, tol=COINCIDE_TOL):
    """Raise ``DomainError`` if two locations lie within ``tol``."""
    X = as_locations(X)
    pairs = cKDTree(X).query_pairs(tol)
    if pairs:
        i, j = min(pairs)
        raise DomainError(f"locations {i} and {j} coincide")
    return X


def coincident_index(locs, t, tol=COINCIDE_TOL):
    """Index of the location equal to ``t`` (within ``tol``), else ``None``."""
    d = np.max(np.abs(locs - t), axis=1)
    hit = np.flatnonzero(d <= tol)
    return int(hit[0]) if hit.size else None


# ------------------------------------------------------------------- models

def _positive(name, value):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(f"{name} must be a real number")
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be finite and > 0, got {value}")


def _check_scale(scale):
    if scale is None:
        return None
    scale = tuple(float(v) for v in scale)
    if not scale or any(not (math.isfinite(v) and v > 0) for v in scale):
        raise DomainError("axis scales must be finite and > 0")
    return scale


class VariogramModel:
    """Shared behaviour; concrete families implement ``of_distance``."""

    family: str = ""
    stationary: bool = False

    def of_distance(self, h):
        raise NotImplementedError

    def _scaled(self, X):
        scale = getattr(self, "scale", None)
        if scale is None:
            return X
        if len(scale) != X.shape[1]:
            raise DimensionError("axis scale length differs from dimension")
        return X * np.asarray(scale)

    def _check_dim(self, d):
        pass

    def distances(self, X, Y=None):
        """Scaled Euclidean distance matrix between two location sets."""
        X = as_locations(X)
        Y = X if Y is None else as_locations(Y)
        if X.shape[1] != Y.shape[1]:
            raise DimensionError("location sets differ in dimension")
        self._check_dim(X.shape[1])
        return cdist(self._scaled(X), self._scaled(Y))

    def pairwise(self, X, Y=None):
        """Matrix of ``gamma(x_i, y_j)``; symmetric with zero diagonal if ``Y`` is None."""
        G = self.of_distance(self.distances(X, Y))
        if Y is None:
            G = 0.5 * (G + G.T)
            np.fill_diagonal(G, 0.0)
        return G

    def to_locations(self, X, t):
        """Vector of ``gamma(t, x_k)`` for a single target."""
        X = as_locations(X)
        t = as_location(t, X.shape[1])
        return self.pairwise(X, t[None, :])[:, 0]

    def evaluate(self, s, t):
        """Semivariance between two locations."""
        s = as_location(s)
        t = as_location(t)
        if s.size != t.size:
            raise DimensionError("locations differ in dimension")
        return float(self.pairwise(s[None, :], t[None, :])[0, 0])

    __call__ = evaluate

    def to_dict(self):
        out = {"family": self.family}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "scale":
                if v is not None:
                    out["scale"] = list(v)
            elif isinstance(v, VariogramModel):
                out[f.name] = v.to_dict()
            else:
                out[f.name] = v
        return out


@dataclass(frozen=True)
class Brownian(VariogramModel):
    """Brownian (Levy) variogram ``sigma2 * |d|``."""

    sigma2: float
    scale: tuple | None = None
    family = "brownian"

    def __post_init__(self):
        _positive("sigma2", self.sigma2)
        object.__setattr__(self, "scale", _check_scale(self.scale))

    def of_distance(self, h):
        return self.sigma2 * np.asarray(h, dtype=float)


@dataclass(frozen=True)
class ConvolvedBrownian(VariogramModel):
    """Brownian motion smoothed by a Gaussian kernel of std-dev ``r``.

    In one dimension (Brownian increments with variance ``sigma2 |d|``)

    .. math::
        \\gamma(d) = \\frac{\\sigma^2}{2}\\Big\\{\\frac{2r}{\\sqrt\\pi}
        (e^{-d^2/4r^2} - 1) + d\\,[\\Phi(d/\\sqrt2 r) - \\Phi(-d/\\sqrt2 r)]\\Big\\}

    and in two dimensions (Levy semivariance ``sigma2 |d|``)

    .. math::
        \\gamma(d) = 2 r \\sigma^2 \\Gamma(3/2)\\,[{}_1F_1(-1/2; 1; -d^2/4r^2) - 1].

    Both are ``c * (E|d + W| - E|W|)`` with ``W ~ N(0, 2 r^2 I)``. For large
    ``d`` they grow linearly, like the unsmoothed model.
    """

    sigma2: float
    r: float
    dim: int
    scale: tuple | None = None
    family = "convolved_brownian"

    def __post_init__(self):
        _positive("sigma2", self.sigma2)
        _positive("r", self.r)
        if isinstance(self.dim, bool) or self.dim not in (1, 2):
            raise DomainError("convolved Brownian is implemented for dim 1 and 2")
        object.__setattr__(self, "scale", _check_scale(self.scale))

    def _check_dim(self, d):
        if d != self.dim:
            raise DimensionError(f"model has dim={self.dim}, locations have {d}")

    def of_distance(self, h):
        h = np.asarray(h, dtype=float)
        r = self.r
        if self.dim == 1:
            u = h / (math.sqrt(2.0) * r)
            body = (2.0 * r / _SQRT_PI) * np.expm1(-h * h / (4.0 * r * r)) + h * (
                std_normal_cdf(u) - std_normal_cdf(-u)
            )
            return 0.5 * self.sigma2 * body
        x = -h * h / (4.0 * r * r)
        return 2.0 * r * self.sigma2 * math.gamma(1.5) * kummer_1f1_minus_one(-0.5, 1.0, x)


@dataclass(frozen=True)
class StationaryExp(VariogramModel):
    """Exponential covariance, ``gamma = sigma2 (1 - exp(-theta d))``."""

    sigma2: float
    theta: float
    scale: tuple | None = None
    family = "stationary_exp"
    stationary = True

    def __post_init__(self):
        _positive("sigma2", self.sigma2)
        _positive("theta", self.theta)
        object.__setattr__(self, "scale", _check_scale(self.scale))

    @property
    def sill(self):
        return self.sigma2

    def correlation(self, h):
        return np.exp(-self.theta * np.asarray(h, dtype=float))

    def of_distance(self, h):
        return -self.sigma2 * np.expm1(-self.theta * np.asarray(h, dtype=float))


@dataclass(frozen=True)
class StationaryGauss(VariogramModel):
    """Gaussian covariance, ``gamma = sigma2 (1 - exp(-theta d^2))``."""

    sigma2: float
    theta: float
    scale: tuple | None = None
    family = "stationary_gauss"
    stationary = True

    def __post_init__(self):
        _positive("sigma2", self.sigma2)
        _positive("theta", self.theta)
        object.__setattr__(self, "scale", _check_scale(self.scale))

    @property
    def sill(self):
        return self.sigma2

    def correlation(self, h):
        h = np.asarray(h, dtype=float)
        return np.exp(-self.theta * h * h)

    def of_distance(self, h):
        h = np.asarray(h, dtype=float)
        return -self.sigma2 * np.expm1(-self.theta * h * h)


def surrogate_and_inverse(base_gamma, rho):
    """Map a sill-one semivariance to the surrogate and back.

    Parameters
    ----------
    base_gamma : float or array_like
        Values in [0, 1).
    rho : float
        Scale of the surrogate, > 0.

    Returns
    -------
    (gamma_hat, recovered) : tuple
        ``gamma_hat = rho g / (1 - g)`` and the inverse image
        ``(gamma_hat / rho) / (1 + gamma_hat / rho)``.
    """
    _positive("rho", rho)
    g = np.asarray(base_gamma, dtype=float)
    if np.any(g >= 1.0) or np.any(g < 0.0):
        raise DomainError("surrogate needs base semivariance in [0, 1)")
    ghat = rho * g / (1.0 - g)
    q = ghat / rho
    back = q / (1.0 + q)
    if g.ndim == 0:
        return float(ghat), float(back)
    return ghat, back


@dataclass(frozen=True)
class Surrogate(VariogramModel):
    """Unbounded surrogate ``rho * g / (1 - g)`` of a sill-one model ``g``."""

    base: VariogramModel
    rho: float
    family = "surrogate"

    def __post_init__(self):
        if not isinstance(self.base, VariogramModel) or not self.base.stationary:
            raise DomainError("surrogate base must be a stationary model")
        if self.base.sigma2 != 1.0:
            raise DomainError("surrogate base must have sill 1")
        _positive("rho", self.rho)

    @property
    def scale(self):
        return self.base.scale

    def _check_dim(self, d):
        self.base._check_dim(d)

    def of_distance(self, h):
        g = self.base.of_distance(h)
        if np.any(g >= 1.0):
            raise DomainError("base semivariance reached the sill; surrogate is infinite")
        return self.rho * g / (1.0 - g)


# --------------------------------------------------------------------- json

_FIELDS = {
    "brownian": (Brownian, {"sigma2"}, {"scale"}),
    "convolved_brownian": (ConvolvedBrownian, {"sigma2", "r", "dim"}, {"scale"}),
    "stationary_exp": (StationaryExp, {"sigma2", "theta"}, {"scale"}),
    "stationary_gauss": (StationaryGauss, {"sigma2", "theta"}, {"scale"}),
    "surrogate": (Surrogate, {"base", "rho"}, set()),
}


def model_from_dict(obj):
    """Build a model from its JSON object; unknown or missing keys are errors."""
    if not isinstance(obj, dict):
        raise ConfigError("model must be a JSON object")
    fam = obj.get("family")
    if fam not in _FIELDS:
        raise ConfigError(f"unknown variogram family {fam!r}")
    cls, required, optional = _FIELDS[fam]
    keys = set(obj) - {"family"}
    missing = required - keys
    extra = keys - required - optional
    if missing:
        raise ConfigError(f"{fam}: missing field(s) {sorted(missing)}")
    if extra:
        raise ConfigError(f"{fam}: field(s) not allowed {sorted(extra)}")
    kw = {k: obj[k] for k in keys}
    if fam == "surrogate":
        kw["base"] = model_from_dict(kw["base"])
    if "dim" in kw and (isinstance(kw["dim"], bool) or not isinstance(kw["dim"], int)):
        raise ConfigError("dim must be an integer")
    if "scale" in kw and not isinstance(kw["scale"], list):
        raise ConfigError("scale must be a list of numbers")
    return cls(**kw)


def model_to_dict(model):
    return model.to_dict()


# -------------------------------------------------------------- calibration

def calibrate(model, reference, h):
    """Rescale ``model.sigma2`` so both variograms agree at separation ``h``.

    Both intrinsic families are linear in ``sigma2``, so the matching value
    is a ratio; the returned model matches ``reference`` at 0 and ``h``.
    """
    _positive("h", h)
    unit = dataclasses.replace(model, sigma2=1.0)
    target = float(reference.of_distance(h))
    return dataclasses.replace(model, sigma2=target / float(unit.of_distance(h)))


# ------------------------------------------------------------------- oracle

def convolved_variogram_oracle(sigma2, r, dim, d, rtol=1e-10):
    """Convolved-Brownian semivariance by numerical quadrature.

    Computes ``c * E[|d + W| - |W|]`` with ``W ~ N(0, 2 r^2 I_dim)``, where
    ``c = sigma2 / 2`` in one dimension and ``sigma2`` in two, matching the
    conventions of :class:`ConvolvedBrownian`. The closed forms are not used:
    dim 1 integrates the piecewise-linear integrand against the normal
    density; dim 2 integrates over the radius of ``W`` after the angular
    average is expressed with the complete elliptic integral ``E``.

    Raises
    ------
    NumericError
        If the reported quadrature error exceeds 1e-8 relative.
    """
    d = abs(float(d))
    if d == 0.0:
        return 0.0
    s = math.sqrt(2.0) * r
    opts = dict(epsabs=0.0, epsrel=rtol, limit=400)
    if dim == 1:
        dens = lambda w: math.exp(-0.5 * (w / s) ** 2) / (s * math.sqrt(2 * math.pi))
        f = lambda w: (abs(d + w) - abs(w)) * dens(w)
        pieces = [(-d - 40 * s, -d), (-d, 0.0), (0.0, 40 * s)]
        coef = 0.5 * sigma2
    elif dim == 2:
        def f(rad):
            if rad == 0.0:
                return 0.0
            m = 4.0 * d * rad / (d + rad) ** 2
            ang = (2.0 / math.pi) * (d + rad) * float(ellipe(min(m, 1.0)))
            return (rad / s**2) * math.exp(-0.5 * (rad / s) ** 2) * (ang - rad)
        pieces = [(0.0, d), (d, d + 40 * s)]
        coef = sigma2
    else:
        raise DomainError("oracle implemented for dim 1 and 2")
    total, err = 0.0, 0.0
    for lo, hi in pieces:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e = integrate.quad(f, lo, hi, **opts)
        total += val
        err += e
    if err > 1e-8 * abs(total) + 1e-300:
        raise NumericError(f"quadrature error {err:.3g} too large")
    return coef * total
