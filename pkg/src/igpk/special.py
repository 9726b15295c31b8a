"""Special functions used by the variogram models."""
import numpy as np
from scipy.special import gamma as _gamma_fn
from scipy.special import ndtr

from .errors import DomainError, NumericError

MAX_TERMS = 100_000
SERIES_LIMIT = 30.0


def std_normal_cdf(x):
    """Standard normal distribution function.

    Parameters
    ----------
    x : float or array_like

    Returns
    -------
    float or ndarray
        Values in [0, 1]. Accurate to about 1e-16 absolute; the lower tail
        is computed without cancellation.
    """
    return ndtr(x)


def _series(a, b, z):
    """Ascending series for 1F1(a; b; z), vectorized over ``z``.

    Converged entries drop out of the active set, so each entry costs only
    as many terms as it needs.
    """
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    if z.size == 0:
        return total
    term = np.ones_like(z)
    active = np.arange(z.size)
    zf, tf, sf = z.ravel(), term.ravel(), total.ravel()
    za = zf.copy()
    ta = tf.copy()
    sa = sf.copy()
    for k in range(MAX_TERMS):
        ta = ta * ((a + k) / (b + k)) * za / (k + 1)
        sa = sa + ta
        done = np.abs(ta) <= 1e-17 * np.abs(sa)
        if a + k == 0:  # terminating polynomial
            done[:] = True
        if done.any():
            sf[active[done]] = sa[done]
            keep = ~done
            active, za, ta, sa = active[keep], za[keep], ta[keep], sa[keep]
            if active.size == 0:
                return total
    raise NumericError(f"1F1 series did not converge in {MAX_TERMS} terms")


def _asymptotic_negative(a, b, x):
    """1F1(a; b; x) for large negative x.

    Uses the algebraic branch ``Gamma(b)/Gamma(b-a) |x|^-a sum_s
    (a)_s (a-b+1)_s / s! |x|^-s`` plus the leading exponentially small
    term; the sum is cut at its smallest term.
    """
    y = -np.asarray(x, dtype=float)
    inv = 1.0 / y
    total = np.ones_like(y)
    term = np.ones_like(y)
    prev = np.full_like(y, np.inf)
    live = np.ones(y.shape, dtype=bool)
    for s in range(200):
        term = term * ((a + s) * (a - b + 1 + s) / (s + 1)) * inv
        mag = np.abs(term)
        live &= mag < prev
        total = np.where(live, total + term, total)
        prev = np.where(live, mag, prev)
        if not live.any() or np.all(mag[live] <= 1e-17 * np.abs(total[live])):
            break
    out = _gamma_fn(b) / _gamma_fn(b - a) * y ** (-a) * total
    if not (a <= 0 and float(a).is_integer()):
        out = out + _gamma_fn(b) / _gamma_fn(a) * np.exp(-y) * y ** (a - b)
    return out


def kummer_1f1(a, b, x):
    """Confluent hypergeometric function of the first kind, 1F1(a; b; x).

    Parameters
    ----------
    a, b : float
        Parameters; ``b`` must not be a nonpositive integer.
    x : float or array_like
        Argument. Negative values use the Kummer transformation
        ``1F1(a; b; x) = exp(x) 1F1(b - a; b; -x)`` so the series has
        positive terms; below ``-30`` the large-argument expansion is used.

    Returns
    -------
    float or ndarray
        Same shape as ``x``.

    Raises
    ------
    DomainError
        If ``b`` is a nonpositive integer.
    NumericError
        If the series does not converge within 1e5 terms.
    """
    if b <= 0 and float(b).is_integer():
        raise DomainError("1F1 undefined for nonpositive integer b")
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    flat = xa.ravel()
    out = np.empty_like(flat)
    if flat.size:
        # repeated arguments are common (regular grids); evaluate each once
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.empty_like(uniq)
        poly = a <= 0 and float(a).is_integer()
        neg = uniq < 0
        far = neg & (uniq < -SERIES_LIMIT) & (not poly)
        near = neg & ~far
        if poly:
            vals[neg] = _series(a, b, uniq[neg])
        else:
            vals[near] = np.exp(uniq[near]) * _series(b - a, b, -uniq[near])
            vals[far] = _asymptotic_negative(a, b, uniq[far])
        pos = ~neg
        vals[pos] = _series(a, b, uniq[pos])
        out = vals[inv]
    out = out.reshape(xa.shape)
    return float(out) if scalar else out


def kummer_1f1_minus_one(a, b, x):
    """``1F1(a; b; x) - 1`` without cancellation for small ``|x|``.

    For ``|x| < 1`` the ascending series is summed from its first nonzero
    term; elsewhere this is ``kummer_1f1(a, b, x) - 1``.
    """
    xa = np.asarray(x, dtype=float)
    out = np.asarray(kummer_1f1(a, b, xa), dtype=float) - 1.0
    small = np.abs(xa) < 1.0
    if np.any(small):
        z = xa[small]
        term = (a / b) * z
        total = term.copy()
        for k in range(1, 200):
            term = term * ((a + k) / (b + k)) * z / (k + 1)
            total += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out = np.array(out)
        out[small] = total
    return float(out) if xa.ndim == 0 else out
