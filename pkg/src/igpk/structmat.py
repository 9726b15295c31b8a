"""Variogram matrices and their structured factorizations.

A variogram matrix ``Gamma`` is conditionally negative definite, so for a
large enough shift ``delta`` the matrix ``delta ee^T - Gamma`` is positive
definite. One Cholesky factor of that shifted matrix is computed per
observation set; everything target-dependent is then O(n^2).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from . import kernels
from .errors import DegenerateConfiguration, DowndateError, PSDViolation
from .variogram import as_locations

log = logging.getLogger("igpk")

PIVOT_RTOL = 1e-12
BUMP_WARN = 1e-6
MAX_DOUBLINGS = 6
RHO_CLAMP = 1e-10
DOWNDATE_FAIL = 1e-8
RAISE_STEPS = 12


def build_gamma(model, X, Y=None):
    """Variogram matrix of ``model`` over one or two location sets."""
    return model.pairwise(as_locations(X), None if Y is None else as_locations(Y))


# -------------------------------------------------------------- diagnostics

@dataclass
class CNDDiagnostics:
    """Eigenstructure summary of a variogram matrix."""

    n_pos_eig: int | None
    perron: np.ndarray | None
    e_Ginv_e: float | None
    eigenvalues: np.ndarray
    singular: bool = False

    @property
    def delta_min(self):
        """Smallest shift making ``delta ee^T - Gamma`` positive definite."""
        return None if self.singular else 1.0 / self.e_Ginv_e


def cnd_diagnostics(gamma):
    """Check the eigenstructure of a variogram matrix.

    Parameters
    ----------
    gamma : ndarray, shape (n, n)

    Returns
    -------
    CNDDiagnostics
        Number of positive eigenvalues, the sign-normalized eigenvector of
        the largest eigenvalue and ``e^T Gamma^{-1} e``. If ``gamma`` is
        numerically singular only the eigenvalues are filled in.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.shape[0]
    w, V = linalg.eigh(gamma)
    scale = np.max(np.abs(w)) if n else 0.0
    tol = max(n, 1) * np.finfo(float).eps * scale
    if n == 0 or np.min(np.abs(w)) <= tol:
        return CNDDiagnostics(None, None, None, w, singular=True)
    v = V[:, -1]
    v = v if v.sum() >= 0 else -v
    e = np.ones(n)
    eGe = float(e @ linalg.solve(gamma, e, assume_a="sym"))
    return CNDDiagnostics(int(np.sum(w > tol)), v, eGe, w)


def choose_delta(gamma, gamma_t=None):
    """Shift ``delta = |Gamma e|^2 / e^T Gamma e``.

    Parameters
    ----------
    gamma : ndarray, shape (n, n)
    gamma_t : ndarray, shape (n,), optional
        Variogram column of one target. When given, ``delta`` is chosen on
        the matrix augmented by the target, so its twisted factor exists.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma_t is not None:
        g = np.asarray(gamma_t, dtype=float)
        if g.shape != (gamma.shape[0],):
            raise ValueError("gamma_t must be one variogram column")
        row_s = gamma.sum(axis=1) + g
        num = row_s @ row_s + g.sum() ** 2
        den = gamma.sum() + 2.0 * g.sum()
        if not den > 0:
            raise DegenerateConfiguration("e^T Gamma e must be positive")
        return float(num / den)
    n = gamma.shape[0]
    if n < 2:
        return 1.0
    g = gamma.sum(axis=1)
    den = g.sum()
    if not den > 0:
        raise DegenerateConfiguration("e^T Gamma e must be positive")
    return float(g @ g / den)


# --------------------------------------------------------- shifted cholesky

@dataclass(frozen=True)
class ShiftedCholesky:
    """Factor of ``delta ee^T - Gamma`` (plus a recorded diagonal bump).

    ``U0`` is upper triangular with ``U0.T @ U0 = delta ee^T - Gamma +
    diag(bump)``; ``L0`` is its transpose.
    """

    delta: float
    U0: np.ndarray
    bump: np.ndarray
    attempts: int = 1
    bump_warning: bool = False

    @property
    def L0(self):
        return self.U0.T

    @property
    def n(self):
        return self.U0.shape[0]

    @property
    def bumped(self):
        return bool(np.any(self.bump > 0))


def _raised_cholesky(A, tol, max_steps=RAISE_STEPS):
    """Cholesky of ``A + tau I`` for the smallest ``tau`` in ``2 tol * 10^k``
    whose factor has every squared pivot above ``tol``.

    A uniform raise keeps the factor entries bounded; raising single
    pivots of a numerically singular matrix lets rounding errors grow
    without bound. Returns the upper factor and the diagonal increments.
    """
    n = A.shape[0]
    tau = 2.0 * tol
    for _ in range(max_steps):
        U = _lapack_ok(A + tau * np.eye(n), tol)
        if U is not None:
            return U, np.full(n, tau)
        tau *= 10.0
    raise PSDViolation(f"no diagonal raise up to {tau / 10:.3g} makes the matrix definite")


def modified_cholesky(A, rtol=PIVOT_RTOL):
    """Upper factor of a symmetric PSD matrix, raised if needed.

    Returns ``(U, E)`` with ``U.T @ U = A + diag(E)``. ``E`` is zero when
    plain Cholesky succeeds with all squared pivots above ``rtol * |A|_inf``.
    """
    A = np.asarray(A, dtype=float)
    tol = rtol * np.max(np.abs(A).sum(axis=1)) if A.size else 0.0
    U = _lapack_ok(A, tol)
    if U is not None:
        return U, np.zeros(A.shape[0])
    return _raised_cholesky(A, tol)


def pivoted_cholesky_factor(A, tol=-1.0):
    """Factor of a numerically semidefinite matrix by complete pivoting.

    Returns ``(R, rank)`` with ``R.T @ R = A`` up to rounding, where ``R``
    is upper triangular after the column permutation chosen by LAPACK
    ``?pstrf``; rows past the numerical rank are zero. The default
    tolerance is LAPACK's ``n * eps * max(diag(A))``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0
    c, piv, rank, info = lapack.dpstrf(A, tol=tol, lower=0)
    if info < 0:
        raise ValueError(f"dpstrf argument {-info} invalid")
    U = np.triu(c)
    U[rank:] = 0.0
    R = np.empty_like(U)
    R[:, piv - 1] = U
    return R, int(rank)


def _lapack_ok(A, tol):
    try:
        U = linalg.cholesky(A, lower=False, check_finite=False)
    except linalg.LinAlgError:
        return None
    if np.min(np.diag(U)) ** 2 <= tol:
        return None
    return U


def shifted_cholesky(gamma, delta, max_doublings=MAX_DOUBLINGS):
    """Cholesky factor of ``delta ee^T - Gamma`` with a bump fallback.

    Parameters
    ----------
    gamma : ndarray, shape (n, n)
    delta : float
        Initial shift, > 0.
    max_doublings : int
        If the plain factorization fails (or meets a pivot at or below
        ``1e-12 * |A|_inf``), ``delta`` is doubled and retried this many
        times. Pass 0 to keep ``delta`` fixed.

    Returns
    -------
    ShiftedCholesky
        When every attempt fails, the diagonal of the initially shifted
        matrix is raised uniformly until Cholesky succeeds; if that needs a
        raise beyond ``1e-6 * |Gamma|_inf`` the last shift is tried as well
        and the smaller raise is kept.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.shape[0]
    if not delta > 0:
        raise ValueError("delta must be positive")
    gnorm = np.max(np.abs(gamma).sum(axis=1)) if n else 0.0
    d = float(delta)
    tried = []
    for attempt in range(max_doublings + 1):
        A = d - gamma
        tol = PIVOT_RTOL * np.max(np.abs(A).sum(axis=1))
        U = _lapack_ok(A, tol)
        tried.append(d)
        if U is not None:
            if attempt:
                log.info("shift doubled %d time(s) to %.6g", attempt, d)
            return ShiftedCholesky(d, U, np.zeros(n), attempt + 1)
        d *= 2.0
    best = None
    for dd in dict.fromkeys([tried[0], tried[-1]]):
        A = dd - gamma
        tol = PIVOT_RTOL * np.max(np.abs(A).sum(axis=1))
        U, E = _raised_cholesky(A, tol)
        if best is None or E.max() < best[2].max():
            best = (dd, U, E)
        if E.max() <= BUMP_WARN * gnorm:
            break
    dd, U, E = best
    warn = bool(E.max() > BUMP_WARN * gnorm)
    lvl = logging.WARNING if warn else logging.INFO
    log.log(lvl, "shifted matrix singular to working precision; diagonal raised by %.3g "
            "(delta %.6g)", E.max(), dd)
    return ShiftedCholesky(dd, U, E, len(tried), warn)


def factor_shifted(gamma, gamma_t=None, delta=None):
    """``shifted_cholesky`` at ``choose_delta`` (or a given ``delta``)."""
    if delta is None:
        delta = choose_delta(gamma, gamma_t)
        return shifted_cholesky(gamma, delta)
    return shifted_cholesky(gamma, delta, max_doublings=0)


# ------------------------------------------------------------ per target

@dataclass(frozen=True)
class TwistedFactor:
    """Border ``(r, rho)`` extending ``L0`` by one target.

    ``[[r^T, rho], [L0, 0]]`` times its transpose is the shifted variogram
    matrix of (target, observations).
    """

    r: np.ndarray
    rho: float
    clamped: bool = False


def twisted_factor(sc, gamma_t):
    """Solve ``L0 r = delta e - gamma_t`` and form ``rho = sqrt(delta - |r|^2)``.

    Raises
    ------
    PSDViolation
        If ``delta - |r|^2 < -1e-10 delta``; a smaller deficit is clamped to
        zero with a warning.
    """
    g = np.asarray(gamma_t, dtype=float)
    r = linalg.solve_triangular(sc.U0, sc.delta - g, trans="T", check_finite=False)
    rho2 = sc.delta - r @ r
    if rho2 < 0.0:
        if rho2 < -RHO_CLAMP * sc.delta:
            raise PSDViolation(
                f"delta - |r|^2 = {rho2:.3g}: shift too small for this target"
            )
        log.warning("rho^2 = %.3g clamped to 0", rho2)
        return TwistedFactor(r, 0.0, True)
    return TwistedFactor(r, float(np.sqrt(rho2)))


def increment_factor(sc, tf):
    """Lower factor ``G`` of ``M(t) = gamma_t e^T + e gamma_t^T - Gamma``.

    Uses the Givens reduction in :mod:`igpk.kernels`; O(n^2) per target.
    """
    return kernels.increment_qr(np.ascontiguousarray(sc.U0), np.ascontiguousarray(tf.r), tf.rho)


def increment_covariance(gamma, gamma_t):
    """Directly assembled ``M(t)``; reference for tests and diagnostics."""
    g = np.asarray(gamma_t, dtype=float)
    return g[:, None] + g[None, :] - np.asarray(gamma, dtype=float)


# ---------------------------------------------------------- noise and rank-k

def noisy_shifted_factor(sc, sigma, F=None):
    """Upper ``R_s`` with ``R_s^T R_s = sigma^2 FF^T + U0^T U0``.

    The QR factorization of ``[U0; sigma F^T]`` supplies ``R_s``; the
    orthogonal factor is not formed. Rows are signed so the diagonal is
    positive.
    """
    if sigma == 0:
        return np.array(sc.U0)
    n = sc.n
    F = np.eye(n) if F is None else np.asarray(F, dtype=float)
    if F.shape[0] != n:
        raise ValueError(f"F must have {n} rows")
    stacked = np.vstack([sc.U0, sigma * F.T])
    R = linalg.qr(stacked, mode="r", check_finite=False)[0][:n]
    R = np.triu(R)
    R[np.diag(R) < 0] *= -1.0
    return np.ascontiguousarray(R)


@dataclass
class DowndateResult:
    R: np.ndarray
    clamps: list = field(default_factory=list)


def cholesky_downdate(R, B, return_log=False):
    """Factor of ``A - B^T B`` from the upper factor ``R`` of ``A``.

    Parameters
    ----------
    R : ndarray, shape (n, n)
        Upper triangular, ``R^T R = A``.
    B : ndarray, shape (k, n)
    return_log : bool
        Also return the list of clamped pivots ``(row, pivot, p2)``.

    Raises
    ------
    DowndateError
        If a pivot goes negative by more than ``1e-8 * max diag(A)``.

    Notes
    -----
    Each row of ``B`` is removed with hyperbolic rotations. A pivot that
    cancels to within rounding is set to zero and the rest of its row is
    folded into the vector being removed.
    """
    Rn = np.array(R, dtype=float, order="C")
    B = np.ascontiguousarray(np.atleast_2d(np.asarray(B, dtype=float)))
    if B.shape[1] != Rn.shape[0]:
        raise ValueError("B must have as many columns as R")
    scale = float(np.max(np.einsum("ij,ij->j", Rn, Rn))) if Rn.size else 0.0
    status, clamps = kernels.chol_downdate(Rn, B, DOWNDATE_FAIL * scale)
    if status >= 0:
        raise DowndateError(f"downdate leaves an indefinite matrix at pivot {status}")
    if clamps:
        log.info("downdate clamped %d pivot(s)", len(clamps))
    return (Rn, clamps) if return_log else Rn


def cholesky_update(R, X):
    """Factor of ``A + X^T X`` from the upper factor ``R`` of ``A``."""
    Rn = np.array(R, dtype=float, order="C")
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    kernels.chol_update(Rn, X)
    return Rn


# ------------------------------------------------------------ increment maps

@dataclass(frozen=True)
class IncrementMap:
    """Increment matrix on (target, s_1..s_n) and the map ``J D = D_hat``."""

    kind: str
    D: np.ndarray
    J: np.ndarray


def increment_map(kind, n):
    """Target-relative (``D = [-e | I]``) or consecutive increments.

    ``J`` is lower bidiagonal with unit diagonal and ``-1`` below it, and
    satisfies ``J @ D_target = D_consecutive``. For the target-relative map
    ``J`` is the identity.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    D = np.hstack([-np.ones((n, 1)), np.eye(n)])
    J = np.eye(n) - np.eye(n, k=-1)
    if kind in ("target", "target_relative", "TargetRelative"):
        return IncrementMap("target_relative", D, np.eye(n))
    if kind in ("consecutive", "Consecutive"):
        return IncrementMap("consecutive", J @ D, J)
    raise ValueError(f"unknown increment kind {kind!r}")
