# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: Givens sweeps, rank-one Cholesky modifications and
an unblocked Cholesky used as the cubic baseline.

Every routine here has a line-for-line counterpart in ``_kernels_py`` and
the two are tested against each other.
"""
import numpy as np

from libc.math cimport sqrt, hypot, fabs

cdef double EPS = 2.220446049250313e-16


cdef inline void _rot(double[:, ::1] W, Py_ssize_t i, Py_ssize_t j,
                      Py_ssize_t col0, Py_ssize_t ncol,
                      double c, double s) noexcept nogil:
    cdef Py_ssize_t k
    cdef double a, b
    for k in range(col0, ncol):
        a = W[i, k]
        b = W[j, k]
        W[i, k] = c * a + s * b
        W[j, k] = c * b - s * a


cdef inline void _zero_with(double[:, ::1] W, Py_ssize_t i, Py_ssize_t j,
                            Py_ssize_t col, Py_ssize_t ncol) noexcept nogil:
    # rotate rows (i, j) so that W[j, col] becomes zero
    cdef double a = W[i, col]
    cdef double b = W[j, col]
    cdef double rr, c, s
    if b == 0.0:
        return
    rr = hypot(a, b)
    c = a / rr
    s = b / rr
    _rot(W, i, j, col + 1, ncol, c, s)
    W[i, col] = rr
    W[j, col] = 0.0


cdef inline void _copy_row(double[:, ::1] W, const double[:, ::1] U0,
                           Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    # the whole row is written, so the buffer need not be zeroed
    cdef Py_ssize_t j
    for j in range(i):
        W[i + 1, j] = 0.0
    for j in range(i, n):
        W[i + 1, j] = U0[i, j]


def workspace(Py_ssize_t n):
    """Buffer for ``increment_qr`` that can be reused across targets."""
    # pad the row length: power-of-two strides alias in cache
    return np.empty((n + 1, n + 8))


def increment_qr(const double[:, ::1] U0, const double[::1] r, double rho,
                 work=None):
    """Lower factor G with G G^T = (D C)(D C)^T, see ``_kernels_py``."""
    cdef Py_ssize_t n = U0.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double a, b, rr, c, s
    W_arr = workspace(n) if work is None else work
    if W_arr.shape[0] < n + 1 or W_arr.shape[1] < n:
        raise ValueError(f"work must be at least ({n + 1}, {n})")
    cdef double[:, ::1] W = W_arr
    rv_arr = np.array(r, dtype=np.float64)
    cdef double[::1] rv = rv_arr
    with nogil:
        for j in range(n):
            W[0, j] = -rho
        if n > 0:
            _copy_row(W, U0, n - 1, n)
        # phase 1: Q r = |r| e_1, Q U upper Hessenberg; each row of U is
        # copied in just before its first rotation, while it is in cache
        for k in range(n - 1, 0, -1):
            _copy_row(W, U0, k - 1, n)
            b = rv[k]
            if b == 0.0:
                continue
            a = rv[k - 1]
            rr = hypot(a, b)
            c = a / rr
            s = b / rr
            rv[k - 1] = rr
            rv[k] = 0.0
            _rot(W, k, k + 1, k - 1, n, c, s)
        if n > 0:
            for j in range(n):
                W[1, j] -= rv[0]
        # clear the second subdiagonal and fold the dense first row in,
        # one pass: rows j, j + 1 are final once (j + 1, j + 2) is rotated
        for j in range(n):
            if j < n - 1:
                _zero_with(W, j + 1, j + 2, j, n)
            _zero_with(W, j, j + 1, j, n)
            # row j is final now
            if W[j, j] < 0.0:
                for k in range(j, n):
                    W[j, k] = -W[j, k]
    # a transposed view; copying it out would cost more than the sweeps
    return W_arr[:n, :n].T


def chol_downdate(double[:, ::1] R, const double[:, ::1] B, double fail_abs):
    """In-place hyperbolic downdate of upper R by the rows of B.

    Returns ``(status, clamps)``; status is -1 on success, otherwise the
    pivot index at which indefiniteness beyond ``fail_abs`` was met.
    """
    cdef Py_ssize_t n = R.shape[0]
    cdef Py_ssize_t m = B.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double beta, rho, p2, rp, c, s, sgn, t
    buf = np.empty(n)
    cdef double[::1] b = buf
    clamps = []
    for i in range(m):
        for j in range(n):
            b[j] = B[i, j]
        for k in range(n):
            beta = b[k]
            if beta == 0.0:
                continue
            rho = R[k, k]
            p2 = (rho - beta) * (rho + beta)
            if p2 <= 64.0 * EPS * rho * rho:
                if p2 < -fail_abs:
                    return k, clamps
                sgn = 1.0 if beta * rho >= 0.0 else -1.0
                with nogil:
                    for j in range(k + 1, n):
                        b[j] -= sgn * R[k, j]
                        R[k, j] = 0.0
                R[k, k] = 0.0
                clamps.append((i, k, p2))
                continue
            rp = sqrt(p2)
            c = rp / rho
            s = beta / rho
            R[k, k] = rp
            with nogil:
                for j in range(k + 1, n):
                    t = (R[k, j] - s * b[j]) / c
                    R[k, j] = t
                    b[j] = c * b[j] - s * t
    return -1, clamps


def chol_update(double[:, ::1] R, const double[:, ::1] X):
    """In-place Givens update of upper R by the rows of X."""
    cdef Py_ssize_t n = R.shape[0]
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double xk, a, rr, c, s, t
    buf = np.empty(n)
    cdef double[::1] x = buf
    with nogil:
        for i in range(m):
            for j in range(n):
                x[j] = X[i, j]
            for k in range(n):
                xk = x[k]
                if xk == 0.0:
                    continue
                a = R[k, k]
                rr = hypot(a, xk)
                c = a / rr
                s = xk / rr
                R[k, k] = rr
                for j in range(k + 1, n):
                    t = R[k, j]
                    R[k, j] = c * t + s * x[j]
                    x[j] = c * x[j] - s * t


def chol_unblocked(const double[:, ::1] A, out=None):
    """Row-oriented unblocked Cholesky, lower factor; cubic reference."""
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    cdef int bad = -1
    L_arr = np.empty((n, n)) if out is None else out
    cdef double[:, ::1] L = L_arr
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                L[i, j] = 0.0
            for j in range(i + 1):
                s = A[i, j]
                for k in range(j):
                    s -= L[i, k] * L[j, k]
                if i == j:
                    if s <= 0.0:
                        bad = <int>i
                        break
                    L[i, i] = sqrt(s)
                else:
                    L[i, j] = s / L[j, j]
            if bad >= 0:
                break
    if bad >= 0:
        raise np.linalg.LinAlgError(f"nonpositive pivot at {bad}")
    return L_arr
