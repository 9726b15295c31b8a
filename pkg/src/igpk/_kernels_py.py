"""Pure numpy versions of the compiled kernels.

Loops run over rows or pivots; the work along a row is vectorized. Results
agree with the compiled versions to rounding.
"""
import numpy as np

EPS = np.finfo(float).eps


def _zero_with(W, i, j, col):
    a = W[i, col]
    b = W[j, col]
    if b == 0.0:
        return
    rr = np.hypot(a, b)
    c, s = a / rr, b / rr
    wi = W[i, col + 1:].copy()
    wj = W[j, col + 1:]
    W[i, col + 1:] = c * wi + s * wj
    W[j, col + 1:] = c * wj - s * wi
    W[i, col] = rr
    W[j, col] = 0.0


def workspace(n):
    """Buffer for ``increment_qr`` that can be reused across targets."""
    # padded rows: power-of-two strides alias in cache
    return np.empty((n + 1, n + 8))


def increment_qr(U0, r, rho, work=None):
    """Triangular factor of the increment covariance from a twisted factor.

    Parameters
    ----------
    U0 : ndarray, shape (n, n)
        Upper factor with ``U0.T @ U0 = delta*ee^T - Gamma``.
    r : ndarray, shape (n,)
        Solution of ``U0.T @ r = delta*e - gamma_t``.
    rho : float
        ``sqrt(delta - r @ r)``.
    work : ndarray, optional
        C-contiguous buffer of at least shape ``(n + 1, n)``, for example
        from :func:`workspace`. ``G`` is a view into it, so a reused buffer
        overwrites the previous result.

    Returns
    -------
    G : ndarray, shape (n, n)
        Lower triangular with nonnegative diagonal and
        ``G @ G.T = gamma_t e^T + e gamma_t^T - Gamma``.

    Notes
    -----
    The stacked matrix ``[-rho e^T; U0 - r e^T]`` is reduced to triangular
    form. Rotations on adjacent rows first map ``r`` to ``|r| e_1``, which
    leaves ``U0`` upper Hessenberg; one more top-down pass removes the
    second subdiagonal and folds in the dense first row. Each rotation
    costs O(n), so the whole reduction is O(n^2). ``G`` is returned as a
    transposed view.
    """
    U0 = np.asarray(U0, dtype=float)
    n = U0.shape[0]
    if work is None:
        work = workspace(n)
    if work.shape[0] < n + 1 or work.shape[1] < n:
        raise ValueError(f"work must be at least ({n + 1}, {n})")
    W = work[:n + 1, :n]
    W[0] = -rho
    W[1:] = np.triu(U0)
    rv = np.array(r, dtype=float)
    for k in range(n - 1, 0, -1):
        b = rv[k]
        if b == 0.0:
            continue
        a = rv[k - 1]
        rr = np.hypot(a, b)
        c, s = a / rr, b / rr
        rv[k - 1], rv[k] = rr, 0.0
        wi = W[k, k - 1:].copy()
        wj = W[k + 1, k - 1:]
        W[k, k - 1:] = c * wi + s * wj
        W[k + 1, k - 1:] = c * wj - s * wi
    if n > 0:
        W[1] -= rv[0]
    for j in range(n):
        if j < n - 1:
            _zero_with(W, j + 1, j + 2, j)
        _zero_with(W, j, j + 1, j)
    R = W[:n]
    neg = np.diag(R) < 0.0
    R[neg] *= -1.0
    return R.T


def chol_downdate(R, B, fail_abs):
    """In-place hyperbolic downdate of upper ``R`` by the rows of ``B``.

    Returns ``(status, clamps)`` with status -1 on success or the failing
    pivot index. Pivots that cancel to within rounding are set to zero and
    the remainder of the row is carried into the downdate vector.
    """
    n = R.shape[0]
    clamps = []
    for i in range(B.shape[0]):
        b = np.array(B[i], dtype=float)
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
                b[k + 1:] -= sgn * R[k, k + 1:]
                R[k, k:] = 0.0
                clamps.append((i, k, p2))
                continue
            rp = np.sqrt(p2)
            c, s = rp / rho, beta / rho
            R[k, k] = rp
            row = (R[k, k + 1:] - s * b[k + 1:]) / c
            R[k, k + 1:] = row
            b[k + 1:] = c * b[k + 1:] - s * row
    return -1, clamps


def chol_update(R, X):
    """In-place Givens update of upper ``R`` by the rows of ``X``."""
    n = R.shape[0]
    for i in range(X.shape[0]):
        x = np.array(X[i], dtype=float)
        for k in range(n):
            xk = x[k]
            if xk == 0.0:
                continue
            a = R[k, k]
            rr = np.hypot(a, xk)
            c, s = a / rr, xk / rr
            R[k, k] = rr
            t = R[k, k + 1:].copy()
            R[k, k + 1:] = c * t + s * x[k + 1:]
            x[k + 1:] = c * x[k + 1:] - s * t


def chol_unblocked(A, out=None):
    """Column-by-column Cholesky, lower factor; cubic reference."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    L = np.zeros((n, n)) if out is None else out
    L[...] = 0.0
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= 0.0:
            raise np.linalg.LinAlgError(f"nonpositive pivot at {j}")
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L
