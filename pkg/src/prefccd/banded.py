"""Block-tridiagonal elimination with 2x2 blocks.

The coupled compact systems only link nodes ``i-1, i, i+1`` on the implicit
side, so every solve here works on three stacks of small blocks instead of
a dense matrix. All arithmetic stays in the dtype of the inputs, which lets
convergence studies run in ``np.longdouble``.
"""

import numpy as np


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a pivot cannot be inverted; ``index`` is the offending row."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"singular block pivot at row {index}")


def _result_dtype(*arrays):
    dt = np.result_type(*arrays)
    return dt if np.issubdtype(dt, np.floating) else np.dtype(float)


def _inv2(a, index, tol):
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) <= tol:
        raise SingularSystemError(index)
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]], dtype=a.dtype) / det


def block_thomas(lower, diag, upper, rhs):
    """Solve a block-tridiagonal system with 2x2 blocks.

    Parameters
    ----------
    lower, diag, upper : array_like, shape (n, 2, 2)
        Sub-, main and super-diagonal blocks. ``lower[0]`` and ``upper[-1]``
        are ignored.
    rhs : array_like, shape (n, 2) or (n, 2, k)
        Right-hand side; a trailing axis carries several right-hand sides.

    Returns
    -------
    ndarray
        Solution with the same shape as ``rhs``.

    Raises
    ------
    SingularSystemError
        If an eliminated pivot block is numerically singular.
    """
    dt = _result_dtype(lower, diag, upper, rhs)
    lower = np.asarray(lower, dtype=dt)
    diag = np.asarray(diag, dtype=dt)
    upper = np.asarray(upper, dtype=dt)
    rhs = np.asarray(rhs, dtype=dt)
    squeeze = rhs.ndim == 2
    if squeeze:
        rhs = rhs[..., None]
    n = diag.shape[0]
    if diag.shape[1:] != (2, 2) or rhs.shape[:2] != (n, 2):
        raise ValueError(f"expected {n} blocks of size 2, got rhs shape {rhs.shape}")

    tol = 1e-14 * max(float(np.abs(diag).max()), 1.0) ** 2
    c_prime = np.empty_like(upper)
    d_prime = np.empty_like(rhs)
    for i in range(n):
        if i == 0:
            inv = _inv2(diag[0], 0, tol)
            d_prime[0] = inv @ rhs[0]
        else:
            inv = _inv2(diag[i] - lower[i] @ c_prime[i - 1], i, tol)
            d_prime[i] = inv @ (rhs[i] - lower[i] @ d_prime[i - 1])
        c_prime[i] = inv @ upper[i]

    x = np.empty_like(rhs)
    x[-1] = d_prime[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d_prime[i] - c_prime[i] @ x[i + 1]
    return x[..., 0] if squeeze else x


def small_solve(a, b):
    """Gaussian elimination with partial pivoting in the dtype of ``a``.

    For the handful of tiny dense systems (capacitance matrices) where
    ``np.linalg`` would force a cast to double precision.
    """
    a = np.array(a)
    b = np.array(b, dtype=a.dtype)
    n = a.shape[0]
    scale = max(float(np.abs(a).max()), np.finfo(float).tiny)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) <= 1e-14 * scale:
            raise SingularSystemError(k, f"singular dense system at column {k}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = a[k + 1:, k] / a[k, k]
        a[k + 1:] -= np.outer(f, a[k])
        b[k + 1:] -= np.multiply.outer(f, b[k])
    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def cyclic_block_thomas(lower, diag, upper, rhs):
    """Solve a periodic block-tridiagonal system with 2x2 blocks.

    ``lower[0]`` couples row 0 to the last unknown and ``upper[-1]`` couples
    the last row to unknown 0. The two corner blocks are removed with a
    rank-4 Woodbury correction on top of :func:`block_thomas`.
    """
    dt = _result_dtype(lower, diag, upper, rhs)
    lower = np.asarray(lower, dtype=dt)
    upper = np.asarray(upper, dtype=dt)
    rhs = np.asarray(rhs, dtype=dt)
    n = len(rhs)
    if n < 3:
        raise ValueError("periodic block system needs at least 3 block rows")

    # A = T + P Q^T, P selects the first and last block rows
    P = np.zeros((n, 2, 4), dtype=dt)
    P[0, :, :2] = np.eye(2)
    P[-1, :, 2:] = np.eye(2)
    QT = np.zeros((4, n, 2), dtype=dt)
    QT[:2, -1, :] = lower[0]
    QT[2:, 0, :] = upper[-1]
    QT = QT.reshape(4, 2 * n)

    stacked = np.concatenate([rhs.reshape(n, 2, 1), P], axis=2)
    sol = block_thomas(lower, diag, upper, stacked).reshape(2 * n, 5)
    y, Z = sol[:, 0], sol[:, 1:]
    capacitance = np.eye(4, dtype=dt) + QT @ Z
    try:
        corr = small_solve(capacitance, QT @ y)
    except SingularSystemError as exc:
        raise SingularSystemError(n - 1, "singular periodic corner correction") from exc
    return (y - Z @ corr).reshape(n, 2)
