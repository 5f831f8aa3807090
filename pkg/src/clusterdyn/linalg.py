"""Small dense factorizations that also run on counted (object) arrays.

numpy.linalg only handles float arrays, so the recursive algorithms use these
routines for their per-cluster solves.  Pivot tests and condition estimates
read the underlying float values and are not themselves counted.
"""

from __future__ import annotations

import numpy as np

from .counting import values_of


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message, condition=np.inf):
        super().__init__(message)
        self.condition = condition


def _dt(*arrays):
    for a in arrays:
        if isinstance(a, np.ndarray) and a.dtype == object:
            return object
    return float


def ldlt_factor(A, rel_tol=1e-12, definite=True):
    """``A = L diag(d) L^T`` for symmetric ``A`` without pivoting.

    With ``definite`` every pivot must exceed ``rel_tol`` times the largest
    diagonal magnitude; otherwise only its magnitude is tested, which suits
    quasi-definite saddle-point matrices.  Failures raise
    :class:`SingularMatrixError`.
    """
    n = A.shape[0]
    dt = _dt(A)
    L = np.zeros((n, n), dtype=dt)
    d = np.zeros(n, dtype=dt)
    scale = max(float(np.max(np.abs(np.diag(values_of(A))))), 0.0) if n else 0.0
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s = s - L[j, k] * L[j, k] * d[k]
        piv = float(s) if definite else abs(float(s))
        if not piv > rel_tol * scale:
            raise SingularMatrixError(
                f"pivot {float(s):.3e} at index {j} below {rel_tol:g} x {scale:.3e}")
        d[j] = s
        L[j, j] = 1.0
        inv = 1.0 / s
        for i in range(j + 1, n):
            t = A[i, j]
            for k in range(j):
                t = t - L[i, k] * L[j, k] * d[k]
            L[i, j] = t * inv
    return L, d


def ldlt_solve(L, d, b):
    """Solve ``L diag(d) L^T x = b``; ``b`` may be a vector or a matrix."""
    n = L.shape[0]
    x = np.array(b, dtype=_dt(L, d, b), copy=True)
    for i in range(n):
        for k in range(i):
            x[i] = x[i] - L[i, k] * x[k]
    for i in range(n):
        x[i] = x[i] / d[i]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            x[i] = x[i] - L[k, i] * x[k]
    return x


def solve_spd(A, b, rel_tol=1e-12):
    if A.shape[0] == 1:
        a = A[0, 0]
        if not float(a) > 0.0:
            raise SingularMatrixError(f"non-positive pivot {float(a):.3e}")
        return np.array(b, dtype=_dt(A, b)) / a
    L, d = ldlt_factor(A, rel_tol)
    return ldlt_solve(L, d, b)


def lu_factor(A, cond_limit=1e12):
    """LU with partial pivoting: ``A[perm] = L U`` packed in one array.

    The ratio of largest to smallest |pivot| serves as a cheap condition
    estimate; above ``cond_limit`` the matrix is treated as singular.
    """
    n = A.shape[0]
    LU = np.array(A, dtype=_dt(A), copy=True)
    perm = np.arange(n)
    pivots = []
    for j in range(n):
        col = np.abs(values_of(LU[j:, j]))
        p = j + int(np.argmax(col))
        if p != j:
            LU[[j, p]] = LU[[p, j]]
            perm[[j, p]] = perm[[p, j]]
        piv = LU[j, j]
        pivots.append(abs(float(piv)))
        if pivots[-1] == 0.0:
            raise SingularMatrixError("zero pivot", np.inf)
        inv = 1.0 / piv
        for i in range(j + 1, n):
            m = LU[i, j] * inv
            LU[i, j] = m
            for k in range(j + 1, n):
                LU[i, k] = LU[i, k] - m * LU[j, k]
    cond = max(pivots) / min(pivots) if n else 1.0
    if cond > cond_limit:
        raise SingularMatrixError(f"condition estimate {cond:.3e} exceeds {cond_limit:g}", cond)
    return LU, perm, cond


def lu_solve(LU, perm, b):
    n = LU.shape[0]
    b = np.asarray(b)
    x = np.array(b[perm], dtype=_dt(LU, b), copy=True)
    for i in range(n):
        for k in range(i):
            x[i] = x[i] - LU[i, k] * x[k]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            x[i] = x[i] - LU[i, k] * x[k]
        x[i] = x[i] / LU[i, i]
    return x
