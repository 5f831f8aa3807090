"""Dense constrained forward dynamics via a proximally regularized KKT system.

Sign convention: the multipliers satisfy ``H qdd + c + K^T lam = tau``.
Each proximal step solves

    [ H   K^T ] [ qdd     ]   [ tau - c          ]
    [ K  -mu 1] [ lam_new ] = [ k - mu lam_old   ]

so ``K qdd - k = mu (lam_new - lam_old)`` vanishes as the iteration settles.
On float input the KKT matrix is LU-factored once with scipy; on counted
input a generic LDL^T (quasi-definite, no pivoting) is used with the joint
variables ordered leaves first and the multipliers last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linalg import ldlt_factor, ldlt_solve
from .model import Model, stacked_K
from .tree import TreeModel, crba, tree_rnea

GRAVITY = (0.0, 0.0, -9.81)


class KKTConvergenceError(RuntimeError):
    def __init__(self, residual, iterations):
        super().__init__(f"proximal KKT iteration did not converge: residual {residual:.3e} "
                         f"after {iterations} iterations")
        self.residual = residual


@dataclass
class DenseDynamics:
    H: np.ndarray
    c: np.ndarray
    K: np.ndarray
    k: np.ndarray


@dataclass
class KKTResult:
    qdd: np.ndarray
    lam: np.ndarray
    iterations: int
    residual: float


def _dt(*arrays):
    for a in arrays:
        if isinstance(a, np.ndarray) and a.dtype == object:
            return object
    return float


def mass_matrix(model: Model, q, tm: TreeModel | None = None):
    return crba(TreeModel.from_model(model) if tm is None else tm, q)


def bias_force(model: Model, q, qd, gravity=GRAVITY, tm: TreeModel | None = None):
    tm = TreeModel.from_model(model) if tm is None else tm
    return tree_rnea(tm, q, qd, np.zeros(model.n), gravity)


def constraint_stack(model: Model, q, qd):
    """Stacked implicit ``K, k`` of every loop constraint in spanning columns."""
    dt = _dt(q, qd)
    Ks, ks = [], []
    for c in model.clusters:
        if not c.constraints:
            continue
        idx = [b - 1 for b in c.bodies]
        qc, qdc = q[idx], qd[idx]
        blocks, kk = [], []
        for con in c.constraints:
            loc = [c.index(b) for b in con.coords]
            impl = con.implicit(qc[loc], qdc[loc])
            blocks.append(impl.K)
            kk.append(impl.k)
        Kc = stacked_K(c, blocks, dtype=dt)
        Kfull = np.zeros((Kc.shape[0], model.n), dtype=dt)
        Kfull[:, idx] = Kc
        Ks.append(Kfull)
        ks.append(np.concatenate(kk))
    if not Ks:
        return np.zeros((0, model.n), dtype=dt), np.zeros(0, dtype=dt)
    return np.vstack(Ks), np.concatenate(ks)


def dense_dynamics(model: Model, q, qd, gravity=GRAVITY, tm=None) -> DenseDynamics:
    tm = TreeModel.from_model(model) if tm is None else tm
    H = crba(tm, q)
    c = tree_rnea(tm, q, qd, np.zeros(model.n), gravity)
    K, k = constraint_stack(model, q, qd)
    return DenseDynamics(H, c, K, k)


def kkt_forward_dynamics(model: Model, q, qd, tau_tree, gravity=GRAVITY, mu=1e-8, tol=1e-12,
                         max_iter=25, tm=None, extra_rows=None) -> KKTResult:
    """Constrained ``qdd`` and multipliers from the regularized KKT system.

    Stops once ``|K qdd - k|_inf <= tol (1 + |k|_inf + |K|_inf |qdd|_inf)``;
    still failing after ``max_iter`` proximal steps raises
    :class:`KKTConvergenceError` carrying the residual.
    ``extra_rows`` (``K_extra, k_extra``) appends rows, e.g. duplicates.
    """
    dd = dense_dynamics(model, q, qd, gravity, tm)
    H, c, K, k = dd.H, dd.c, dd.K, dd.k
    if extra_rows is not None:
        K = np.vstack((K, extra_rows[0]))
        k = np.concatenate((k, extra_rows[1]))
    n, r = H.shape[0], K.shape[0]
    dt = _dt(H, c, K, k, np.asarray(tau_tree))
    rhs_top = np.asarray(tau_tree) - c
    if r == 0:
        return KKTResult(_solve_free(H, rhs_top, dt), np.zeros(0), 0, 0.0)
    A = np.zeros((n + r, n + r), dtype=dt)
    A[:n, :n] = H
    A[:n, n:] = K.T
    A[n:, :n] = K
    for i in range(r):
        A[n + i, n + i] = -mu
    if dt is object:
        # leaves first, multipliers last: the tree part factors without fill
        order = list(range(n - 1, -1, -1)) + list(range(n, n + r))
        Ap = A[np.ix_(order, order)]
        L, d = ldlt_factor(Ap, rel_tol=0.0, definite=False)
        inv = np.argsort(order)

        def solve(b):
            return ldlt_solve(L, d, b[order])[inv]
    else:
        lu = scipy.linalg.lu_factor(A)

        def solve(b):
            return scipy.linalg.lu_solve(lu, b)
    lam = np.zeros(r, dtype=dt)
    Kf, kf = _floats(K), _floats(k)
    kscale = 1.0 + np.max(np.abs(kf))
    Knorm = np.max(np.sum(np.abs(Kf), axis=1))
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        sol = solve(np.concatenate((rhs_top, k - mu * lam)))
        qdd, lam = sol[:n], sol[n:]
        residual = float(np.max(np.abs(Kf @ _floats(qdd) - kf)))
        # scaled by |K||qdd| as well, so the test sits above the rounding floor
        if residual <= tol * (kscale + Knorm * float(np.max(np.abs(_floats(qdd))))):
            return KKTResult(qdd, lam, it, residual)
    raise KKTConvergenceError(residual, it)


def _floats(a):
    return np.array([float(x) for x in np.ravel(a)]).reshape(np.shape(a))


def _solve_free(H, b, dt):
    if dt is object:
        L, d = ldlt_factor(H[::-1, ::-1])
        return ldlt_solve(L, d, b[::-1])[::-1]
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), b)
