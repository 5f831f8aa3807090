"""Cluster joint model: stacked operators for one cluster at one state.

The recursive algorithms in :mod:`clusterdyn.dynamics` never form these
matrices; they work body by body.  This module builds the dense versions
(SPO, SPOF, motion subspace, velocity product, cluster transforms, force
subspaces) for differential testing and for the ``check`` command.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .joints import (ConstraintError, ExplicitConstraintEval, extract_explicit,
                     jcalc)
from .model import Cluster, Model, stacked_K
from .spatial import SpatialTransform, cross_motion_cols


def tree_kinematics(model: Model, q, qd):
    """Per-body ``X_{i,lambda(i)}`` and absolute body velocities."""
    n = model.n
    Xup = [SpatialTransform()] * (n + 1)
    v = [np.zeros(6)] * (n + 1)
    for b in model.bodies:
        jk = jcalc(b.joint, q[b.id - 1])
        Xup[b.id] = jk.X_J.compose(b.X_T)
        v[b.id] = Xup[b.id].apply_motion(v[b.parent]) + jk.S[:, 0] * qd[b.id - 1]
    return Xup, v


def cluster_slice(c: Cluster):
    return [b - 1 for b in c.bodies]


def cluster_explicit(c: Cluster, qc, qdc) -> ExplicitConstraintEval:
    """``G, g`` for a cluster from its constraints at cluster-local ``qc, qdc``."""
    if c.constant:
        obj = getattr(getattr(qdc, "dtype", None), "kind", "") == "O"
        return ExplicitConstraintEval(c.G0, np.zeros(c.n_f, dtype=object if obj else float))
    Ks, ks = [], []
    for con in c.constraints:
        idx = [c.index(b) for b in con.coords]
        impl = con.implicit(qc[idx], qdc[idx])
        Ks.append(impl.K)
        ks.append(impl.k)
    obj = any(K.dtype == object for K in Ks) or any(np.asarray(k).dtype == object for k in ks)
    K = stacked_K(c, Ks, dtype=object if obj else float)
    k = np.concatenate(ks)
    pos = [c.index(b) for b in c.independent]
    try:
        return extract_explicit(K, k, pos)
    except ConstraintError as exc:
        raise ConstraintError(f"cluster {c.id}: {exc}", exc.condition) from None


def cluster_implicit(c: Cluster, qc, qdc):
    """Stacked ``phi, K, k`` over all constraints of a cluster (float)."""
    if not c.constraints:
        return np.zeros(0), np.zeros((0, c.n_f)), np.zeros(0)
    phis, Ks, ks = [], [], []
    for con in c.constraints:
        idx = [c.index(b) for b in con.coords]
        impl = con.implicit(np.asarray(qc, dtype=float)[idx], np.asarray(qdc, dtype=float)[idx])
        phis.append(np.asarray(impl.phi, dtype=float))
        Ks.append(np.asarray(impl.K, dtype=float))
        ks.append(np.asarray(impl.k, dtype=float))
    return np.concatenate(phis), stacked_K(c, Ks), np.concatenate(ks)


def _constraint_complement(S):
    """Orthonormal 6 x 5 basis of the complement of a unit joint subspace."""
    Q, _ = np.linalg.qr(np.hstack((S, np.eye(6))))
    return Q[:, 1:6]


def nullspace(A, rtol=1e-10):
    """Orthonormal basis for the null space of ``A`` via SVD."""
    A = np.atleast_2d(A)
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    U, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > rtol * (s[0] if s.size else 1.0)))
    return Vt[rank:].T


@dataclass
class ClusterJointModel:
    cluster: Cluster
    Xup: list               # X_{i,lambda(i)} per cluster body
    X_out: list             # X_{i,o(k)} per cluster body
    SPO: np.ndarray
    SPOF: np.ndarray
    S_blocks: np.ndarray    # blockdiag(S_i), 6n x n
    G: np.ndarray
    g: np.ndarray
    S: np.ndarray
    Sdot_ydot: np.ndarray
    X_M: np.ndarray         # 6n x 6n_parent
    X_F: np.ndarray         # 6n_parent x 6n, the force dual
    P: np.ndarray
    T_a: np.ndarray
    T_c: np.ndarray


def spo_from_transforms(c: Cluster, X_out):
    """SPO with block (i, j) = X_{i,j} when j supports i inside the cluster."""
    n = c.n_f
    SPO = np.eye(6 * n)
    for i in range(n):
        j = c.local_parent[i]
        while j >= 0:
            X_ij = X_out[i].compose(X_out[j].inverse())
            SPO[6 * i:6 * i + 6, 6 * j:6 * j + 6] = X_ij.matrix()
            j = c.local_parent[j]
    return SPO


def spof_direct(c: Cluster, Xup):
    """SPOF: identity diagonal and ``-X_F`` from child j to parent i."""
    n = c.n_f
    SPOF = np.eye(6 * n)
    for j in range(n):
        i = c.local_parent[j]
        if i >= 0:
            SPOF[6 * i:6 * i + 6, 6 * j:6 * j + 6] = -Xup[j].matrix().T
    return SPOF


def cluster_joint_model(model: Model, c: Cluster, q, qd, kin=None) -> ClusterJointModel:
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    Xup_all, v_all = kin if kin is not None else tree_kinematics(model, q, qd)
    n = c.n_f
    sl = cluster_slice(c)
    qc, qdc = q[sl], qd[sl]
    Xup = [Xup_all[b] for b in c.bodies]
    X_out = []
    for i in range(n):
        lp = c.local_parent[i]
        X_out.append(Xup[i] if lp < 0 else Xup[i].compose(X_out[lp]))
    SPO = spo_from_transforms(c, X_out)
    SPOF = spof_direct(c, Xup)
    S_blocks = np.zeros((6 * n, n))
    crossS = np.zeros((6 * n, n))
    Tc_blocks = np.zeros((6 * n, 5 * n))
    for i, b in enumerate(c.bodies):
        S_i = model.body(b).joint.S
        S_blocks[6 * i:6 * i + 6, i] = S_i[:, 0]
        crossS[6 * i:6 * i + 6, i] = cross_motion_cols(v_all[b], S_i)[:, 0]
        Tc_blocks[6 * i:6 * i + 6, 5 * i:5 * i + 5] = _constraint_complement(S_i)
    ex = cluster_explicit(c, qc, qdc)
    G = np.asarray(ex.G, dtype=float)
    g = np.asarray(ex.g, dtype=float)
    S = SPO @ S_blocks @ G
    Sdot_ydot = SPO @ (S_blocks @ g + crossS @ qdc)
    # cluster transforms: only the output body's block column is nonzero
    parent = next((p for p in model.clusters if p.id == c.parent), None)
    n_par = parent.n_f if parent is not None else 1
    col = parent.index(c.output) if parent is not None else 0
    X_M = np.zeros((6 * n, 6 * n_par))
    for i in range(n):
        X_M[6 * i:6 * i + 6, 6 * col:6 * col + 6] = X_out[i].matrix()
    X_F = X_M.T
    if np.linalg.matrix_rank(G, tol=1e-10) < G.shape[1]:
        raise ConstraintError(f"cluster {c.id}: rank-deficient G")
    P = np.linalg.pinv(G.T)
    T_a = SPOF @ S_blocks @ P
    # the loop part of the constraint force lives in null(G^T)
    N = nullspace(G.T)
    T_c = np.hstack((SPOF @ Tc_blocks, SPOF @ S_blocks @ N))
    return ClusterJointModel(c, Xup, X_out, SPO, SPOF, S_blocks, G, g, S, Sdot_ydot,
                             X_M, X_F, P, T_a, T_c)


def duality_residuals(cj: ClusterJointModel) -> dict:
    """Max-abs residuals of the force/motion duality identities."""
    m = cj.S.shape[1]
    out = {
        "SPO^T SPOF - 1": np.max(np.abs(cj.SPO.T @ cj.SPOF - np.eye(cj.SPO.shape[0]))),
        "S^T T_a - 1": np.max(np.abs(cj.S.T @ cj.T_a - np.eye(m))),
        "S^T T_c": np.max(np.abs(cj.S.T @ cj.T_c)) if cj.T_c.size else 0.0,
        "G^T P - 1": np.max(np.abs(cj.G.T @ cj.P - np.eye(m))),
    }
    return {k: float(v) for k, v in out.items()}


def solve_cluster_closure(c: Cluster, qc, tol=1e-12, max_iter=50):
    """Damped Newton on the dependent coordinates so every ``phi`` vanishes.

    The independent entries of ``qc`` are held fixed; the remaining entries
    serve as the initial guess.
    """
    qc = np.array(qc, dtype=float)
    if not c.constraints:
        return qc
    dep = [i for i, b in enumerate(c.bodies) if b not in set(c.independent)]
    zero = np.zeros_like(qc)
    phi, K, _ = cluster_implicit(c, qc, zero)
    res = np.linalg.norm(phi)
    for _ in range(max_iter):
        if res <= tol:
            return qc
        step = np.linalg.lstsq(K[:, dep], -phi, rcond=None)[0]
        lam = 1.0
        while True:
            trial = qc.copy()
            trial[dep] += lam * step
            t_phi, t_K, _ = cluster_implicit(c, trial, zero)
            t_res = np.linalg.norm(t_phi)
            if t_res < res or lam < 1e-6:
                break
            lam *= 0.5
        qc, phi, K, res = trial, t_phi, t_K, t_res
    if res <= tol:
        return qc
    raise ConstraintError(f"cluster {c.id}: closure did not converge (residual {res:.3e})")
