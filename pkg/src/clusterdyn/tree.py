"""Textbook kinematic-tree algorithms: ABA, RNEA and CRBA.

These ignore loop constraints entirely.  They serve as the reference for the
loop-free degenerate case, as the building blocks of the dense oracle, and as
the engine of the approximate (armature) model.  All three accept float or
counted arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .joints import TreeJointSpec, jcalc
from .model import Model
from .spatial import SpatialInertia, cross_force, cross_motion


def _dt(*arrays):
    for a in arrays:
        if isinstance(a, np.ndarray) and a.dtype == object:
            return object
    return float


@dataclass
class TreeModel:
    parent: list                # parent[i] for i = 1..n (index 0 unused)
    joints: list                # TreeJointSpec per body, index 0 unused
    X_T: list
    inertia: list               # 6 x 6 matrices
    armature: np.ndarray = field(default=None)
    names: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.parent) - 1

    @classmethod
    def from_model(cls, model: Model) -> "TreeModel":
        return cls([-1] + [b.parent for b in model.bodies],
                   [None] + [b.joint for b in model.bodies],
                   [None] + [b.X_T for b in model.bodies],
                   [None] + [b.inertia.matrix() for b in model.bodies],
                   np.zeros(model.n), [b.name for b in model.bodies])

    @classmethod
    def build(cls, parents, joints, X_T, inertias, armature=None, names=None):
        n = len(parents)
        inert = [I.matrix() if isinstance(I, SpatialInertia) else np.asarray(I)
                 for I in inertias]
        return cls([-1] + list(parents), [None] + list(joints), [None] + list(X_T),
                   [None] + inert,
                   np.zeros(n) if armature is None else np.asarray(armature, dtype=float),
                   list(names) if names is not None else [str(i + 1) for i in range(n)])


def _a0(gravity, dt):
    a0 = np.zeros(6, dtype=dt)
    a0[3:] = -np.asarray(gravity, dtype=float)
    return a0


def tree_aba(tm: TreeModel, q, qd, tau, gravity=(0.0, 0.0, -9.81)):
    """Forward dynamics ``qdd`` of a kinematic tree (with optional armature)."""
    n = tm.n
    dt = _dt(q, qd, tau)
    Xup = [None] * (n + 1)
    S = [None] * (n + 1)
    v = [np.zeros(6, dtype=dt)] + [None] * n
    c = [None] * (n + 1)
    IA = [None] * (n + 1)
    pA = [None] * (n + 1)
    for i in range(1, n + 1):
        jk = jcalc(tm.joints[i], q[i - 1])
        Xup[i] = jk.X_J.compose(tm.X_T[i])
        S[i] = jk.S[:, 0]
        vJ = S[i] * qd[i - 1]
        v[i] = Xup[i].apply_motion(v[tm.parent[i]]) + vJ if tm.parent[i] else vJ
        c[i] = cross_motion(v[i], vJ)
        IA[i] = np.array(tm.inertia[i], dtype=dt)
        pA[i] = cross_force(v[i], IA[i] @ v[i])
    U = [None] * (n + 1)
    d = [None] * (n + 1)
    u = [None] * (n + 1)
    arm = tm.armature
    for i in range(n, 0, -1):
        U[i] = IA[i] @ S[i]
        d[i] = S[i] @ U[i]
        if arm is not None and arm[i - 1] != 0.0:
            d[i] = d[i] + arm[i - 1]
        u[i] = tau[i - 1] - S[i] @ pA[i]
        p = tm.parent[i]
        if p:
            Ia = IA[i] - np.outer(U[i], U[i] / d[i])
            pa = pA[i] + Ia @ c[i] + U[i] * (u[i] / d[i])
            IA[p] = IA[p] + Xup[i].congruence(Ia)
            pA[p] = pA[p] + Xup[i].apply_transpose(pa)
    a = [_a0(gravity, dt)] + [None] * n
    qdd = np.zeros(n, dtype=dt)
    for i in range(1, n + 1):
        ap = Xup[i].apply_motion(a[tm.parent[i]]) + c[i]
        qdd[i - 1] = (u[i] - U[i] @ ap) / d[i]
        a[i] = ap + S[i] * qdd[i - 1]
    return qdd


def tree_rnea(tm: TreeModel, q, qd, qdd, gravity=(0.0, 0.0, -9.81), return_forces=False):
    """Inverse dynamics ``tau`` of a kinematic tree (with optional armature)."""
    n = tm.n
    dt = _dt(q, qd, qdd)
    Xup = [None] * (n + 1)
    S = [None] * (n + 1)
    v = [np.zeros(6, dtype=dt)] + [None] * n
    a = [_a0(gravity, dt)] + [None] * n
    f = [None] * (n + 1)
    for i in range(1, n + 1):
        jk = jcalc(tm.joints[i], q[i - 1])
        Xup[i] = jk.X_J.compose(tm.X_T[i])
        S[i] = jk.S[:, 0]
        vJ = S[i] * qd[i - 1]
        p = tm.parent[i]
        v[i] = Xup[i].apply_motion(v[p]) + vJ if p else vJ
        a[i] = Xup[i].apply_motion(a[p]) + S[i] * qdd[i - 1] + cross_motion(v[i], vJ)
        I = tm.inertia[i]
        f[i] = I @ a[i] + cross_force(v[i], I @ v[i])
    tau = np.zeros(n, dtype=dt)
    arm = tm.armature
    for i in range(n, 0, -1):
        tau[i - 1] = S[i] @ f[i]
        if arm is not None and arm[i - 1] != 0.0:
            tau[i - 1] = tau[i - 1] + arm[i - 1] * qdd[i - 1]
        p = tm.parent[i]
        if p:
            f[p] = f[p] + Xup[i].apply_transpose(f[i])
    if return_forces:
        return tau, f[1:]
    return tau


def crba(tm: TreeModel, q):
    """Joint-space inertia matrix by composite-rigid-body accumulation.

    Entries between bodies on different branches are never touched and stay
    exact zeros, which keeps counted factorizations honest about sparsity.
    """
    n = tm.n
    dt = _dt(q)
    Xup = [None] * (n + 1)
    S = [None] * (n + 1)
    for i in range(1, n + 1):
        jk = jcalc(tm.joints[i], q[i - 1])
        Xup[i] = jk.X_J.compose(tm.X_T[i])
        S[i] = jk.S[:, 0]
    IC = [None] + [np.array(tm.inertia[i], dtype=dt) for i in range(1, n + 1)]
    for i in range(n, 0, -1):
        p = tm.parent[i]
        if p:
            IC[p] = IC[p] + Xup[i].congruence(IC[i])
    H = np.zeros((n, n), dtype=dt)
    arm = tm.armature
    for i in range(1, n + 1):
        F = IC[i] @ S[i]
        H[i - 1, i - 1] = S[i] @ F
        if arm is not None and arm[i - 1] != 0.0:
            H[i - 1, i - 1] = H[i - 1, i - 1] + arm[i - 1]
        j = i
        while tm.parent[j]:
            F = Xup[j].apply_transpose(F)
            j = tm.parent[j]
            H[i - 1, j - 1] = S[j] @ F
            H[j - 1, i - 1] = H[i - 1, j - 1]
    return H


def spanning_tree_model(model: Model) -> TreeModel:
    return TreeModel.from_model(model)


def random_tree(rng, n, branching=0.3) -> TreeModel:
    """Random loop-free tree with mixed revolute/prismatic joints."""
    from .spatial import random_inertia, random_transform

    parents, joints, X_T, inertias = [], [], [], []
    for i in range(1, n + 1):
        p = 0 if i == 1 else (int(rng.integers(0, i)) if rng.random() < branching else i - 1)
        parents.append(p)
        kind = "revolute" if rng.random() < 0.8 else "prismatic"
        ax = rng.standard_normal(3)
        joints.append(TreeJointSpec(kind, tuple(ax / np.linalg.norm(ax))))
        X_T.append(random_transform(rng))
        inertias.append(random_inertia(rng))
    return TreeModel.build(parents, joints, X_T, inertias)


__all__ = ["TreeModel", "tree_aba", "tree_rnea", "crba", "spanning_tree_model", "random_tree"]
