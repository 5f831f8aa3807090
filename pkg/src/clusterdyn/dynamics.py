"""Recursive dynamics over the cluster tree.

``cluster_aba`` is the constraint-embedding articulated-body algorithm and
``cluster_rnea`` the matching inverse dynamics.  Both work body by body: the
stacked cluster operators are never formed.  Block row ``i`` of the cluster
motion subspace is built as ``Sk_i = S_i G_i + X_{i,lambda(i)} Sk_{lambda(i)}``
and sums over ``X_{i,o}^T`` are accumulated from the cluster's leaves, which
is how the block-triangular structure of the propagators is exploited.

Independent coordinates ``y`` are concatenated cluster by cluster in cluster
order (see :meth:`Model.independent_indices`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import cluster_explicit, cluster_slice, solve_cluster_closure
from .joints import ConstraintError, jcalc
from .linalg import SingularMatrixError, ldlt_factor, ldlt_solve
from .model import Model, ModelError
from .spatial import cross_force, cross_motion
from .tree import TreeModel, tree_aba, tree_rnea

GRAVITY = (0.0, 0.0, -9.81)


class SingularClusterError(np.linalg.LinAlgError):
    def __init__(self, cluster_id, message):
        super().__init__(f"cluster {cluster_id}: singular D = S^T I^A S ({message})")
        self.cluster_id = cluster_id


@dataclass
class DynamicsState:
    """Positions, velocities and forces in spanning or independent coordinates.

    Give ``q`` or ``y``, ``qd`` or ``yd``, and (for forward dynamics) ``tau_tree``
    or ``tau``.  For inverse dynamics give ``ydd`` or ``qdd``.
    """

    q: np.ndarray | None = None
    qd: np.ndarray | None = None
    y: np.ndarray | None = None
    yd: np.ndarray | None = None
    tau_tree: np.ndarray | None = None
    tau: np.ndarray | None = None
    ydd: np.ndarray | None = None
    qdd: np.ndarray | None = None
    q_guess: np.ndarray | None = None

    def dtype(self):
        for a in (self.q, self.qd, self.y, self.yd, self.tau_tree, self.tau, self.ydd, self.qdd):
            if isinstance(a, np.ndarray) and a.dtype == object:
                return object
        return float


@dataclass
class AbaResult:
    ydd: np.ndarray
    qdd: np.ndarray


class Workspace:
    """Per-evaluation scratch, sized once per model and reset between calls."""

    def __init__(self, model: Model):
        self.model = model
        n = model.n
        self.n = n
        self.y_slices = []
        off = 0
        for c in model.clusters:
            self.y_slices.append(slice(off, off + c.m))
            off += c.m
        self.n_y = off
        self.ind_pos = [[c.index(b) for b in c.independent] for c in model.clusters]
        self.sl = [cluster_slice(c) for c in model.clusters]
        self.reset()

    def reset(self):
        n, nc = self.n, len(self.model.clusters)
        self.Xup = [None] * (n + 1)
        self.S = [None] * (n + 1)
        self.Sk = [None] * (n + 1)
        self.v = [None] * (n + 1)
        self.e = [None] * (n + 1)       # local bias S_i g_i + v_i x S_i qd_i
        self.c = [None] * (n + 1)       # block row of the velocity product
        self.IA = [None] * (n + 1)
        self.pA = [None] * (n + 1)
        self.U = [None] * (n + 1)
        self.a = [None] * (n + 1)
        self.G = [None] * nc
        self.g = [None] * nc
        self.qc = [None] * nc
        self.qdc = [None] * nc
        self.D = [None] * nc
        self.u = [None] * nc
        self.ydd = [None] * nc
        self.qdd = [None] * nc


def _coords(model, ci, c, state, ws):
    """Spanning position/velocity of one cluster and its ``G, g`` (Alg. 1 conversions)."""
    if state.q is not None:
        qc = state.q[ws.sl[ci]]
    else:
        yc = state.y[ws.y_slices[ci]]
        if c.constant:
            qc = c.G0 @ yc
        else:
            guess = np.zeros(c.n_f) if state.q_guess is None else \
                np.asarray(state.q_guess, dtype=float)[ws.sl[ci]]
            guess[ws.ind_pos[ci]] = [float(x) for x in yc]
            qc = solve_cluster_closure(c, guess)
            if state.dtype() is object:
                qc = qc.astype(object)
                qc[ws.ind_pos[ci]] = yc
    if state.qd is not None:
        qdc = state.qd[ws.sl[ci]]
        ex = cluster_explicit(c, qc, qdc)
    else:
        ydc = state.yd[ws.y_slices[ci]]
        if c.constant:
            ex = cluster_explicit(c, qc, ydc)
            qdc = ex.G @ ydc
        else:
            G = cluster_explicit(c, qc, np.zeros(c.n_f)).G
            qdc = G @ ydc
            ex = cluster_explicit(c, qc, qdc)
    return qc, qdc, ex.G, ex.g


def _outward(model, state, ws, gravity, dt, need_inertia):
    v = ws.v
    for ci, c in enumerate(model.clusters):
        qc, qdc, G, g = _coords(model, ci, c, state, ws)
        ws.qc[ci], ws.qdc[ci], ws.G[ci], ws.g[ci] = qc, qdc, G, g
        for li, b in enumerate(c.bodies):
            body = model.body(b)
            jk = jcalc(body.joint, qc[li])
            X = jk.X_J.compose(body.X_T)
            ws.Xup[b] = X
            s = jk.S[:, 0]
            ws.S[b] = s
            lp = c.local_parent[li]
            Sk = np.outer(s, G[li])
            if lp >= 0:
                Sk = Sk + X.apply_motion_cols(ws.Sk[c.bodies[lp]])
            ws.Sk[b] = Sk
            vJ = s * qdc[li]
            p = body.parent
            v[b] = X.apply_motion(v[p]) + vJ if p else vJ
            e = cross_motion(v[b], vJ)
            if not c.constant:
                e = e + s * g[li]
            ws.e[b] = e
            ws.c[b] = X.apply_motion(ws.c[c.bodies[lp]]) + e if lp >= 0 else e
            if need_inertia:
                I = np.array(model.I6[b], dtype=dt)
                ws.IA[b] = I
                ws.pA[b] = cross_force(v[b], I @ v[b])


def _factor(D, cid):
    try:
        if D.shape[0] == 1:
            if not float(D[0, 0]) > 0.0:
                raise SingularMatrixError(f"pivot {float(D[0, 0]):.3e}")
            return D
        return ldlt_factor(D)
    except SingularMatrixError as exc:
        raise SingularClusterError(cid, str(exc)) from None


def _solve(F, rhs):
    if isinstance(F, tuple):
        return ldlt_solve(F[0], F[1], rhs)
    return rhs / F[0, 0]


def _sym_update(IA, top, W, DinvWT):
    """``IA + (top - W D^-1 W^T)``; on object arrays only the upper triangle is formed."""
    if IA.dtype != object and top.dtype != object and W.dtype != object:
        return IA + (top - W @ DinvWT)
    out = np.empty((6, 6), dtype=object)
    for i in range(6):
        for j in range(i, 6):
            out[i, j] = out[j, i] = IA[i, j] + (top[i, j] - W[i] @ DinvWT[:, j])
    return out


def cluster_aba(model: Model, state: DynamicsState, gravity=GRAVITY, ws: Workspace | None = None):
    """Forward dynamics by the constraint-embedding articulated-body algorithm.

    Returns :class:`AbaResult` with ``ydd`` (independent) and ``qdd``
    (spanning, ``qdd = G ydd + g`` per cluster).
    """
    ws = Workspace(model) if ws is None else ws
    ws.reset()
    dt = state.dtype()
    ws.v[0] = np.zeros(6, dtype=dt)
    _outward(model, state, ws, gravity, dt, True)

    # inward pass: articulated inertias and bias forces
    clusters = model.clusters
    for ci in range(len(clusters) - 1, -1, -1):
        c = clusters[ci]
        G = ws.G[ci]
        if state.tau is not None:
            tau_c = state.tau[ws.y_slices[ci]]
        else:
            tau_c = G.T @ state.tau_tree[ws.sl[ci]]
        D = None
        u = tau_c
        for b in c.bodies:
            U = ws.IA[b] @ ws.Sk[b]
            ws.U[b] = U
            SkT = ws.Sk[b].T
            D = SkT @ U if D is None else D + SkT @ U
            u = u - SkT @ ws.pA[b]
        F = _factor(D, c.id)
        ws.D[ci], ws.u[ci] = F, u
        o = c.output
        if o == 0:
            continue
        n = c.n_f
        accI = [None] * n
        accP = [None] * n
        accW = [None] * n
        topI = topP = topW = None
        Uc = None
        for li in range(n - 1, -1, -1):
            b = c.bodies[li]
            IA = ws.IA[b]
            # ws.IA already holds contributions of deeper clusters at b
            aI = IA if accI[li] is None else IA + accI[li]
            aP = ws.pA[b] + IA @ ws.c[b]
            aP = aP if accP[li] is None else aP + accP[li]
            aW = ws.U[b] if accW[li] is None else ws.U[b] + accW[li]
            Uc = ws.U[b].T @ ws.c[b] if Uc is None else Uc + ws.U[b].T @ ws.c[b]
            X = ws.Xup[b]
            cI = X.congruence(aI)
            cP = X.apply_transpose(aP)
            cW = X.apply_transpose_cols(aW)
            lp = c.local_parent[li]
            if lp >= 0:
                accI[lp] = cI if accI[lp] is None else accI[lp] + cI
                accP[lp] = cP if accP[lp] is None else accP[lp] + cP
                accW[lp] = cW if accW[lp] is None else accW[lp] + cW
            else:
                topI = cI if topI is None else topI + cI
                topP = cP if topP is None else topP + cP
                topW = cW if topW is None else topW + cW
        ws.IA[o] = _sym_update(ws.IA[o], topI, topW, _solve(F, topW.T))
        ws.pA[o] = ws.pA[o] + (topP + topW @ _solve(F, u - Uc))

    # outward pass: accelerations
    a0 = np.zeros(6, dtype=dt)
    a0[3:] = -np.asarray(gravity, dtype=float)
    ws.a[0] = a0
    ydd_all, qdd_all = [], np.zeros(model.n, dtype=dt)
    for ci, c in enumerate(clusters):
        ap = [None] * c.n_f
        rhs = ws.u[ci]
        for li, b in enumerate(c.bodies):
            lp = c.local_parent[li]
            src = ws.a[c.output] if lp < 0 else ap[lp]
            ap[li] = ws.Xup[b].apply_motion(src) + ws.e[b]
            rhs = rhs - ws.U[b].T @ ap[li]
        ydd = _solve(ws.D[ci], rhs)
        for li, b in enumerate(c.bodies):
            ws.a[b] = ap[li] + ws.Sk[b] @ ydd
        qdd = ws.G[ci] @ ydd
        if not c.constant:
            qdd = qdd + ws.g[ci]
        ws.ydd[ci], ws.qdd[ci] = ydd, qdd
        ydd_all.append(ydd)
        qdd_all[ws.sl[ci]] = qdd
    return AbaResult(np.concatenate(ydd_all), qdd_all)


def cluster_rnea(model: Model, state: DynamicsState, gravity=GRAVITY,
                 ws: Workspace | None = None, return_forces=False):
    """Inverse dynamics over the cluster tree: ``tau_k = S_k^T f^J_k``.

    ``state`` supplies ``ydd`` (or a feasible spanning ``qdd``).  With
    ``return_forces`` the per-body cluster-joint force stacks are returned too.
    """
    ws = Workspace(model) if ws is None else ws
    ws.reset()
    dt = state.dtype()
    ws.v[0] = np.zeros(6, dtype=dt)
    _outward(model, state, ws, gravity, dt, False)
    a0 = np.zeros(6, dtype=dt)
    a0[3:] = -np.asarray(gravity, dtype=float)
    a = ws.a
    a[0] = a0
    f = [None] * (model.n + 1)
    for ci, c in enumerate(model.clusters):
        if state.ydd is not None:
            ydd = state.ydd[ws.y_slices[ci]]
        else:
            ydd = state.qdd[ws.sl[ci]][ws.ind_pos[ci]]
        ws.ydd[ci] = ydd
        Gy = ws.G[ci] @ ydd
        for li, b in enumerate(c.bodies):
            lp = c.local_parent[li]
            src = a[c.output] if lp < 0 else a[c.bodies[lp]]
            # block row of a_k = X_M a_parent + S_k ydd + Sdot ydot, unrolled
            # through Sk_i = S_i G_i + X Sk_lp
            a[b] = ws.Xup[b].apply_motion(src) + ws.S[b] * Gy[li] + ws.e[b]
            I = model.I6[b]
            f[b] = I @ a[b] + cross_force(ws.v[b], I @ ws.v[b])
    taus = [None] * len(model.clusters)
    for ci in range(len(model.clusters) - 1, -1, -1):
        c = model.clusters[ci]
        tau = None
        for b in c.bodies:
            t = ws.Sk[b].T @ f[b]
            tau = t if tau is None else tau + t
        taus[ci] = tau
        o = c.output
        if o == 0:
            continue
        acc = [None] * c.n_f
        top = None
        for li in range(c.n_f - 1, -1, -1):
            b = c.bodies[li]
            fb = f[b] if acc[li] is None else f[b] + acc[li]
            t = ws.Xup[b].apply_transpose(fb)
            lp = c.local_parent[li]
            if lp >= 0:
                acc[lp] = t if acc[lp] is None else acc[lp] + t
            else:
                top = t if top is None else top + t
        f[o] = f[o] + top
    tau = np.concatenate(taus)
    if return_forces:
        return tau, f[1:]
    return tau


# ---------------------------------------------------------------------------
# approximate (armature) model

@dataclass
class ReducedTree:
    tree: TreeModel
    kept: list          # original body ids kept, ascending
    y_order: list       # for each kept body, its position in the y vector


def _kept_bodies(model: Model):
    rotors = {b.id for b in model.bodies if b.rotor}
    for c in model.clusters:
        if not c.constraints:
            continue
        if not c.constant:
            raise ModelError(
                f"unsupported: cluster {c.id} is not a linear transmission cluster")
        dep = set(c.bodies) - set(c.independent)
        if dep != rotors & set(c.bodies):
            raise ModelError(
                f"unsupported: cluster {c.id} dependents must be exactly its rotor bodies")
    for r in rotors:
        if model.tree.children[r]:
            raise ModelError(f"unsupported: rotor body {r} has children")
    kept = [b.id for b in model.bodies if b.id not in rotors]
    y_index = {b: k for k, b in enumerate(b for c in model.clusters for b in c.independent)}
    return rotors, kept, [y_index[b] for b in kept]


def _reduced(model: Model, lump: bool) -> ReducedTree:
    rotors, kept, y_order = _kept_bodies(model)
    new = {b: k + 1 for k, b in enumerate(kept)}
    parents, joints, X_T, inert = [], [], [], []
    for b in kept:
        body = model.body(b)
        parents.append(new[body.parent] if body.parent else 0)
        joints.append(body.joint)
        X_T.append(body.X_T)
        inert.append(body.inertia.matrix())
    arm = np.zeros(len(kept))
    if lump:
        for c in model.clusters:
            for r in set(c.bodies) & rotors:
                body = model.body(r)
                Ir = body.inertia.matrix()
                if body.parent:
                    # rotor inertia carried by its parent at the home pose
                    inert[new[body.parent] - 1] = inert[new[body.parent] - 1] + \
                        body.X_T.congruence(Ir)
                s = body.joint.S[:, 0]
                J = s @ Ir @ s
                row = c.G0[c.index(r)]
                for j, ind in enumerate(c.independent):
                    arm[new[ind] - 1] += J * row[j] ** 2
    names = [model.body(b).name for b in kept]
    return ReducedTree(TreeModel.build(parents, joints, X_T, inert, arm, names), kept, y_order)


def approximate_tree(model: Model) -> ReducedTree:
    """Rotors deleted; their inertia lumped into parents and reflected as armature."""
    return _reduced(model, lump=True)


def unconstrained_tree(model: Model) -> ReducedTree:
    """Rotors deleted with no compensation."""
    return _reduced(model, lump=False)


def _to_kept(red: ReducedTree, model: Model, spanning, independent):
    if spanning is not None:
        return np.asarray(spanning)[[b - 1 for b in red.kept]]
    return np.asarray(independent)[red.y_order]


def approximate_aba(model: Model, state: DynamicsState, gravity=GRAVITY, reduced=None):
    """Armature-approximate forward dynamics; returns ``ydd`` in y order."""
    red = approximate_tree(model) if reduced is None else reduced
    q = _to_kept(red, model, state.q, state.y)
    qd = _to_kept(red, model, state.qd, state.yd)
    if state.tau is not None:
        tau = np.asarray(state.tau)[red.y_order]
    else:
        # project spanning torques through the constant transmissions
        ws = Workspace(model)
        tau_y = np.concatenate([c.G0.T @ np.asarray(state.tau_tree)[ws.sl[ci]]
                                for ci, c in enumerate(model.clusters)])
        tau = tau_y[red.y_order]
    qdd = tree_aba(red.tree, q, qd, tau, gravity)
    out = np.zeros(len(qdd), dtype=qdd.dtype)
    out[red.y_order] = qdd
    return out


def sinusoid(A, omega, t):
    """``q = A sin(2 pi omega t)`` and its first two derivatives."""
    w = 2.0 * np.pi * omega
    return A * np.sin(w * t), A * w * np.cos(w * t), -A * w * w * np.sin(w * t)


def inverse_dynamics_error_experiment(model: Model, A=0.5, omega=1.5, dt=0.01, duration=None,
                                      gravity=GRAVITY):
    """Torque traces of exact, unconstrained and approximate inverse dynamics.

    Every independent coordinate follows the same sinusoid.  Returns a dict
    with ``t``, the three ``tau_*`` traces (T x m, y order) and RMS gaps
    relative to the exact traces.
    """
    duration = 1.0 / omega if duration is None else duration
    ts = np.arange(0.0, duration + 0.5 * dt, dt)
    red_a = approximate_tree(model)
    red_u = unconstrained_tree(model)
    ws = Workspace(model)
    m = ws.n_y
    exact, unc, appr = (np.zeros((len(ts), m)) for _ in range(3))
    for k, t in enumerate(ts):
        y, yd, ydd = (np.full(m, val) for val in sinusoid(A, omega, t))
        exact[k] = cluster_rnea(model, DynamicsState(y=y, yd=yd, ydd=ydd), gravity, ws)
        for red, out in ((red_u, unc), (red_a, appr)):
            o = red.y_order
            tau = tree_rnea(red.tree, y[o], yd[o], ydd[o], gravity)
            out[k, o] = tau
    rms = {
        "unconstrained": float(np.sqrt(np.mean((unc - exact) ** 2))),
        "approximate": float(np.sqrt(np.mean((appr - exact) ** 2))),
        "exact": 0.0,
    }
    per_joint = {
        "unconstrained": np.sqrt(np.mean((unc - exact) ** 2, axis=0)),
        "approximate": np.sqrt(np.mean((appr - exact) ** 2, axis=0)),
    }
    return {"t": ts, "tau_exact": exact, "tau_unconstrained": unc, "tau_approximate": appr,
            "rms": rms, "rms_per_joint": per_joint}


def kinetic_energy(model: Model, q, qd):
    """``0.5 sum v_i . I_i v_i`` from spanning positions and velocities."""
    from .cluster import tree_kinematics

    _, v = tree_kinematics(model, q, qd)
    return 0.5 * sum(v[b.id] @ b.inertia.matrix() @ v[b.id] for b in model.bodies)


__all__ = ["DynamicsState", "Workspace", "AbaResult", "SingularClusterError", "cluster_aba",
           "cluster_rnea", "approximate_aba", "approximate_tree", "unconstrained_tree",
           "inverse_dynamics_error_experiment", "kinetic_energy", "ConstraintError"]
