"""Tree-joint kinematics and loop-constraint evaluation.

Every tree joint here has one degree of freedom, so a body's spanning
coordinate is simply its joint coordinate.  Loop constraints are evaluated
over their own coordinate list ``coords`` (body ids, ascending) and return
implicit data ``phi, K, k`` with ``K qdd = k``.  The explicit form
``qd = G yd`` and ``qdd = G ydd + g`` is extracted numerically from ``K`` by
:func:`extract_explicit`, or supplied natively by constant transmissions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counting import values_of
from .linalg import SingularMatrixError, lu_factor, lu_solve
from .spatial import SpatialTransform, coord_rotation, cross3, cross_motion

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


class ConstraintError(ValueError):
    """Raised for ill-posed constraint data or independent-coordinate choices."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class TreeJointSpec:
    type: str
    axis: tuple

    def __post_init__(self):
        if self.type not in (REVOLUTE, PRISMATIC):
            raise ValueError(f"unsupported joint type {self.type!r}")
        a = np.asarray(self.axis, dtype=float)
        if a.shape != (3,) or not np.all(np.isfinite(a)) or np.linalg.norm(a) < 1e-9:
            raise ValueError(f"joint axis must be a nonzero 3-vector, got {self.axis!r}")
        object.__setattr__(self, "axis", tuple(a / np.linalg.norm(a)))

    @property
    def S(self):
        a = np.asarray(self.axis)
        s = np.zeros((6, 1))
        if self.type == REVOLUTE:
            s[:3, 0] = a
        else:
            s[3:, 0] = a
        return s


@dataclass
class JointKinematics:
    X_J: SpatialTransform
    S: np.ndarray
    Sring: np.ndarray


def joint_transform(spec: TreeJointSpec, q):
    if spec.type == REVOLUTE:
        return SpatialTransform(coord_rotation(spec.axis, q), np.zeros(3))
    a = np.asarray(spec.axis)
    return SpatialTransform(np.eye(3), np.array([a[0] * q, a[1] * q, a[2] * q],
                                                dtype=object if not isinstance(q, float) else float))


def jcalc(spec: TreeJointSpec, q, qd=None) -> JointKinematics:
    """Joint transform, motion subspace and its apparent derivative (zero here)."""
    S = spec.S
    return JointKinematics(joint_transform(spec, q), S, np.zeros_like(S))


@dataclass
class ImplicitConstraintEval:
    phi: np.ndarray
    K: np.ndarray
    k: np.ndarray


@dataclass
class ExplicitConstraintEval:
    G: np.ndarray
    g: np.ndarray
    condition: float = 1.0


def extract_explicit(K, k, independent, cond_limit=1e12) -> ExplicitConstraintEval:
    """Explicit ``G, g`` from implicit ``K, k`` for given independent columns.

    ``independent`` holds column positions of ``K``.  The remaining columns
    form ``K_d``, which must be square and invertible; it is factored by LU
    with partial pivoting.
    """
    n_l, n_f = K.shape
    ind = list(independent)
    dep = [j for j in range(n_f) if j not in set(ind)]
    if len(dep) != n_l:
        raise ConstraintError(
            f"invalid independent-coordinate selection: {len(dep)} dependent "
            f"coordinates for {n_l} constraint rows")
    obj = K.dtype == object or np.asarray(k).dtype == object
    dt = object if obj else float
    G = np.zeros((n_f, len(ind)), dtype=dt)
    g = np.zeros(n_f, dtype=dt)
    for c, j in enumerate(ind):
        G[j, c] = 1.0
    if n_l == 0:
        return ExplicitConstraintEval(G, g, 1.0)
    Kd = K[:, dep]
    try:
        LU, perm, cond = lu_factor(Kd, cond_limit)
    except SingularMatrixError as exc:
        raise ConstraintError(
            f"invalid independent-coordinate selection (condition estimate {exc.condition:.3e})",
            exc.condition) from None
    Ki = K[:, ind]
    for c in range(len(ind)):
        col = lu_solve(LU, perm, Ki[:, c])
        for r, j in enumerate(dep):
            G[j, c] = -col[r]
    gd = lu_solve(LU, perm, k)
    for r, j in enumerate(dep):
        g[j] = gd[r]
    return ExplicitConstraintEval(G, g, cond)


class LoopConstraint:
    """Base class: a constraint over the joint coordinates in ``coords``."""

    kind = "abstract"
    coords: tuple = ()
    independent: tuple = ()
    n_rows = 0
    constant = False   # K constant, k = 0

    @property
    def involved(self):
        return set(self.coords)

    @property
    def dependent(self):
        return tuple(c for c in self.coords if c not in set(self.independent))

    def implicit(self, q, qd) -> ImplicitConstraintEval:
        raise NotImplementedError

    def explicit(self, q, qd) -> ExplicitConstraintEval:
        impl = self.implicit(q, qd)
        pos = [self.coords.index(c) for c in self.independent]
        return extract_explicit(impl.K, impl.k, pos)

    def solve_dependents(self, q, tol=1e-12, max_iter=50):
        """Closure: adjust dependent coordinates of ``q`` so ``phi(q) = 0``."""
        q = np.array(q, dtype=float)
        dep = [self.coords.index(c) for c in self.dependent]
        zero = np.zeros_like(q)
        impl = self.implicit(q, zero)
        res = np.linalg.norm(impl.phi)
        for _ in range(max_iter):
            if res <= tol:
                return q
            step = np.linalg.lstsq(impl.K[:, dep], -impl.phi, rcond=None)[0]
            lam = 1.0
            while True:
                trial = q.copy()
                trial[dep] += lam * step
                t_impl = self.implicit(trial, zero)
                t_res = np.linalg.norm(t_impl.phi)
                if t_res < res or lam < 1e-6:
                    break
                lam *= 0.5
            q, impl, res = trial, t_impl, t_res
        if res <= tol:
            return q
        raise ConstraintError(f"closure did not converge (residual {res:.3e})")


class LinearTransmission(LoopConstraint):
    """Constant explicit constraint ``qd = G yd`` over ``coords``.

    ``G`` has one row per coordinate in ``coords`` and one column per entry
    of ``independent``; the rows of independent coordinates must be unit
    rows.  Positions satisfy ``q = G y`` so ``phi = K q``.
    """

    kind = "linear_transmission"
    constant = True

    def __init__(self, coords, G, independent):
        order = np.argsort(coords)
        self.coords = tuple(int(coords[i]) for i in order)
        G = np.asarray(G, dtype=float)[order]
        if G.ndim != 2 or G.shape[0] != len(self.coords):
            raise ConstraintError("transmission G must have one row per body")
        self.independent = tuple(sorted(int(c) for c in independent))
        if len(self.independent) != G.shape[1]:
            raise ConstraintError("transmission G needs one column per independent coordinate")
        ind_pos = [self.coords.index(c) for c in self.independent]
        # reorder columns to ascending independent ids as listed in the file
        listed = [int(c) for c in independent]
        G = G[:, [listed.index(c) for c in self.independent]]
        if not np.allclose(G[ind_pos], np.eye(len(ind_pos)), atol=1e-12):
            raise ConstraintError("rows of G at independent coordinates must form the identity")
        self.G = G
        self.n_rows = len(self.coords) - len(self.independent)
        K = []
        for d in self.dependent:
            row = np.zeros(len(self.coords))
            row[self.coords.index(d)] = 1.0
            row[ind_pos] -= G[self.coords.index(d)]
            K.append(row)
        self.K = np.array(K).reshape(self.n_rows, len(self.coords))

    def implicit(self, q, qd):
        qf = np.asarray(q)
        return ImplicitConstraintEval(self.K @ qf, self.K, np.zeros(self.n_rows))

    def explicit(self, q=None, qd=None):
        return ExplicitConstraintEval(self.G, np.zeros(len(self.coords)), 1.0)


class ChainedTransmission(LoopConstraint):
    """``sum(q over branch1) = eta * sum(q over branch2)``: one row."""

    kind = "chained_transmission"
    constant = True
    n_rows = 1

    def __init__(self, branch1, branch2, eta, independent=None):
        self.branch1 = tuple(int(b) for b in branch1)
        self.branch2 = tuple(int(b) for b in branch2)
        if not self.branch1 or not self.branch2 or set(self.branch1) & set(self.branch2):
            raise ConstraintError("chained transmission needs two disjoint nonempty branches")
        self.eta = float(eta)
        self.coords = tuple(sorted(self.branch1 + self.branch2))
        K = np.zeros((1, len(self.coords)))
        for b in self.branch1:
            K[0, self.coords.index(b)] = 1.0
        for b in self.branch2:
            K[0, self.coords.index(b)] -= self.eta
        self.K = K
        if independent is None:
            # highest-numbered coordinate with a nonzero K entry is dependent
            dep = max(c for c in self.coords if K[0, self.coords.index(c)] != 0.0)
            independent = [c for c in self.coords if c != dep]
        self.independent = tuple(sorted(int(c) for c in independent))

    def implicit(self, q, qd):
        return ImplicitConstraintEval(self.K @ np.asarray(q), self.K, np.zeros(1))


@dataclass(frozen=True)
class PathLink:
    body: int
    joint: TreeJointSpec
    X_T: SpatialTransform


class FourBar(LoopConstraint):
    """Planar revolute pin between a connecting rod and a target body.

    ``rod_path`` and ``target_path`` list the tree joints from the common
    ancestor frame down to the rod and to the target.  The constraint keeps
    the in-plane components of the two pin points equal, giving two rows.
    """

    kind = "four_bar"

    def __init__(self, rod_path, target_path, pin_rod, pin_target, independent=None):
        self.rod_path = tuple(rod_path)
        self.target_path = tuple(target_path)
        self.pin_rod = np.asarray(pin_rod, dtype=float)
        self.pin_target = np.asarray(pin_target, dtype=float)
        self.coords = tuple(sorted(l.body for l in self.rod_path + self.target_path))
        self.n_rows = 2
        if len(self.coords) < 3:
            raise ConstraintError("four-bar closure needs at least three joints")
        self.normal = self._plane_normal()
        self.P = _plane_projector(self.normal)
        if independent is None:
            # crank input: the rod joint and the rocker joint are dependent
            if self.target_path:
                dep = {self.rod_path[-1].body, self.target_path[-1].body}
            else:
                dep = {l.body for l in self.rod_path[-2:]}
            independent = [c for c in self.coords if c not in dep]
        self.independent = tuple(sorted(int(c) for c in independent))
        if len(self.independent) != len(self.coords) - 2:
            raise ConstraintError("four-bar needs exactly two dependent coordinates")

    def _plane_normal(self):
        # joint axes expressed in the ancestor frame at q = 0
        normal = None
        for path in (self.rod_path, self.target_path):
            X = SpatialTransform()
            for link in path:
                X = link.X_T.compose(X)
                a = X.E.T @ np.asarray(link.joint.axis)
                if link.joint.type == REVOLUTE:
                    if normal is None:
                        normal = a
                    elif np.linalg.norm(np.cross(normal, a)) > 1e-9:
                        raise ConstraintError(
                            "unsupported topology: four-bar joint axes are not parallel")
                elif normal is not None and abs(a @ normal) > 1e-9:
                    raise ConstraintError("unsupported topology: prismatic axis leaves the plane")
        if normal is None:
            raise ConstraintError("four-bar closure needs a revolute joint")
        return normal / np.linalg.norm(normal)

    def _side(self, path, pin, q, qd):
        X = SpatialTransform()
        V = np.zeros(6)
        A0 = np.zeros(6)
        cols = []
        for link in path:
            i = self.coords.index(link.body)
            X = joint_transform(link.joint, q[i]).compose(link.X_T.compose(X))
            s = X.apply_inverse_motion(link.joint.S[:, 0])
            sq = s * qd[i]
            V = V + sq
            A0 = A0 + cross_motion(V, sq)
            cols.append((i, s))
        p = X.r + X.E.T @ pin
        w = V[:3]
        pd = V[3:] + cross3(w, p)
        bias = A0[3:] + cross3(A0[:3], p) + cross3(w, pd)
        return p, cols, bias

    def implicit(self, q, qd):
        obj = (isinstance(q, np.ndarray) and q.dtype == object) or \
            (isinstance(qd, np.ndarray) and qd.dtype == object)
        dt = object if obj else float
        pa, cols_a, bias_a = self._side(self.rod_path, self.pin_rod, q, qd)
        pb, cols_b, bias_b = self._side(self.target_path, self.pin_target, q, qd)
        K = np.zeros((2, len(self.coords)), dtype=dt)
        for i, s in cols_a:
            K[:, i] = self.P @ (s[3:] + cross3(s[:3], pa))
        for i, s in cols_b:
            K[:, i] = -(self.P @ (s[3:] + cross3(s[:3], pb)))
        phi = self.P @ (pa - pb)
        k = -(self.P @ (bias_a - bias_b))
        return ImplicitConstraintEval(np.asarray(phi, dtype=dt), K, np.asarray(k, dtype=dt))


def _plane_projector(n):
    for k in range(3):
        if abs(abs(n[k]) - 1.0) < 1e-12:
            rows = [e for e in range(3) if e != k]
            P = np.zeros((2, 3))
            P[0, rows[0]] = 1.0
            P[1, rows[1]] = 1.0
            return P
    e1 = np.cross(n, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 0.5:
        e1 = np.cross(n, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return np.vstack((e1, e2))


def constraint_residual(con: LoopConstraint, q, qd, qdd):
    impl = con.implicit(np.asarray(q, dtype=float), np.asarray(qd, dtype=float))
    return impl.K @ qdd - impl.k


def finite_difference_K(con: LoopConstraint, q, h=1e-6):
    """Central-difference Jacobian of ``phi`` for checking ``K``."""
    q = np.asarray(q, dtype=float)
    z = np.zeros_like(q)
    J = np.zeros((con.n_rows, len(q)))
    for j in range(len(q)):
        dq = np.zeros_like(q)
        dq[j] = h
        J[:, j] = (values_of(con.implicit(q + dq, z).phi)
                   - values_of(con.implicit(q - dq, z).phi)) / (2 * h)
    return J
