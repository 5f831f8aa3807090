"""6D spatial vector algebra (Featherstone conventions, angular part first).

Motion and force vectors are plain length-6 numpy arrays: ``m = (w, v)`` and
``f = (n, f)``.  Every routine here accepts float arrays as well as object
arrays of :class:`~clusterdyn.counting.CountingScalar`, so the dynamics
kernels can be evaluated on either.

A :class:`SpatialTransform` is stored as the pair ``(E, r)`` and represents the
Plücker motion transform ``X = rot(E) @ xlt(r)`` from a frame P to a frame O,
where ``E`` rotates P coordinates into O coordinates and ``r`` is the position
of O's origin expressed in P.  The force transform is ``X^{-T}``.
"""

from __future__ import annotations

import numpy as np

from .counting import cos, sin

ORTHO_TOL = 1e-9


def _dt(*arrays):
    for a in arrays:
        if isinstance(a, np.ndarray) and a.dtype == object:
            return object
    return float


def cross3(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]], dtype=_dt(a, b))


def skew(v):
    z = 0.0
    return np.array([[z, -v[2], v[1]],
                     [v[2], z, -v[0]],
                     [-v[1], v[0], z]], dtype=_dt(v))


def _rot(c, s, axis_idx):
    dt = object if not isinstance(c, float) else float
    E = np.zeros((3, 3), dtype=dt)
    i, j = [(1, 2), (2, 0), (0, 1)][axis_idx]
    E[axis_idx, axis_idx] = 1.0
    E[i, i] = c
    E[j, j] = c
    E[i, j] = s
    E[j, i] = -s
    return E


def coord_rotation(axis, theta):
    """Coordinate rotation ``E`` for a frame turned by ``theta`` about ``axis``.

    ``E`` maps vectors from the unrotated frame into the rotated one, so it is
    the transpose of the usual active rotation matrix.  Coordinate axes give
    sparse matrices with exact zeros.
    """
    axis = np.asarray(axis, dtype=float)
    c, s = cos(theta), sin(theta)
    for k in range(3):
        if abs(abs(axis[k]) - 1.0) < 1e-15:
            if axis[k] > 0:
                return _rot(c, s, k)
            return _rot(c, -s, k)
    # Rodrigues: R = c*1 + s*[a]x + (1-c) a a^T; E = R^T
    n = axis / np.linalg.norm(axis)
    t = 1.0 - c
    dt = object if not isinstance(c, float) else float
    E = np.empty((3, 3), dtype=dt)
    for i in range(3):
        for j in range(3):
            val = t * (n[i] * n[j])
            if i == j:
                val = val + c
            E[i, j] = val
    # subtract the skew part (transpose of R flips its sign)
    E[0, 1] = E[0, 1] + s * n[2]
    E[1, 0] = E[1, 0] - s * n[2]
    E[0, 2] = E[0, 2] - s * n[1]
    E[2, 0] = E[2, 0] + s * n[1]
    E[1, 2] = E[1, 2] + s * n[0]
    E[2, 1] = E[2, 1] - s * n[0]
    return E


def rot_z(theta):
    return coord_rotation((0.0, 0.0, 1.0), theta)


def rot_x(theta):
    return coord_rotation((1.0, 0.0, 0.0), theta)


def rot_y(theta):
    return coord_rotation((0.0, 1.0, 0.0), theta)


class SpatialTransform:
    """Motion transform ``X = rot(E) xlt(r)``; see module docstring."""

    __slots__ = ("E", "r")

    def __init__(self, E=None, r=None, check=False):
        self.E = np.eye(3) if E is None else np.asarray(E)
        self.r = np.zeros(3) if r is None else np.asarray(r)
        if check:
            E = np.asarray(self.E, dtype=float)
            if (E.shape != (3, 3)
                    or np.max(np.abs(E.T @ E - np.eye(3))) > ORTHO_TOL
                    or abs(np.linalg.det(E) - 1.0) > ORTHO_TOL):
                raise ValueError("rotation is not orthonormal with det +1")
            if self.r.shape != (3,) or not np.all(np.isfinite(self.r.astype(float))):
                raise ValueError("translation must be a finite 3-vector")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def translation(cls, r):
        return cls(np.eye(3), np.asarray(r, dtype=float))

    @classmethod
    def rotation(cls, E):
        return cls(E, np.zeros(3))

    # application ------------------------------------------------------
    def apply_motion(self, m):
        """``X m``: w' = E w, v' = E (v - r x w)."""
        w = m[:3]
        return np.concatenate((self.E @ w, self.E @ (m[3:] - cross3(self.r, w))))

    def apply_force(self, f):
        """``X^{-T} f``: n' = E (n - r x f), f' = E f."""
        fl = f[3:]
        return np.concatenate((self.E @ (f[:3] - cross3(self.r, fl)), self.E @ fl))

    def apply_transpose(self, f):
        """``X^T f``: carries a force from frame O back to frame P."""
        fl = self.E.T @ f[3:]
        return np.concatenate((self.E.T @ f[:3] + cross3(self.r, fl), fl))

    def apply_inverse_motion(self, m):
        """``X^{-1} m``."""
        w = self.E.T @ m[:3]
        return np.concatenate((w, self.E.T @ m[3:] + cross3(self.r, w)))

    def apply_motion_cols(self, M):
        """``X M`` for a 6 x n matrix of motion columns."""
        W = self.E @ M[:3]
        V = self.E @ (M[3:] - skew(self.r) @ M[:3])
        return np.concatenate((W, V), axis=0)

    def apply_transpose_cols(self, F):
        """``X^T F`` for a 6 x n matrix of force columns."""
        Fl = self.E.T @ F[3:]
        return np.concatenate((self.E.T @ F[:3] + skew(self.r) @ Fl, Fl), axis=0)

    # algebra ----------------------------------------------------------
    def compose(self, inner: "SpatialTransform") -> "SpatialTransform":
        """``self @ inner``: apply ``inner`` first, then ``self``."""
        return SpatialTransform(self.E @ inner.E, inner.r + inner.E.T @ self.r)

    def __matmul__(self, inner):
        if isinstance(inner, SpatialTransform):
            return self.compose(inner)
        return self.apply_motion(inner)

    def inverse(self) -> "SpatialTransform":
        return SpatialTransform(self.E.T, -(self.E @ self.r))

    def matrix(self):
        """Dense 6 x 6 motion transform."""
        dt = _dt(self.E, self.r)
        X = np.zeros((6, 6), dtype=dt)
        X[:3, :3] = self.E
        X[3:, 3:] = self.E
        X[3:, :3] = -(self.E @ skew(self.r))
        return X

    def force_matrix(self):
        """Dense 6 x 6 force transform ``X^{-T}``."""
        dt = _dt(self.E, self.r)
        X = np.zeros((6, 6), dtype=dt)
        X[:3, :3] = self.E
        X[3:, 3:] = self.E
        X[:3, 3:] = -(self.E @ skew(self.r))
        return X

    def congruence(self, I):
        """``X^T I X`` for a symmetric 6 x 6 matrix ``I`` given in frame O.

        Returns the same inertia expressed in frame P, using 3 x 3 blocks so
        the rotation and the translation shift are applied separately.  On
        object arrays only the upper triangles of the symmetric blocks are
        formed, which is what an operation count should see.
        """
        E = self.E
        rx = skew(self.r)
        if _dt(E, self.r, I) is not object:
            A = E.T @ I[:3, :3] @ E
            B = E.T @ I[:3, 3:] @ E
            C = E.T @ I[3:, 3:] @ E
            BL = B.T - C @ rx
            TL = A - B @ rx + rx @ BL
            C = 0.5 * (C + C.T)
            return np.block([[0.5 * (TL + TL.T), BL.T], [BL, C]])
        A = _sym_congruence3(E, I[:3, :3])
        B = E.T @ I[:3, 3:] @ E
        C = _sym_congruence3(E, I[3:, 3:])
        BL = B.T - C @ rx
        # TL = A - B rx + rx BL is symmetric: form the upper triangle only
        Brx, rxBL = B @ rx, rx @ BL
        out = np.empty((6, 6), dtype=object)
        for i in range(3):
            for j in range(i, 3):
                out[i, j] = out[j, i] = A[i, j] - Brx[i, j] + rxBL[i, j]
        out[3:, :3] = BL
        out[:3, 3:] = BL.T
        out[3:, 3:] = C
        return out

    def __repr__(self):
        return f"SpatialTransform(E={self.E!r}, r={self.r!r})"


def _sym_congruence3(E, M):
    """Upper-triangle evaluation of the symmetric product ``E^T M E``."""
    N = M @ E
    out = np.empty((3, 3), dtype=object)
    for i in range(3):
        for j in range(i, 3):
            out[i, j] = out[j, i] = E[0, i] * N[0, j] + E[1, i] * N[1, j] + E[2, i] * N[2, j]
    return out


def xlt(r):
    return SpatialTransform.translation(r)


def rot(E):
    return SpatialTransform.rotation(E)


def crm(v):
    """Dense 6 x 6 motion cross-product operator ``v x``."""
    wx, vx = skew(v[:3]), skew(v[3:])
    Z = np.zeros((3, 3), dtype=_dt(v))
    return np.block([[wx, Z], [vx, wx]])


def crf(v):
    """Dense 6 x 6 force cross-product operator ``v x*`` = ``-crm(v)^T``."""
    return -crm(v).T


def cross_motion(v, m):
    w, vl = v[:3], v[3:]
    return np.concatenate((cross3(w, m[:3]), cross3(w, m[3:]) + cross3(vl, m[:3])))


def cross_force(v, f):
    w, vl = v[:3], v[3:]
    return np.concatenate((cross3(w, f[:3]) + cross3(vl, f[3:]), cross3(w, f[3:])))


def cross_motion_cols(v, M):
    """``v x M`` column-wise for a 6 x n matrix."""
    wx, vx = skew(v[:3]), skew(v[3:])
    return np.concatenate((wx @ M[:3], wx @ M[3:] + vx @ M[:3]), axis=0)


def inner(f, m):
    return f @ m


class SpatialInertia:
    """Rigid-body inertia about a frame origin.

    Stored as mass ``m``, first moment ``h = m c`` and rotational inertia
    ``Ibar`` about the frame origin, so ``I = [[Ibar, h x], [h x^T, m 1]]``.
    """

    __slots__ = ("mass", "h", "Ibar")

    def __init__(self, mass, h, Ibar):
        self.mass = float(mass)
        self.h = np.asarray(h, dtype=float)
        self.Ibar = np.asarray(Ibar, dtype=float)

    @classmethod
    def from_com(cls, mass, com, Ic):
        """Inertia from mass, centre of mass ``com`` and ``Ic`` about the com."""
        com = np.asarray(com, dtype=float)
        cx = skew(com)
        return cls(mass, mass * com, np.asarray(Ic, dtype=float) + mass * cx @ cx.T)

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        hx = M[:3, 3:]
        h = np.array([hx[2, 1], hx[0, 2], hx[1, 0]])
        return cls(M[3, 3], h, M[:3, :3])

    @property
    def com(self):
        return self.h / self.mass

    def matrix(self):
        hx = skew(self.h)
        return np.block([[self.Ibar, hx], [hx.T, self.mass * np.eye(3)]])

    def apply(self, a):
        """``I a`` for a motion vector ``a``."""
        w, v = a[:3], a[3:]
        return np.concatenate((self.Ibar @ w + cross3(self.h, v),
                               self.mass * v - cross3(self.h, w)))

    def transform(self, X: SpatialTransform) -> "SpatialInertia":
        """Inertia ``X^T I X`` expressed in the source frame of ``X``."""
        return SpatialInertia.from_matrix(X.congruence(self.matrix()))

    def __add__(self, other: "SpatialInertia") -> "SpatialInertia":
        return SpatialInertia(self.mass + other.mass, self.h + other.h,
                              self.Ibar + other.Ibar)

    def is_positive_definite(self, tol=0.0) -> bool:
        M = self.matrix()
        if not np.allclose(M, M.T, atol=1e-12):
            return False
        return bool(np.min(np.linalg.eigvalsh(M)) > tol)

    def __repr__(self):
        return f"SpatialInertia(mass={self.mass!r}, h={self.h!r}, Ibar={self.Ibar!r})"


def inertia_apply(I, a):
    if isinstance(I, SpatialInertia):
        return I.apply(a)
    return I @ a


def inertia_transform(X: SpatialTransform, I):
    """Congruence ``X^T I X`` for a :class:`SpatialInertia` or 6 x 6 matrix."""
    if isinstance(I, SpatialInertia):
        return I.transform(X)
    return X.congruence(I)


def inertia_add(I1, I2):
    return I1 + I2


def random_transform(rng) -> SpatialTransform:
    """Random rigid transform (uniform rotation via QR, Gaussian offset)."""
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return SpatialTransform(Q, rng.standard_normal(3))


def random_inertia(rng, mass=None) -> SpatialInertia:
    A = rng.standard_normal((3, 3))
    m = float(rng.uniform(0.5, 2.0)) if mass is None else mass
    return SpatialInertia.from_com(m, rng.standard_normal(3) * 0.3, A.T @ A + 0.1 * np.eye(3))

