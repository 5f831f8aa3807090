"""Parametric benchmark mechanisms, small fixtures and random test models.

Every generator returns a :class:`~clusterdyn.model.Model` built from a
plain document, so ``model.to_json()`` gives a loadable model file.
Inertias are deterministic given the seed: unit mass, a small centre-of-mass
offset and rotational inertia ``A^T A + 0.1 * 1`` with ``A = 0.3 * N(0, 1)``.
"""

from __future__ import annotations

import math

import numpy as np

from .cluster import cluster_explicit, solve_cluster_closure
from .model import Model, model_from_dict
from .spatial import SpatialTransform, coord_rotation

Z = (0.0, 0.0, 1.0)
Y = (0.0, 1.0, 0.0)


def _rot_between(a, b):
    """Coordinate rotation ``E`` with ``E^T a = b`` direction-wise (z maps to b)."""
    a = np.asarray(a, float) / np.linalg.norm(a)
    b = np.asarray(b, float) / np.linalg.norm(b)
    v = np.cross(a, b)
    s, c = np.linalg.norm(v), float(a @ b)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        return coord_rotation(perp / np.linalg.norm(perp), math.pi)
    return coord_rotation(v / s, math.atan2(s, c))


def _inertia(rng, mass=1.0):
    A = 0.3 * rng.standard_normal((3, 3))
    Ic = A.T @ A + 0.1 * np.eye(3)
    com = 0.05 * rng.standard_normal(3)
    return {"mass": mass, "com": com.tolist(), "I_3x3": Ic.tolist()}


def _xt(E=None, r=None):
    E = np.eye(3) if E is None else np.asarray(E, float)
    r = np.zeros(3) if r is None else np.asarray(r, float)
    return {"rotation": E.tolist(), "translation": r.tolist()}


class _Doc:
    def __init__(self, rng):
        self.rng = rng
        self.bodies = []
        self.constraints = []

    def add(self, name, parent, axis=Z, X_T=None, rotor=False, jtype="revolute", inertia=None):
        self.bodies.append({
            "name": name, "parent": parent,
            "joint": {"type": jtype, "axis": list(axis)},
            "X_T": X_T if X_T is not None else _xt(),
            "inertia": inertia if inertia is not None else _inertia(self.rng),
            "rotor": rotor,
        })
        return len(self.bodies)

    def build(self) -> Model:
        return model_from_dict({"bodies": self.bodies, "loop_constraints": self.constraints})


# ---------------------------------------------------------------------------
# sub-mechanisms; each returns the body that carries the next one in series

def _link_rotor(doc, o, tag, eta=6.0, offset=None, axis=Z):
    r = np.zeros(3) if offset is None else np.asarray(offset)
    L = doc.add(f"{tag}L", o, axis, _xt(r=r))
    R = doc.add(f"{tag}R", o, axis, _xt(r=r), rotor=True)
    doc.constraints.append({"kind": "linear_transmission", "bodies": [L, R],
                            "G": [[1.0], [eta]], "independent": [L]})
    return L


def _belt(doc, o, tag, eta1=6.0, eta2=9.0, offset=None, axis=Z, link_length=0.3):
    r = np.zeros(3) if offset is None else np.asarray(offset)
    L1 = doc.add(f"{tag}L1", o, axis, _xt(r=r))
    R1 = doc.add(f"{tag}R1", o, axis, _xt(r=r), rotor=True)
    R2 = doc.add(f"{tag}R2", o, axis, _xt(r=r), rotor=True)
    drop = np.array([0.0, 0.0, -link_length]) if axis == Y else np.array([link_length, 0.0, 0.0])
    L2 = doc.add(f"{tag}L2", L1, axis, _xt(r=drop))
    doc.constraints.append({"kind": "linear_transmission", "bodies": [L1, R1],
                            "G": [[1.0], [eta1]], "independent": [L1]})
    # the distal belt couples the second rotor to the absolute distal angle
    doc.constraints.append({"kind": "linear_transmission", "bodies": [L1, L2, R2],
                            "G": [[1.0, 0.0], [0.0, 1.0], [eta2, eta2]],
                            "independent": [L1, L2]})
    return L2


def _four_bar(doc, o, tag, offset=None, E_plane=None, crank=0.3, ground=0.6, rocker=0.45):
    """Crank-rocker four-bar closed at q = 0 in the plane normal to E_plane^T z."""
    p0 = np.zeros(3) if offset is None else np.asarray(offset, float)
    Ep = np.eye(3) if E_plane is None else np.asarray(E_plane, float)
    home = coord_rotation(Z, math.pi / 2)
    plane = SpatialTransform(Ep, p0)
    XI = SpatialTransform(home, np.zeros(3)).compose(plane)
    XO = SpatialTransform(home, np.array([ground, 0.0, 0.0])).compose(plane)
    tip_i = np.array([0.0, crank])
    tip_o = np.array([ground, rocker])
    d = tip_o - tip_i
    rod_len = float(np.hypot(*d))
    ang = math.atan2(d[1], d[0]) - math.pi / 2
    I = doc.add(f"{tag}I", o, Z, _xt(XI.E, XI.r))
    C = doc.add(f"{tag}C", I, Z, _xt(coord_rotation(Z, ang), [crank, 0.0, 0.0]))
    O = doc.add(f"{tag}O", o, Z, _xt(XO.E, XO.r))
    doc.constraints.append({"kind": "four_bar", "rod": C, "target": O,
                            "pin_offsets": {"rod": [rod_len, 0.0, 0.0],
                                            "target": [rocker, 0.0, 0.0]}})
    return O


MECHANISMS = {"link-rotor": (2, 1), "belt": (4, 2), "four-bar": (3, 2)}


def generate_mechanism_chain(mechanism, d_a, b_a, seed=0) -> Model:
    """``b_a`` branches from the base, each ``d_a`` sub-mechanisms in series."""
    if d_a < 1 or b_a < 1:
        raise ValueError("d_a and b_a must be at least 1")
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    doc = _Doc(np.random.default_rng(seed))
    make = {"link-rotor": _link_rotor, "belt": _belt, "four-bar": _four_bar}[mechanism]
    for br in range(b_a):
        o = 0
        for k in range(d_a):
            offset = [0.0, 0.5 * br, 0.0] if o == 0 else [0.3, 0.0, 0.0]
            o = make(doc, o, f"b{br}_{k}_", offset=offset)
    return doc.build()


def generate_constrained_branches(kind, d_t, d_l, eta=2.0, seed=0) -> Model:
    """Two branches of depth ``d_t`` coupled at depth ``d_l``.

    ``kind`` is ``"transmission"`` (joint-angle sums in ratio ``eta``) or
    ``"connecting-rod"`` (a rod on the ``d_l``-th body of branch 1 pinned to
    the ``d_l``-th body of branch 2).
    """
    if not 1 <= d_l <= d_t:
        raise ValueError("need 1 <= d_l <= d_t")
    doc = _Doc(np.random.default_rng(seed))
    link = 0.3
    for br in range(2):
        parent = 0
        for i in range(d_t):
            if parent == 0:
                X = _xt(r=[0.0, 0.5 * br, 0.0])
            else:
                zig = 0.5 if i % 2 else -0.5
                X = _xt(coord_rotation(Z, zig), [link, 0.0, 0.0])
            parent = doc.add(f"br{br + 1}_{i + 1}", parent, Z, X)
    b1 = list(range(1, d_l + 1))
    b2 = list(range(d_t + 1, d_t + d_l + 1))
    if kind == "transmission":
        doc.constraints.append({"kind": "chained_transmission", "eta": eta,
                                "branch1": b1, "branch2": b2})
    elif kind == "connecting-rod":
        # branches are translated copies, so the rod points along +y at home
        rod_len = 0.5
        doc.add("rod", d_l, Z, _xt(coord_rotation(Z, math.pi / 2 - _home_heading(d_l)),
                                   [link, 0.0, 0.0]))
        doc.constraints.append({"kind": "four_bar", "rod": 2 * d_t + 1, "target": d_t + d_l,
                                "pin_offsets": {"rod": [rod_len, 0.0, 0.0],
                                                "target": [link, 0.0, 0.0]}})
    else:
        raise ValueError(f"unknown branch kind {kind!r}")
    return doc.build()


def _home_heading(d_l):
    """Heading of the d_l-th zigzag link frame relative to the base (radians)."""
    h = 0.0
    for i in range(1, d_l):
        h += 0.5 if i % 2 else -0.5
    return h


# ---------------------------------------------------------------------------
# fixtures

def gear_pair(eta=9.0, I_L=0.7, I_R=0.02, mass_L=1.0, mass_R=0.2) -> Model:
    """Link and rotor on the base, both about z, with ``q_R = eta q_L``."""
    doc = _Doc(np.random.default_rng(0))
    inert = lambda m, Izz: {"mass": m, "com": [0.0, 0.0, 0.0],  # noqa: E731
                            "I_3x3": np.diag([0.5 * Izz + 0.01, 0.5 * Izz + 0.02, Izz]).tolist()}
    doc.add("L", 0, Z, inertia=inert(mass_L, I_L))
    doc.add("R", 0, Z, rotor=True, inertia=inert(mass_R, I_R))
    doc.constraints.append({"kind": "linear_transmission", "bodies": ["L", "R"],
                            "G": [[1.0], [eta]], "independent": ["L"]})
    return doc.build()


def pendulum(mass=1.0, length=1.0) -> Model:
    """Point mass on a massless-looking rod, hinge about y at the base."""
    doc = _Doc(np.random.default_rng(0))
    doc.add("arm", 0, Y, inertia={"mass": mass, "com": [length, 0.0, 0.0],
                                  "I_3x3": (1e-9 * np.eye(3)).tolist()})
    return doc.build()


def four_bar(seed=0) -> Model:
    doc = _Doc(np.random.default_rng(seed))
    _four_bar(doc, 0, "")
    return doc.build()


def belt_leg(eta1=6.0, eta2=9.0, seed=0, rotor_inertia=1e-3) -> Model:
    """Two-joint leg (hip, knee about y) driven by base-mounted rotors and a belt.

    Rotors get a motor-sized isotropic inertia; ``rotor_inertia=None`` keeps
    the generic seeded link inertia instead.
    """
    doc = _Doc(np.random.default_rng(seed))
    _belt(doc, 0, "", eta1, eta2, axis=Y)
    if rotor_inertia is not None:
        for b in doc.bodies:
            if b["rotor"]:
                b["inertia"] = {"mass": 0.3, "com": [0.0, 0.0, 0.0],
                                "I_3x3": np.diag([rotor_inertia, rotor_inertia,
                                                  rotor_inertia]).tolist()}
    return doc.build()


def gear_chain(n_pairs=3, eta=(4.0, 7.0, 3.0), seed=0) -> Model:
    """Serial chain of link-rotor pairs with offset joints and mixed axes."""
    doc = _Doc(np.random.default_rng(seed))
    axes = [Z, Y, (1.0, 0.0, 0.0)]
    o = 0
    for k in range(n_pairs):
        offset = [0.0, 0.0, 0.0] if o == 0 else [0.3, 0.05, 0.0]
        o = _link_rotor(doc, o, f"p{k}_", eta=eta[k % len(eta)], offset=offset,
                        axis=axes[k % len(axes)])
    return doc.build()


def nested_loop_tree() -> Model:
    """Sixteen-body tree with nested and parallel loops (gear-type chords)."""
    parents = {1: 0, 2: 1, 3: 1, 4: 1, 5: 1, 6: 2, 7: 3, 8: 5, 9: 6, 10: 7, 11: 8,
               12: 9, 13: 10, 14: 11, 15: 11, 16: 11}
    chords = [(2, 3), (6, 7), (4, 5), (4, 8), (15, 16)]
    doc = _Doc(np.random.default_rng(3))
    for i in range(1, 17):
        doc.add(str(i), parents[i], Z, _xt(r=[0.2, 0.0, 0.0]) if parents[i] else None)
    for a, b in chords:
        doc.constraints.append({"kind": "linear_transmission", "bodies": [a, b],
                                "G": [[1.0], [2.0]], "independent": [a]})
    return doc.build()


# ---------------------------------------------------------------------------
# random models and states

def _random_axis(rng):
    a = rng.standard_normal(3)
    return tuple(a / np.linalg.norm(a))


def random_model(rng, max_bodies=12, kinds=("gear", "belt", "chain", "four-bar", "single")) -> Model:
    """Random tree of mixed sub-mechanisms with at most ``max_bodies`` bodies."""
    doc = _Doc(rng)
    sizes = {"single": 1, "gear": 2, "belt": 4, "four-bar": 3, "chain": 4}
    n_target = int(rng.integers(1, max_bodies + 1))
    k = 0
    while True:
        room = max_bodies - len(doc.bodies)
        options = [kd for kd in kinds if sizes[kd] <= room]
        if not options or (len(doc.bodies) >= n_target and doc.bodies):
            break
        kind = options[int(rng.integers(len(options)))]
        o = int(rng.integers(0, len(doc.bodies) + 1))
        tag = f"u{k}_"
        k += 1
        off = 0.3 * rng.standard_normal(3)
        if kind == "single":
            X = SpatialTransform(_rot_between(Z, _random_axis(rng)), off)
            jt = "revolute" if rng.random() < 0.75 else "prismatic"
            doc.add(f"{tag}S", o, _random_axis(rng), _xt(X.E, X.r), jtype=jt)
        elif kind == "gear":
            _link_rotor(doc, o, tag, eta=float(rng.uniform(1.0, 20.0)), offset=off,
                        axis=_random_axis(rng))
        elif kind == "belt":
            _belt(doc, o, tag, float(rng.uniform(1.0, 12.0)), float(rng.uniform(1.0, 12.0)),
                  offset=off, axis=_random_axis(rng))
        elif kind == "four-bar":
            _four_bar(doc, o, tag, offset=off, E_plane=_rot_between(Z, _random_axis(rng)))
        elif kind == "chain":
            # two short branches from o with a chained transmission over both
            b1 = doc.add(f"{tag}a1", o, _random_axis(rng), _xt(r=off))
            b1b = doc.add(f"{tag}a2", b1, _random_axis(rng), _xt(r=[0.2, 0.0, 0.0]))
            b2 = doc.add(f"{tag}b1", o, _random_axis(rng), _xt(r=-off))
            b2b = doc.add(f"{tag}b2", b2, _random_axis(rng), _xt(r=[0.2, 0.0, 0.0]))
            doc.constraints.append({"kind": "chained_transmission",
                                    "eta": float(rng.uniform(0.5, 5.0)),
                                    "branch1": [b1, b1b], "branch2": [b2, b2b]})
    return doc.build()


def random_state(model: Model, rng, q_scale=0.8, qd_scale=1.0, tau_scale=1.0):
    """Feasible ``(q, qd)`` plus a random spanning torque ``tau_tree``.

    Independent positions are sampled uniformly and dependents closed by
    damped Newton from the home pose; velocities are ``G yd``.
    """
    q = np.zeros(model.n)
    qd = np.zeros(model.n)
    for c in model.clusters:
        idx = [b - 1 for b in c.bodies]
        pos = [c.index(b) for b in c.independent]
        scale = q_scale
        for _attempt in range(8):
            yc = rng.uniform(-scale, scale, c.m)
            qc = np.zeros(c.n_f)
            qc[pos] = yc
            if c.constant:
                qc = c.G0 @ yc
                break
            try:
                qc = solve_cluster_closure(c, qc)
                break
            except Exception:
                scale *= 0.5
        else:
            raise RuntimeError(f"could not close cluster {c.id}")
        yd = qd_scale * rng.standard_normal(c.m)
        G = np.asarray(cluster_explicit(c, qc, np.zeros(c.n_f)).G, dtype=float)
        q[idx] = qc
        qd[idx] = G @ yd
    tau = tau_scale * rng.standard_normal(model.n)
    return q, qd, tau
