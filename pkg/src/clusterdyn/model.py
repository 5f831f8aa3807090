"""System description: bodies, spanning tree, loop constraints, cluster tree.

Models are built from a plain document (the parsed JSON model file)::

    {"bodies": [{"name": "L", "parent": 0,
                 "joint": {"type": "revolute", "axis": [0, 0, 1]},
                 "X_T": {"rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0]},
                 "inertia": {"mass": 1.0, "com": [0,0,0], "I_3x3": [[...]]},
                 "rotor": false}, ...],
     "loop_constraints": [{"kind": "linear_transmission", "bodies": ["L", "R"],
                           "G": [[1], [9]], "independent": ["L"]}, ...]}

Body ids are positions in ``bodies`` plus one; the base is 0.  Parents may be
given by id or name and must precede their children (regular numbering).
``I_3x3`` is the rotational inertia about the centre of mass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .joints import (ChainedTransmission, ConstraintError, FourBar, LinearTransmission,
                     LoopConstraint, PathLink, TreeJointSpec, extract_explicit)
from .spatial import SpatialInertia, SpatialTransform


class ModelError(ValueError):
    """Ill-formed model document or unsupported topology."""


@dataclass
class Body:
    id: int
    name: str
    parent: int
    joint: TreeJointSpec
    X_T: SpatialTransform
    inertia: SpatialInertia
    rotor: bool = False


@dataclass
class SpanningTree:
    parent: list            # parent[i] for i in 0..N, parent[0] = -1
    children: list          # children[i], ascending
    support: list           # support[i] = set of ancestors including i

    @property
    def n(self):
        return len(self.parent) - 1

    def path_to(self, i, stop):
        """Bodies from ``i`` up to, but excluding, ancestor ``stop``."""
        out = []
        while i != stop:
            if i <= 0:
                raise ModelError(f"body {stop} is not an ancestor")
            out.append(i)
            i = self.parent[i]
        return out

    def common_ancestor(self, bodies):
        bodies = list(bodies)
        common = set(self.support[bodies[0]]) | {0}
        for b in bodies[1:]:
            common &= set(self.support[b]) | {0}
        return max(common)


def build_spanning_tree(parents) -> SpanningTree:
    """Tree data from ``parents[i-1] = lambda(i)`` for bodies 1..N."""
    N = len(parents)
    par = [-1] + [int(p) for p in parents]
    for i in range(1, N + 1):
        p = par[i]
        if p < 0 or p > N:
            raise ModelError(f"disconnected body {i}: parent {p} does not exist")
    for i in range(1, N + 1):
        seen, j = set(), i
        while j != 0:
            if j in seen:
                raise ModelError(f"cycle detected through body {i}")
            seen.add(j)
            j = par[j]
    for i in range(1, N + 1):
        if par[i] >= i:
            raise ModelError(f"numbering violation: body {i} has parent {par[i]}")
    children = [[] for _ in range(N + 1)]
    support = [set() for _ in range(N + 1)]
    for i in range(1, N + 1):
        children[par[i]].append(i)
        support[i] = {i} | support[par[i]]
    return SpanningTree(par, children, support)


@dataclass
class Cluster:
    id: int
    bodies: tuple
    parent: int             # parent cluster id (0 = base)
    output: int             # output body o(k) (0 = base)
    constraints: list = field(default_factory=list)
    independent: tuple = ()
    local_parent: tuple = ()    # index of lambda(i) within the cluster, -1 for base bodies
    G0: np.ndarray | None = None

    @property
    def n_f(self):
        return len(self.bodies)

    @property
    def m(self):
        return len(self.independent)

    @property
    def n_l(self):
        return self.n_f - self.m

    @property
    def constant(self):
        return self.G0 is not None

    @property
    def bases(self):
        return tuple(b for b, lp in zip(self.bodies, self.local_parent) if lp < 0)

    def index(self, body):
        return self.bodies.index(body)


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[max(ra, rb)] = min(ra, rb)


def build_cluster_tree(tree: SpanningTree, loops, pull_in=True) -> list:
    """Group loop-involved bodies into clusters (union-find over body sets).

    With ``pull_in`` each loop's set is closed under the spanning-tree path
    to the loops' common ancestor, which keeps every cluster connected with
    one output body.  Without it, sets that end up with several output
    bodies are rejected.
    """
    N = tree.n
    uf = _UnionFind(N + 1)
    for loop in loops:
        inv = sorted(loop.involved)
        if not inv:
            continue
        bad = [b for b in inv if b < 1 or b > N]
        if bad:
            raise ModelError(f"constraint references unknown bodies {bad}")
        members = set(inv)
        if pull_in:
            lca = tree.common_ancestor(inv)
            for b in inv:
                members.update(tree.path_to(b, lca))
        members = sorted(members)
        for b in members[1:]:
            uf.union(members[0], b)
    groups: dict[int, list] = {}
    for i in range(1, N + 1):
        groups.setdefault(uf.find(i), []).append(i)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    cluster_of = {}
    for g in ordered:
        for b in g:
            cluster_of[b] = g[0]
    clusters = []
    for g in ordered:
        members = set(g)
        outputs = {tree.parent[b] for b in g if tree.parent[b] not in members}
        if len(outputs) != 1:
            raise ModelError(
                f"unsupported topology: cluster {g[0]} has output bodies {sorted(outputs)}")
        o = outputs.pop()
        local_parent = tuple(g.index(tree.parent[b]) if tree.parent[b] in members else -1
                             for b in g)
        clusters.append(Cluster(id=g[0], bodies=tuple(g),
                                parent=cluster_of[o] if o else 0, output=o,
                                local_parent=local_parent))
    for loop in loops:
        if loop.involved:
            cid = cluster_of[min(loop.involved)]
            next(c for c in clusters if c.id == cid).constraints.append(loop)
    for c in clusters:
        _attach_coordinates(c)
    return clusters


def _attach_coordinates(c: Cluster):
    if not c.constraints:
        c.independent = c.bodies
        c.G0 = np.eye(c.n_f)
        return
    dependents = []
    for con in c.constraints:
        dependents.extend(con.dependent)
    if len(set(dependents)) != len(dependents):
        raise ModelError(
            f"invalid independent-coordinate selection in cluster {c.id}: "
            "constraints share a dependent coordinate")
    n_rows = sum(con.n_rows for con in c.constraints)
    if len(dependents) != n_rows:
        raise ModelError(f"cluster {c.id}: {len(dependents)} dependents for {n_rows} constraint rows")
    c.independent = tuple(b for b in c.bodies if b not in set(dependents))
    if c.m <= 0:
        raise ModelError(f"overconstrained cluster {c.id}: independent DoF {c.m}")
    if all(con.constant for con in c.constraints):
        K = stacked_K(c, [np.asarray(con.K, dtype=float) for con in c.constraints])
        pos = [c.index(b) for b in c.independent]
        try:
            c.G0 = extract_explicit(K, np.zeros(n_rows), pos).G
        except ConstraintError as exc:
            raise ModelError(f"cluster {c.id}: {exc}") from None


def stacked_K(c: Cluster, blocks, dtype=float):
    """Place per-constraint ``K`` blocks into cluster-coordinate columns."""
    n_rows = sum(b.shape[0] for b in blocks)
    K = np.zeros((n_rows, c.n_f), dtype=dtype)
    r = 0
    for con, B in zip(c.constraints, blocks):
        cols = [c.index(b) for b in con.coords]
        K[r:r + B.shape[0], cols] = B
        r += B.shape[0]
    return K


@dataclass
class Diagnostic:
    code: str
    message: str


class Model:
    """Immutable system description with derived spanning and cluster trees."""

    def __init__(self, bodies, constraints, tree, clusters, document=None):
        self.bodies = bodies
        self.constraints = constraints
        self.tree = tree
        self.clusters = clusters
        self.document = document
        self.n = len(bodies)
        self.cluster_index = {}
        for ci, c in enumerate(clusters):
            for b in c.bodies:
                self.cluster_index[b] = ci
        self.names = {b.name: b.id for b in bodies}
        self.I6 = [None] + [b.inertia.matrix() for b in bodies]

    @property
    def parent(self):
        return self.tree.parent

    @property
    def n_independent(self):
        return sum(c.m for c in self.clusters)

    def body(self, i) -> Body:
        return self.bodies[i - 1]

    def independent_indices(self):
        """Spanning indices (0-based) of all independent coordinates, in cluster order."""
        return [b - 1 for c in self.clusters for b in c.independent]

    def to_json(self) -> str:
        if self.document is None:
            raise ModelError("model was not built from a document")
        return json.dumps(self.document, indent=1)

    def __repr__(self):
        sizes = [c.n_f for c in self.clusters]
        return f"Model(n={self.n}, clusters={len(self.clusters)}, sizes={sizes})"


def _resolve(ref, names, n_known, what):
    if isinstance(ref, str):
        if ref not in names:
            raise ModelError(f"{what} references unknown body {ref!r}")
        return names[ref]
    ref = int(ref)
    if ref < 0 or ref > n_known:
        raise ModelError(f"{what} references unknown body {ref}")
    return ref


def _parse_transform(d):
    if d is None:
        return SpatialTransform()
    E = np.asarray(d.get("rotation", np.eye(3)), dtype=float)
    r = np.asarray(d.get("translation", np.zeros(3)), dtype=float)
    try:
        return SpatialTransform(E, r, check=True)
    except ValueError as exc:
        raise ModelError(f"X_T: {exc}") from None


def _parse_inertia(d):
    try:
        mass = float(d["mass"])
        com = np.asarray(d.get("com", [0.0, 0.0, 0.0]), dtype=float)
        Ic = np.asarray(d.get("I_3x3", np.zeros((3, 3))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"bad inertia entry: {exc}") from None
    if com.shape != (3,) or Ic.shape != (3, 3):
        raise ModelError("inertia needs a 3-vector com and a 3x3 I_3x3")
    return SpatialInertia.from_com(mass, com, Ic)


def _path_links(model_bodies, tree, body, lca):
    path = list(reversed(tree.path_to(body, lca)))
    return [PathLink(b, model_bodies[b - 1].joint, model_bodies[b - 1].X_T) for b in path]


def _parse_constraint(d, bodies, tree, names):
    kind = d.get("kind")
    N = len(bodies)
    res = lambda ref, what="constraint": _resolve(ref, names, N, what)  # noqa: E731
    ind = d.get("independent")
    ind = None if ind is None else [res(b) for b in ind]
    try:
        if kind == "linear_transmission":
            ids = [res(b) for b in d["bodies"]]
            if any(i == 0 for i in ids):
                raise ModelError("constraint references unknown body 0")
            G = np.asarray(d["G"], dtype=float)
            if ind is None:
                ind = sorted(ids)[:G.shape[1]]
            return LinearTransmission(ids, G, ind)
        if kind == "chained_transmission":
            b1 = [res(b) for b in d["branch1"]]
            b2 = [res(b) for b in d["branch2"]]
            if any(i == 0 for i in b1 + b2):
                raise ModelError("constraint references unknown body 0")
            return ChainedTransmission(b1, b2, d["eta"], ind)
        if kind == "four_bar":
            rod, target = res(d["rod"]), res(d["target"])
            if rod == 0:
                raise ModelError("four-bar rod cannot be the base")
            lca = tree.common_ancestor([rod, target]) if target else 0
            if lca == rod:
                raise ModelError("four-bar rod must not support the target")
            pins = d.get("pin_offsets", {})
            if "rod" in pins:
                pin_rod = pins["rod"]
            elif "rod_length" in d:
                pin_rod = [float(d["rod_length"]), 0.0, 0.0]
            else:
                raise ModelError("four-bar needs pin_offsets.rod or rod_length")
            pin_tgt = pins.get("target", [0.0, 0.0, 0.0])
            rod_path = _path_links(bodies, tree, rod, lca)
            tgt_path = _path_links(bodies, tree, target, lca) if target != lca else []
            return FourBar(rod_path, tgt_path, pin_rod, pin_tgt, ind)
    except ConstraintError as exc:
        raise ModelError(str(exc)) from None
    except KeyError as exc:
        raise ModelError(f"{kind} constraint is missing field {exc}") from None
    raise ModelError(f"unknown constraint kind {kind!r}")


def model_from_dict(doc, pull_in=True) -> Model:
    if not isinstance(doc, dict) or "bodies" not in doc:
        raise ModelError("parse error: document needs a 'bodies' list")
    names: dict[str, int] = {}
    raw = doc["bodies"]
    all_names = {b.get("name", str(i + 1)): i + 1 for i, b in enumerate(raw)}
    bodies, parents = [], []
    for i, b in enumerate(raw, start=1):
        name = b.get("name", str(i))
        pref = b.get("parent", 0)
        if isinstance(pref, str):
            if pref not in all_names:
                raise ModelError(f"body {name!r} references unknown parent {pref!r}")
            p = all_names[pref]
        else:
            p = int(pref)
        if p >= i or p < 0:
            raise ModelError(f"numbering violation: body {i} ({name}) has parent {p}")
        jd = b.get("joint", {"type": "revolute", "axis": [0, 0, 1]})
        try:
            joint = TreeJointSpec(jd.get("type", "revolute"), tuple(jd.get("axis", (0, 0, 1))))
        except ValueError as exc:
            raise ModelError(f"body {name!r}: {exc}") from None
        bodies.append(Body(i, name, p, joint, _parse_transform(b.get("X_T")),
                           _parse_inertia(b.get("inertia", {})), bool(b.get("rotor", False))))
        names[name] = i
        parents.append(p)
    tree = build_spanning_tree(parents)
    constraints = [_parse_constraint(d, bodies, tree, names)
                   for d in doc.get("loop_constraints", [])]
    clusters = build_cluster_tree(tree, constraints, pull_in=pull_in)
    return Model(bodies, constraints, tree, clusters, document=doc)


def load_model(source, pull_in=True) -> Model:
    """Model from a path, JSON text or already-parsed document."""
    if isinstance(source, dict):
        return model_from_dict(source, pull_in)
    text = str(source)
    if not text.lstrip().startswith("{"):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"parse error: {exc}") from None
    return model_from_dict(doc, pull_in)


def _chord_edges(con: LoopConstraint):
    if isinstance(con, FourBar):
        tgt = con.target_path[-1].body if con.target_path else 0
        return [(con.rod_path[-1].body, tgt)]
    if isinstance(con, ChainedTransmission):
        return [(con.branch1[-1], con.branch2[-1])]
    return [(d, con.independent[0]) for d in con.dependent]


def validate_model(model: Model, rank_tol=1e-10) -> list:
    """Structured diagnostics; an empty list means the model is consistent."""
    from .cluster import cluster_joint_model  # avoid import cycle

    diags = []
    for b in model.bodies:
        if not b.inertia.is_positive_definite():
            diags.append(Diagnostic("inertia", f"body {b.id} ({b.name}): inertia not PD"))
    seen = sorted(b for c in model.clusters for b in c.bodies)
    if seen != list(range(1, model.n + 1)):
        diags.append(Diagnostic("cluster-cover", "clusters do not cover every body exactly once"))
    ids = {c.id: c for c in model.clusters}
    for c in model.clusters:
        if c.id != min(c.bodies):
            diags.append(Diagnostic("cluster-id", f"cluster {c.id} is not named by its lowest body"))
        if any(model.parent[b] != c.output for b in c.bases):
            diags.append(Diagnostic("cluster-output", f"cluster {c.id} base bodies differ in parent"))
        if c.parent and (c.parent >= c.id or c.output not in ids[c.parent].bodies):
            diags.append(Diagnostic("cluster-order", f"cluster {c.id} parent cluster is inconsistent"))
    # independent loops of the connectivity graph equal the number of chords
    chords = [e for con in model.constraints for e in _chord_edges(con)]
    uf = _UnionFind(model.n + 1)
    for i in range(1, model.n + 1):
        uf.union(i, model.parent[i])
    for a, b in chords:
        uf.union(a, b)
    comps = len({uf.find(i) for i in range(model.n + 1)})
    edges = model.n + len(chords)
    loops = edges - (model.n + 1) + comps
    if comps != 1 or loops != len(chords):
        diags.append(Diagnostic("loops", f"graph has {loops} loops for {len(chords)} chords"))
    # dimension count for each cluster at the home configuration
    q0 = np.zeros(model.n)
    for c in model.clusters:
        try:
            cj = cluster_joint_model(model, c, q0, np.zeros(model.n))
        except (ModelError, ConstraintError) as exc:
            diags.append(Diagnostic("constraint", f"cluster {c.id}: {exc}"))
            continue
        sv = np.linalg.svd(cj.S, compute_uv=False)
        rank = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
        n_c = 6 * c.n_f - (c.n_f - c.n_l)
        if rank != c.m or n_c != 6 * c.n_f - c.m:
            diags.append(Diagnostic(
                "dimension", f"cluster {c.id}: motion subspace rank {rank}, expected {c.m}"))
    return diags
