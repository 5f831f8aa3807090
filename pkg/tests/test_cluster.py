import numpy as np
from hypothesis import given, settings

from clusterdyn.cluster import (cluster_explicit, cluster_joint_model, duality_residuals, nullspace,
                                solve_cluster_closure, tree_kinematics)
from clusterdyn.generators import (belt_leg, four_bar, gear_chain, gear_pair, generate_constrained_branches,
                                   pendulum, random_model, random_state)
from clusterdyn.spatial import inner

from conftest import seeds


def stacked(vs, bodies):
    return np.concatenate([vs[b] for b in bodies])


def rel_velocities(model, c, q, qd):
    """Stacked ``v_i - X_{i,o} v_o`` by plain spanning-tree propagation."""
    Xup, v = tree_kinematics(model, q, qd)
    cj = cluster_joint_model(model, c, q, qd)
    return np.concatenate([v[b] - cj.X_out[i].apply_motion(v[c.output])
                           for i, b in enumerate(c.bodies)]), cj


def test_sibling_spo_is_identity():
    m = gear_pair()
    cj = cluster_joint_model(m, m.clusters[0], np.array([0.1, 0.9]), np.zeros(2))
    assert np.array_equal(cj.SPO, np.eye(12))


def test_chain_spo_has_one_block():
    m = generate_constrained_branches("transmission", 3, 2)
    c = next(c for c in m.clusters if c.constraints)
    q, qd, _ = random_state(m, np.random.default_rng(0))
    cj = cluster_joint_model(m, c, q, qd)
    i, j = next((i, lp) for i, lp in enumerate(c.local_parent) if lp >= 0)
    blk = cj.SPO[6 * i:6 * i + 6, 6 * j:6 * j + 6]
    assert np.allclose(blk, cj.Xup[i].matrix(), atol=1e-15)
    nz = [(a, b) for a in range(c.n_f) for b in range(c.n_f)
          if a != b and np.any(cj.SPO[6 * a:6 * a + 6, 6 * b:6 * b + 6])]
    assert (i, j) in nz


@given(seeds)
def test_spo_propagates_joint_velocities(seed):
    rng = np.random.default_rng(seed)
    m = belt_leg(seed=seed % 7)
    c = m.clusters[0]
    assert c.n_f == 4
    q, qd, _ = random_state(m, rng)
    rel, cj = rel_velocities(m, c, q, qd)
    assert np.max(np.abs(cj.SPO @ (cj.S_blocks @ qd[[b - 1 for b in c.bodies]]) - rel)) < 1e-12


def test_singleton_and_gear_subspaces():
    m = pendulum()
    cj = cluster_joint_model(m, m.clusters[0], np.array([0.4]), np.zeros(1))
    assert np.array_equal(cj.S, m.body(1).joint.S)
    assert np.allclose(cj.T_a, cj.S)
    m = gear_pair(eta=9.0)
    cj = cluster_joint_model(m, m.clusters[0], np.zeros(2), np.zeros(2))
    sz = np.array([0, 0, 1.0, 0, 0, 0])
    assert np.array_equal(cj.S[:, 0], np.concatenate((sz, 9 * sz)))
    assert abs((cj.S.T @ cj.T_a)[0, 0] - 1.0) < 1e-12


def _closed(c, y):
    qc = np.zeros(c.n_f)
    qc[[c.index(b) for b in c.independent]] = y
    return solve_cluster_closure(c, qc)


def test_fourbar_subspace_and_velocity_product_by_differences():
    m = four_bar()
    c = m.clusters[0]
    y0, yd, ydd, h = 0.25, 0.8, -1.3, 1e-5

    def state(t):
        y = y0 + yd * t + 0.5 * ydd * t * t
        q = _closed(c, y)
        G = cluster_explicit(c, q, np.zeros(3)).G
        return q, G[:, 0] * (yd + ydd * t)

    def vstack(t):
        q, qd = state(t)
        return stacked(tree_kinematics(m, q, qd)[1], c.bodies)

    q, qd = state(0.0)
    cj = cluster_joint_model(m, c, q, qd)
    # the output is the base, so relative velocities are body velocities
    assert np.max(np.abs(cj.S[:, 0] * yd - vstack(0.0))) < 1e-12
    aJ = (vstack(h) - vstack(-h)) / (2 * h)
    assert np.max(np.abs(cj.S[:, 0] * ydd + cj.Sdot_ydot - aJ)) < 1e-5


def test_velocity_product_vanishes_at_rest():
    for m in (four_bar(), belt_leg(), gear_pair()):
        q, _, _ = random_state(m, np.random.default_rng(1))
        for c in m.clusters:
            cj = cluster_joint_model(m, c, q, np.zeros(m.n))
            assert np.max(np.abs(cj.Sdot_ydot)) == 0.0


def test_gear_velocity_product_by_differences():
    m = gear_pair()
    c = m.clusters[0]
    yd, ydd, h = 1.7, 0.4, 1e-5

    def vstack(t):
        y = yd * t + 0.5 * ydd * t * t
        return stacked(tree_kinematics(m, c.G0[:, 0] * y, c.G0[:, 0] * (yd + ydd * t))[1], c.bodies)

    cj = cluster_joint_model(m, c, np.zeros(2), c.G0[:, 0] * yd)
    aJ = (vstack(h) - vstack(-h)) / (2 * h)
    assert np.max(np.abs(cj.S[:, 0] * ydd + cj.Sdot_ydot - aJ)) < 1e-6


@given(seeds)
def test_cluster_velocity_recursion(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    q, qd, _ = random_state(m, rng)
    _, v = tree_kinematics(m, q, qd)
    for c in m.clusters:
        cj = cluster_joint_model(m, c, q, qd)
        parent = next((p for p in m.clusters if p.id == c.parent), None)
        vp = stacked(v, parent.bodies) if parent else np.zeros(6)
        yd = qd[[b - 1 for b in c.independent]]
        assert np.max(np.abs(cj.X_M @ vp + cj.S @ yd - stacked(v, c.bodies))) < 1e-12 * (
            1 + np.max(np.abs(vp)))


@given(seeds)
def test_singleton_transform_reduces_to_joint_transform(seed):
    rng = np.random.default_rng(seed)
    m = generate_constrained_branches("transmission", 4, 1)
    q, qd, _ = random_state(m, rng)
    c = next(c for c in m.clusters if c.n_f == 1 and c.output != 0)
    cj = cluster_joint_model(m, c, q, qd)
    assert np.count_nonzero(np.any(cj.X_M != 0, axis=0)) <= 6
    Xup, _ = tree_kinematics(m, q, qd)
    parent = next(p for p in m.clusters if p.id == c.parent)
    col = parent.index(c.output)
    assert np.allclose(cj.X_M[:, 6 * col:6 * col + 6], Xup[c.bodies[0]].matrix(), atol=1e-15)
    f, vp = rng.standard_normal(cj.X_M.shape[0]), rng.standard_normal(cj.X_M.shape[1])
    assert abs(inner(cj.X_F @ f, vp) - inner(f, cj.X_M @ vp)) < 1e-12 * 20


@settings(max_examples=30)
@given(seeds)
def test_block_diagonal_sandwich(seed):
    rng = np.random.default_rng(seed)
    m = belt_leg()
    q, qd, _ = random_state(m, rng)
    for c in m.clusters:
        if c.output == 0:
            continue
    m = generate_constrained_branches("connecting-rod", 4, 2)
    q, qd, _ = random_state(m, rng)
    for c in m.clusters:
        if c.output == 0:
            continue
        cj = cluster_joint_model(m, c, q, qd)
        B = np.zeros((6 * c.n_f, 6 * c.n_f))
        for i in range(c.n_f):
            A = rng.standard_normal((6, 6))
            B[6 * i:6 * i + 6, 6 * i:6 * i + 6] = A @ A.T
        out = cj.X_F @ B @ cj.X_M
        parent = next(p for p in m.clusters if p.id == c.parent)
        col = parent.index(c.output)
        mask = np.ones_like(out, dtype=bool)
        mask[6 * col:6 * col + 6, 6 * col:6 * col + 6] = False
        assert np.all(out[mask] == 0)


@given(seeds)
def test_duality_identities(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    q, qd, _ = random_state(m, rng)
    for c in m.clusters:
        res = duality_residuals(cluster_joint_model(m, c, q, qd))
        assert max(res.values()) < 1e-10, res


@given(seeds)
def test_spof_is_inverse_transpose_of_spo(seed):
    rng = np.random.default_rng(seed)
    m = belt_leg()
    q, qd, _ = random_state(m, rng)
    cj = cluster_joint_model(m, m.clusters[0], q, qd)
    assert np.max(np.abs(cj.SPOF - np.linalg.inv(cj.SPO).T)) < 1e-10


@given(seeds)
def test_power_equivalence(seed):
    rng = np.random.default_rng(seed)
    m = belt_leg()
    q, qd, _ = random_state(m, rng)
    c = m.clusters[0]
    cj = cluster_joint_model(m, c, q, qd)
    fJ = rng.standard_normal(6 * c.n_f)       # spanning joint forces, stacked
    vJ_tree = cj.S_blocks @ qd[[b - 1 for b in c.bodies]]
    vJ_cluster = cj.SPO @ vJ_tree
    assert abs(inner(vJ_cluster, cj.SPOF @ fJ) - inner(vJ_tree, fJ)) < 1e-10 * (1 + np.abs(fJ).sum())


def test_fourbar_force_complement_against_qr_oracle():
    m = four_bar()
    c = m.clusters[0]
    q, qd, _ = random_state(m, np.random.default_rng(5))
    cj = cluster_joint_model(m, c, q, qd)
    assert np.max(np.abs(cj.S.T @ cj.T_c)) < 1e-10
    Q, _ = np.linalg.qr(cj.S, mode="complete")
    N = Q[:, cj.S.shape[1]:]                  # QR basis of null(S^T)
    assert np.linalg.matrix_rank(cj.T_c, tol=1e-9) == N.shape[1]
    assert np.linalg.matrix_rank(np.hstack((cj.T_c, N)), tol=1e-9) == N.shape[1]


def test_gear_chain_duality_many_states():
    m = gear_chain()
    rng = np.random.default_rng(9)
    for _ in range(20):
        q, qd, _ = random_state(m, rng)
        for c in m.clusters:
            assert max(duality_residuals(cluster_joint_model(m, c, q, qd)).values()) < 1e-10


def test_nullspace_helper():
    A = np.array([[1.0, 2.0, 3.0]])
    N = nullspace(A)
    assert N.shape == (3, 2) and np.max(np.abs(A @ N)) < 1e-14
    assert np.allclose(nullspace(np.zeros((0, 2))), np.eye(2))
