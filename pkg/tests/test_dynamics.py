import numpy as np
import pytest
from hypothesis import given, settings

from clusterdyn.dynamics import (DynamicsState, SingularClusterError, Workspace, approximate_aba,
                                 approximate_tree, cluster_aba, cluster_rnea, inverse_dynamics_error_experiment,
                                 kinetic_energy, unconstrained_tree)
from clusterdyn.generators import (belt_leg, four_bar, gear_pair, generate_mechanism_chain, pendulum,
                                   random_model, random_state)
from clusterdyn.model import ModelError, load_model
from clusterdyn.oracle import constraint_stack
from clusterdyn.tree import TreeModel, tree_aba, tree_rnea

from conftest import rel_err, seeds

NO_G = (0.0, 0.0, 0.0)


def spinner(Izz=0.35):
    return load_model({"bodies": [{"name": "a", "parent": 0, "joint": {"type": "revolute", "axis": [0, 0, 1]},
                                   "inertia": {"mass": 2.0, "com": [0, 0, 0],
                                               "I_3x3": np.diag([0.2, 0.3, Izz]).tolist()}}]})


def test_single_body():
    r = cluster_aba(spinner(), DynamicsState(q=np.array([0.7]), qd=np.array([3.0]), tau=np.array([1.4])), NO_G)
    assert abs(r.qdd[0] - 1.4 / 0.35) < 1e-14


@pytest.mark.parametrize("eta", [1.0, 6.0, 9.0, 33.45])
def test_gear_pair_reflected_inertia(eta):
    I_L, I_R = 0.7, 0.02
    m = gear_pair(eta=eta, I_L=I_L, I_R=I_R)
    r = cluster_aba(m, DynamicsState(q=np.array([0.1, 0.1 * eta]), qd=np.array([2.0, 2.0 * eta]),
                                     tau=np.array([1.3])), NO_G)
    expect = 1.3 / (I_L + eta ** 2 * I_R)
    assert abs(r.ydd[0] - expect) < 1e-10
    assert np.allclose(r.qdd, [expect, eta * expect], atol=1e-10)


def test_rnea_zero_state_is_exactly_zero():
    m = belt_leg()
    z = np.zeros(m.n_independent)
    tau = cluster_rnea(m, DynamicsState(y=z, yd=z, ydd=z), NO_G)
    assert np.array_equal(tau, np.zeros(2))


def test_static_pendulum_holding_torque():
    mass, length = 1.7, 0.8
    m = pendulum(mass, length)
    tau = cluster_rnea(m, DynamicsState(q=np.zeros(1), qd=np.zeros(1), ydd=np.zeros(1)))
    # com on +x, axis +y, gravity -z: the joint must push back with -m g l
    assert abs(tau[0] + mass * 9.81 * length) < 1e-12


@given(seeds)
def test_fd_id_roundtrip(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    q, qd, tau = random_state(m, rng)
    ind = m.independent_indices()
    r = cluster_aba(m, DynamicsState(q=q, qd=qd, tau=tau[ind]))
    back = cluster_rnea(m, DynamicsState(q=q, qd=qd, ydd=r.ydd))
    assert rel_err(back, tau[ind]) < 1e-9


@given(seeds)
def test_constraints_satisfied(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    q, qd, tau = random_state(m, rng)
    r = cluster_aba(m, DynamicsState(q=q, qd=qd, tau_tree=tau))
    K, k = constraint_stack(m, q, qd)
    if len(k):
        assert np.max(np.abs(K @ r.qdd - k)) <= 1e-8 * (1 + np.max(np.abs(k)))


@given(seeds)
def test_input_modes_agree(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    q, qd, tau = random_state(m, rng)
    ind = m.independent_indices()
    ws = Workspace(m)
    tau_y = None
    if all(c.constant for c in m.clusters):
        tau_y = np.concatenate([c.G0.T @ tau[[b - 1 for b in c.bodies]] for c in m.clusters])
    a = cluster_aba(m, DynamicsState(q=q, qd=qd, tau_tree=tau), ws=ws)
    b = cluster_aba(m, DynamicsState(y=q[ind], yd=qd[ind], tau_tree=tau, q_guess=q), ws=ws)
    assert rel_err(a.ydd, b.ydd) < 1e-12
    if tau_y is not None:
        c = cluster_aba(m, DynamicsState(y=q[ind], yd=qd[ind], tau=tau_y), ws=ws)
        assert rel_err(a.ydd, c.ydd) < 1e-12


@settings(max_examples=50)
@given(seeds)
def test_loop_free_matches_reference_tree(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, max_bodies=20, kinds=("single",))
    q, qd, tau, qdd = (rng.standard_normal(m.n) for _ in range(4))
    ref = tree_aba(TreeModel.from_model(m), q, qd, tau)
    got = cluster_aba(m, DynamicsState(q=q, qd=qd, tau=tau)).qdd
    assert rel_err(got, ref) < 1e-12
    ref_id = tree_rnea(TreeModel.from_model(m), q, qd, qdd)
    got_id = cluster_rnea(m, DynamicsState(q=q, qd=qd, ydd=qdd))
    assert rel_err(got_id, ref_id) < 1e-12
    assert [c.bodies for c in m.clusters] == [(i,) for i in range(1, m.n + 1)]


@given(seeds)
def test_articulated_inertias_stay_positive_definite(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    q, qd, tau = random_state(m, rng)
    ws = Workspace(m)
    cluster_aba(m, DynamicsState(q=q, qd=qd, tau_tree=tau), ws=ws)
    for b in range(1, m.n + 1):
        IA = ws.IA[b]
        assert np.max(np.abs(IA - IA.T)) < 1e-12 * (1 + np.abs(IA).max())
        assert np.min(np.linalg.eigvalsh(0.5 * (IA + IA.T))) >= 1e-12


def test_massless_leaf_is_singular():
    doc = {"bodies": [{"name": "a", "parent": 0, "joint": {"type": "revolute", "axis": [0, 0, 1]},
                       "inertia": {"mass": 0.0}}]}
    with pytest.raises(SingularClusterError) as err:
        cluster_aba(load_model(doc), DynamicsState(q=np.zeros(1), qd=np.zeros(1), tau=np.zeros(1)))
    assert err.value.cluster_id in (0, 1)


def test_approximation_exact_for_gear_pair():
    m = gear_pair(eta=6.0)
    st = DynamicsState(q=np.array([0.2, 1.2]), qd=np.array([0.5, 3.0]), tau=np.array([0.9]))
    exact = cluster_aba(m, st, NO_G).ydd
    assert abs(approximate_aba(m, st, NO_G)[0] - exact[0]) < 1e-12


def test_approximation_gap_on_belt_leg():
    m = belt_leg()
    rng = np.random.default_rng(2)
    q, qd, tau = random_state(m, rng)
    st = DynamicsState(q=q, qd=qd, tau_tree=tau)
    gap = np.max(np.abs(approximate_aba(m, st) - cluster_aba(m, st).ydd))
    assert gap > 1e-6


def test_unit_ratio_massless_rotor_is_plain_tree():
    m = gear_pair(eta=1.0)
    doc = m.document
    doc["bodies"][1]["inertia"] = {"mass": 0.0, "com": [0, 0, 0], "I_3x3": np.zeros((3, 3)).tolist()}
    m = load_model(doc)
    plain = load_model({"bodies": [doc["bodies"][0]]})
    q, qd, tau = np.array([0.3]), np.array([-0.4]), np.array([0.8])
    got = approximate_aba(m, DynamicsState(y=q, yd=qd, tau=tau))
    assert np.array_equal(got, tree_aba(TreeModel.from_model(plain), q, qd, tau))


def test_approximation_rejects_fourbar():
    with pytest.raises(ModelError, match="unsupported"):
        approximate_tree(four_bar())
    unconstrained_tree(generate_mechanism_chain("belt", 2, 1))


def test_experiment_static_and_self_comparison():
    m = belt_leg()
    out = inverse_dynamics_error_experiment(m, A=0.0, omega=1.5, dt=0.05)
    static = cluster_rnea(m, DynamicsState(y=np.zeros(2), yd=np.zeros(2), ydd=np.zeros(2)))
    for key in ("tau_exact", "tau_unconstrained", "tau_approximate"):
        assert np.allclose(out[key], static, atol=1e-12)
    assert out["rms"]["exact"] == 0.0


def test_gear_pair_gap_ordering_at_high_frequency():
    out = inverse_dynamics_error_experiment(gear_pair(eta=9.0), A=0.5, omega=3.0, dt=0.005)
    assert out["rms"]["unconstrained"] > out["rms"]["approximate"]
    assert out["rms"]["approximate"] < 1e-10


def test_kinetic_energy_matches_mass_matrix():
    from clusterdyn.oracle import mass_matrix
    m = belt_leg()
    q, qd, _ = random_state(m, np.random.default_rng(0))
    assert abs(kinetic_energy(m, q, qd) - 0.5 * qd @ mass_matrix(m, q) @ qd) < 1e-12
