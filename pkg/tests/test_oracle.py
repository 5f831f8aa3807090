import numpy as np
import pytest
from hypothesis import given

from clusterdyn.dynamics import DynamicsState, cluster_aba
from clusterdyn.generators import belt_leg, four_bar, gear_pair, random_model, random_state
from clusterdyn.oracle import (KKTConvergenceError, bias_force, constraint_stack, dense_dynamics,
                               kkt_forward_dynamics, mass_matrix)
from clusterdyn.tree import TreeModel, tree_aba, tree_rnea

from conftest import rel_err, seeds

NO_G = (0.0, 0.0, 0.0)


@given(seeds)
def test_mass_matrix_symmetric_and_matches_rnea_columns(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, max_bodies=8)
    q, qd, _ = random_state(m, rng)
    H = mass_matrix(m, q)
    assert np.max(np.abs(H - H.T)) < 1e-12 * (1 + np.abs(H).max())
    tm = TreeModel.from_model(m)
    j = int(rng.integers(m.n))
    e = np.zeros(m.n)
    e[j] = 1.0
    assert rel_err(H[:, j], tree_rnea(tm, q, np.zeros(m.n), e, NO_G)) < 1e-12
    assert np.min(np.linalg.eigvalsh(H)) > 0


def test_bias_zero_at_rest_without_gravity():
    m = belt_leg()
    assert np.array_equal(bias_force(m, np.full(m.n, 0.3), np.zeros(m.n), NO_G), np.zeros(m.n))


@given(seeds)
def test_loop_free_kkt_is_tree_aba(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, kinds=("single",))
    q, qd, tau = random_state(m, rng)
    res = kkt_forward_dynamics(m, q, qd, tau)
    assert res.iterations == 0 and len(res.lam) == 0
    assert rel_err(res.qdd, tree_aba(TreeModel.from_model(m), q, qd, tau)) < 1e-12


def test_gear_pair_closed_form():
    eta, I_L, I_R = 9.0, 0.7, 0.02
    m = gear_pair(eta, I_L, I_R)
    res = kkt_forward_dynamics(m, np.zeros(2), np.zeros(2), np.array([1.0, 0.0]), NO_G)
    assert abs(res.qdd[0] - 1.0 / (I_L + eta ** 2 * I_R)) < 1e-10


@given(seeds)
def test_multiplier_sign_convention(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    q, qd, tau = random_state(m, rng)
    dd = dense_dynamics(m, q, qd)
    res = kkt_forward_dynamics(m, q, qd, tau)
    lhs = dd.H @ res.qdd + dd.c + dd.K.T @ res.lam
    assert np.max(np.abs(lhs - tau)) < 1e-10 * (1 + np.abs(tau).max() + np.abs(dd.c).max())


@given(seeds)
def test_kkt_matches_cluster_aba(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    q, qd, tau = random_state(m, rng)
    a = cluster_aba(m, DynamicsState(q=q, qd=qd, tau_tree=tau)).qdd
    assert rel_err(kkt_forward_dynamics(m, q, qd, tau).qdd, a) < 1e-8


def test_duplicated_rows_are_tolerated():
    m = four_bar()
    q, qd, tau = random_state(m, np.random.default_rng(4))
    K, k = constraint_stack(m, q, qd)
    plain = kkt_forward_dynamics(m, q, qd, tau)
    dup = kkt_forward_dynamics(m, q, qd, tau, extra_rows=(K, k))
    assert rel_err(dup.qdd, plain.qdd) < 1e-8


def test_nonconvergence_reports_residual():
    m = four_bar()
    q, qd, tau = random_state(m, np.random.default_rng(4))
    with pytest.raises(KKTConvergenceError) as err:
        kkt_forward_dynamics(m, q, qd, tau, mu=1e3, tol=1e-15, max_iter=2)
    assert err.value.residual > 0
