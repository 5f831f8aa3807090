import numpy as np
import pytest
from hypothesis import given

from clusterdyn.counting import OpCounter, counted_array, values_of
from clusterdyn.linalg import SingularMatrixError, ldlt_factor, ldlt_solve, lu_factor, lu_solve, solve_spd

from conftest import seeds


def spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


@given(seeds)
def test_ldlt_reconstructs_and_solves(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    A, b = spd(rng, n), rng.standard_normal(n)
    L, d = ldlt_factor(A)
    assert np.allclose(L @ np.diag(d) @ L.T, A, atol=1e-10)
    assert np.allclose(ldlt_solve(L, d, b), np.linalg.solve(A, b), atol=1e-10)
    assert np.allclose(solve_spd(A, b), np.linalg.solve(A, b), atol=1e-10)


def test_ldlt_counted_matches_float():
    rng = np.random.default_rng(0)
    A, b = spd(rng, 4), rng.standard_normal(4)
    c = OpCounter()
    L, d = ldlt_factor(counted_array(A, c))
    x = ldlt_solve(L, d, counted_array(b, c))
    assert np.allclose(values_of(x), np.linalg.solve(A, b), atol=1e-12)
    assert c.total > 0


def test_ldlt_rejects_semidefinite():
    with pytest.raises(SingularMatrixError):
        ldlt_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_quasidefinite_ldlt():
    A = np.array([[2.0, 1.0], [1.0, -1e-3]])
    L, d = ldlt_factor(A, rel_tol=0.0, definite=False)
    assert d[1] < 0
    assert np.allclose(ldlt_solve(L, d, np.array([1.0, 2.0])), np.linalg.solve(A, [1.0, 2.0]))


@given(seeds)
def test_lu_solves_general_systems(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    A = rng.standard_normal((n, n)) + 3 * np.eye(n)
    b = rng.standard_normal(n)
    LU, perm, cond = lu_factor(A)
    assert cond >= 1.0
    assert np.allclose(lu_solve(LU, perm, b), np.linalg.solve(A, b), atol=1e-9)


def test_lu_reports_condition_on_singular():
    with pytest.raises(SingularMatrixError) as err:
        lu_factor(np.array([[1.0, 2.0], [2.0, 4.0 + 1e-14]]))
    assert err.value.condition > 1e12
