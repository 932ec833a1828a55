import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l0lra.errors import EnumerationLimitError, PreconditionError
from l0lra.l0regress import (RegressionInstance, greedy_row_basis, l0_regress_approx,
                             l0_regress_approx_many, l0_regress_exact, l0_regress_exact_many,
                             residual_count)


def consistent_subset_oracle(U, b):
    """Independent exhaustive oracle: the largest row subset whose system is
    consistent (least squares residual zero) gives cost m - |subset|."""
    m = U.shape[0]
    for size in range(m, 0, -1):
        for K in itertools.combinations(range(m), size):
            K = list(K)
            x = np.linalg.lstsq(U[K], b[K], rcond=None)[0]
            if np.allclose(U[K] @ x, b[K], rtol=1e-9, atol=1e-9):
                return m - size
    return m


def mode_oracle(u, b):
    """k = 1: the best x is 0 or the most frequent ratio b_i / u_i."""
    best = np.count_nonzero(b)
    for i in np.flatnonzero(u):
        x = b[i] / u[i]
        best = min(best, residual_count(u[:, None], [x], b))
    return best


def outlier_instance(rng, m, k, outliers):
    U = rng.integers(-4, 5, size=(m, k)).astype(float)
    x = rng.integers(-3, 4, size=k).astype(float)
    b = U @ x
    idx = rng.choice(m, size=outliers, replace=False)
    b[idx] += rng.choice([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0], size=outliers)
    return U, b


def test_consistent_system_cost_zero():
    U = np.array([[1.0, 2.0], [3.0, 1.0], [0.0, 1.0], [2.0, 2.0]])
    x, cost = l0_regress_exact(RegressionInstance(U, U[:, 0]))
    assert cost == 0
    assert np.allclose(x, [1.0, 0.0])
    z, c2 = l0_regress_approx(RegressionInstance(U, U @ [2.0, -1.0]), np.random.default_rng(0))
    assert c2 == 0


def test_mode_example():
    x, cost = l0_regress_exact(RegressionInstance(np.ones((3, 1)), [1.0, 1.0, 2.0]))
    assert cost == 1 and x[0] == 1.0


@pytest.mark.parametrize("seed", range(20))
def test_exact_matches_consistent_subset_oracle(seed):
    rng = np.random.default_rng(seed)
    U, b = outlier_instance(rng, 8, 2, int(rng.integers(0, 4)))
    if seed % 3 == 0:
        U[rng.integers(8)] = 0.0
    _, cost = l0_regress_exact(RegressionInstance(U, b))
    assert cost == consistent_subset_oracle(U, b)


@given(st.integers(0, 2 ** 32 - 1))
def test_k1_exact_and_approx_equal_mode(seed):
    rng = np.random.default_rng(seed)
    u = rng.integers(-3, 4, size=9).astype(float)
    b = rng.integers(-3, 4, size=9).astype(float)
    want = mode_oracle(u, b)
    assert l0_regress_exact(RegressionInstance(u, b))[1] == want
    assert l0_regress_approx(RegressionInstance(u, b), rng)[1] == want


@given(st.integers(0, 2 ** 32 - 1))
def test_approx_never_beats_exact_and_reports_true_cost(seed):
    rng = np.random.default_rng(seed)
    U, b = outlier_instance(rng, 10, 2, 3)
    inst = RegressionInstance(U, b)
    z, cost = l0_regress_approx(inst, rng)
    _, best = l0_regress_exact(inst)
    assert cost == residual_count(U, z, b)
    assert best <= cost


def test_approx_contract_planted_outliers():
    rng = np.random.default_rng(2024)
    ok = 0
    for _ in range(100):
        U, b = outlier_instance(rng, 10, 2, 3)
        inst = RegressionInstance(U, b)
        _, exact = l0_regress_exact(inst)
        _, approx = l0_regress_approx(inst, rng, repeats=40)
        ok += approx <= 2 * exact
    assert ok >= 95


def test_many_matches_single_columns(rng):
    U, _ = outlier_instance(rng, 9, 2, 0)
    B = np.column_stack([outlier_instance(rng, 9, 2, 2)[1] for _ in range(5)])
    B = np.column_stack([U @ rng.integers(-2, 3, size=2) for _ in range(3)] + [B])
    X, costs = l0_regress_exact_many(U, B)
    for c in range(B.shape[1]):
        assert costs[c] == l0_regress_exact(RegressionInstance(U, B[:, c]))[1]
        assert costs[c] == residual_count(U, X[:, c], B[:, c])
    assert np.all(costs[:3] == 0)


def test_zero_rows_do_not_count_towards_limit():
    U = np.zeros((30, 2))
    U[:4] = [[1, 0], [0, 1], [1, 1], [2, 1]]
    b = np.zeros(30)
    b[:4] = U[:4] @ [1.0, 2.0]
    b[10] = 7.0
    _, cost = l0_regress_exact(RegressionInstance(U, b))
    assert cost == 1
    with pytest.raises(EnumerationLimitError):
        l0_regress_exact(RegressionInstance(np.ones((15, 2)), np.zeros(15)))


def test_instance_validation():
    with pytest.raises(PreconditionError):
        RegressionInstance(np.ones((3, 1)), np.ones(2))
    with pytest.raises(PreconditionError):
        l0_regress_approx_many(np.ones((3, 1)), np.ones(3), repeats=0)


def test_greedy_row_basis_is_independent(rng):
    U = rng.standard_normal((8, 3))
    U[1] = U[0] * 2
    S = greedy_row_basis(U, [0, 1, 2, 3, 4], 3, 1e-9)
    assert S.tolist() == [0, 2, 3]
