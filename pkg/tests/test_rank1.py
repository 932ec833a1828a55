import numpy as np
import pytest
from hypothesis import given, strategies as st

from l0lra.boolrank1 import boolean_exhaustive_oracle
from l0lra.errors import PreconditionError
from l0lra.instances import gen_identity_plus_ones, gen_planted_boolean, gen_planted_rank1_real
from l0lra.matcore import from_dense, residual_exact
from l0lra.rank1 import (WeightClassPartition, detect_exact_rank1, exact_column_fit,
                         fit_column_sampled, mode_fit, solve_rank1, solve_rank1_baseline,
                         solve_rank1_boolean_2eps)


def dense_column_cost(M, j, z):
    return int(np.count_nonzero(M - np.outer(M[:, j], z)))


def brute_column_fit_cost(M, j):
    """Per-column oracle: for each target column try 0 and every ratio."""
    u = M[:, j]
    total = 0
    for c in range(M.shape[1]):
        cands = [0.0] + [M[i, c] / u[i] for i in np.flatnonzero(u)]
        total += min(int(np.count_nonzero(M[:, c] - u * z)) for z in cands)
    return total


def test_detect_exact_rank1_examples():
    A = from_dense(np.outer([1.0, 2.0], [3.0, 0.0, 5.0]))
    u, v = detect_exact_rank1(A)
    assert np.array_equal(np.outer(u, v), A.to_dense())
    assert detect_exact_rank1(from_dense(np.eye(2))) is None
    u, v = detect_exact_rank1(from_dense(np.zeros((2, 3))))
    assert not u.any() and not v.any()


def test_mode_fit_examples():
    u = np.array([1.0, 2.0, 0.0, -1.0])
    M = np.column_stack([u, 3 * u, np.array([1.0, 2.0, 5.0, 4.0])])
    A = from_dense(M)
    z = mode_fit(A, u, np.flatnonzero(u))
    assert z[0] == 1.0 and z[1] == 3.0 and z[2] == 1.0
    M2 = np.outer(u, [1.0, 2.0, 3.0])
    z2 = fit_column_sampled(from_dense(M2), u, 0.1, np.random.default_rng(0))
    assert z2.tolist() == [1.0, 2.0, 3.0]
    assert residual_exact(from_dense(M2), 0, z2) == 0


@given(st.integers(0, 2 ** 32 - 1))
def test_exact_column_fit_matches_brute_force(seed):
    r = np.random.default_rng(seed)
    M = np.where(r.random((6, 5)) < 0.6, r.choice([-2.0, -1.0, 1.0, 2.0, 4.0], (6, 5)), 0.0)
    A = from_dense(M)
    j = int(r.integers(5))
    z = exact_column_fit(A, j)
    assert residual_exact(A, j, z) == dense_column_cost(M, j, z) == brute_column_fit_cost(M, j)


def test_sampled_fit_close_to_exact_per_column():
    rng = np.random.default_rng(3)
    m, n = 400, 60
    u = rng.choice([-2.0, -1.0, 1.0, 3.0], size=m)
    M = np.outer(u, rng.choice([1.0, 2.0, -1.0], size=n))
    bad = rng.random((m, n)) < 0.05
    M[bad] = rng.choice([5.0, 7.0, 0.0], size=bad.sum())
    M[:, 0] = u
    A = from_dense(M)
    z_exact = exact_column_fit(A, 0)
    z_s = fit_column_sampled(A, u, 0.2, rng)
    cost_exact = np.count_nonzero(M - np.outer(u, z_exact), axis=0)
    cost_s = np.count_nonzero(M - np.outer(u, z_s), axis=0)
    ok = np.mean(cost_s <= 1.2 * cost_exact)
    assert ok >= 0.95


def test_weight_classes():
    M = np.zeros((8, 4))
    M[:1, 1] = 1
    M[:3, 2] = 1
    M[:8, 3] = 1
    part = WeightClassPartition.of(from_dense(M))
    assert [c.tolist() for c in part.classes] == [[0], [1], [2], [], [3]]
    assert part.class_of(2) == 2


@pytest.mark.parametrize("n", [10, 50])
def test_baseline_identity_plus_ones(n):
    A = gen_identity_plus_ones(n)
    assert solve_rank1_baseline(A).cost_exact == 2 * (n - 1)


def test_baseline_planted_bound():
    for seed in range(10):
        P = gen_planted_rank1_real(8, 8, 0.75, 4, seed)
        assert solve_rank1_baseline(P.matrix).cost_exact <= 8


def test_exact_rank1_costs_zero():
    A = from_dense(np.outer([1.0, -2.0, 3.0, 0.0], [2.0, 1.0, 1.0, 4.0]))
    sol = solve_rank1(A, 0.1, 0)
    assert sol.cost_exact == 0 and sol.exact_zero


def test_single_column():
    A = from_dense(np.array([[1.0], [2.0]]))
    sol = solve_rank1(A, 0.1, 0)
    assert sol.column == 0 and sol.coeffs.tolist() == [1.0] and sol.exact_zero


def test_solve_rank1_planted_and_estimate():
    P = gen_planted_rank1_real(200, 200, 0.5, 50, 1)
    sol = solve_rank1(P.matrix, 0.1, 2)
    assert sol.cost_exact <= 105
    assert sol.cost_estimate <= (2 + 0.2) * 50


def test_thread_count_invariance():
    P = gen_planted_rank1_real(60, 60, 0.5, 30, 5)
    a = solve_rank1(P.matrix, 0.1, 9, threads=1)
    b = solve_rank1(P.matrix, 0.1, 9, threads=4)
    assert a.column == b.column and np.array_equal(a.coeffs, b.coeffs)
    assert a.cost_estimate == b.cost_estimate


def test_epsilon_range():
    with pytest.raises(PreconditionError):
        solve_rank1(from_dense(np.eye(2)), 0.2)


def test_boolean_variant():
    P = gen_planted_boolean(100, 100, 40, 40, 30, 4)
    sol = solve_rank1_boolean_2eps(P.matrix, 0.1, 4)
    assert sol.cost_exact <= 63
    assert set(np.unique(sol.coeffs)) <= {0.0, 1.0}
    clean = gen_planted_boolean(20, 20, 5, 6, 0, 1)
    assert solve_rank1_boolean_2eps(clean.matrix, 0.1, 1).cost_exact == 0
    with pytest.raises(PreconditionError):
        solve_rank1_boolean_2eps(from_dense(2 * np.eye(3)))


def test_boolean_variant_against_oracle():
    rng = np.random.default_rng(8)
    ok = 0
    for t in range(100):
        M = (rng.random((8, 8)) < 0.5).astype(float)
        if not M.any():
            M[0, 0] = 1
        A = from_dense(M, binary=True)
        opt = boolean_exhaustive_oracle(A).cost
        ok += solve_rank1_boolean_2eps(A, 0.1, t).cost_exact <= 2.2 * opt
    assert ok >= 95
