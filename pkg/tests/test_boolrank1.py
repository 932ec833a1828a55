import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l0lra.boolrank1 import (PHI_MAX, beta_objective, boolean_cost, boolean_exhaustive_oracle,
                             estimate_beta, solve_boolean_combined, solve_boolean_exact_fpt,
                             solve_boolean_smallopt, technical_profile)
from l0lra.errors import EnumerationLimitError, PreconditionError
from l0lra.instances import gen_planted_boolean
from l0lra.matcore import from_dense


def brute_oracle(M):
    """Every (u, v) pair for tiny matrices."""
    m, n = M.shape
    best = None
    for ub in itertools.product([0, 1], repeat=m):
        for vb in itertools.product([0, 1], repeat=n):
            c = int(np.count_nonzero(M != np.outer(ub, vb)))
            best = c if best is None else min(best, c)
    return best


def random_binary(seed, m, n, p=0.5):
    r = np.random.default_rng(seed)
    return from_dense((r.random((m, n)) < p).astype(float), binary=True)


def test_profile_zero_solution():
    A = random_binary(0, 10, 10)
    prof = technical_profile(A, np.zeros(10), np.zeros(10))
    assert prof.cost == A.total_nnz
    assert np.array_equal(prof.y, A.row_nnz) and not prof.x.any()


def test_profile_exact_product():
    P = gen_planted_boolean(10, 10, 4, 5, 0, 1)
    prof = technical_profile(P.matrix, P.factors["u"], P.factors["v"])
    assert prof.cost == 0
    assert not prof.x[prof.R].any() and not prof.y[prof.R].any()


@given(st.integers(0, 2 ** 32 - 1))
def test_profile_identities_random(seed):
    r = np.random.default_rng(seed)
    A = random_binary(seed, 10, 10)
    u = (r.random(10) < 0.5).astype(float)
    v = (r.random(10) < 0.5).astype(float)
    prof = technical_profile(A, u, v)
    assert np.all(A.row_nnz == prof.beta - prof.x + prof.y)
    assert prof.cost == int(np.count_nonzero(A.to_dense() != np.outer(u, v)))
    assert abs(A.total_nnz - prof.alpha * prof.beta) <= prof.cost


def test_boolean_cost_validation():
    A = random_binary(1, 4, 4)
    with pytest.raises(PreconditionError):
        boolean_cost(A, np.full(4, 2.0), np.zeros(4))
    with pytest.raises(PreconditionError):
        technical_profile(from_dense(2 * np.eye(2)), np.zeros(2), np.zeros(2))


@given(st.lists(st.integers(0, 15), min_size=1, max_size=30))
def test_beta_objective_matches_direct_sum(counts):
    c = np.array(counts)
    lam = beta_objective(c, 15)
    for b in range(1, 16):
        assert lam[b - 1] == np.minimum(c, np.abs(c - b)).sum()


def test_estimate_beta_exact_planted():
    P = gen_planted_boolean(30, 40, 9, 12, 0, 3)
    A = P.matrix
    assert estimate_beta(A.row_nnz, 30, 40) == 12
    assert beta_objective(A.row_nnz, 40)[11] == 0
    assert estimate_beta(A.col_nnz, 40, 30) == 9
    with pytest.raises(PreconditionError):
        estimate_beta(np.zeros(3, dtype=int), 3, 3)


def test_estimate_beta_noisy():
    for seed in range(5):
        P = gen_planted_boolean(100, 100, 40, 40, 16, seed)
        b = estimate_beta(P.matrix.row_nnz, 100, 100)
        assert int(np.ceil(0.97 * 40)) <= b <= int(np.floor(1.02 * 40))


def test_oracle_examples():
    assert boolean_exhaustive_oracle(from_dense(np.zeros((3, 3)), binary=True)).cost == 0
    assert boolean_exhaustive_oracle(from_dense(np.eye(3), binary=True)).cost == 2
    with pytest.raises(EnumerationLimitError):
        boolean_exhaustive_oracle(random_binary(0, 21, 21))


@pytest.mark.parametrize("seed", range(15))
def test_oracle_sides_agree_and_match_brute_force(seed):
    A = random_binary(seed, 8, 8, 0.4)
    r = boolean_exhaustive_oracle(A, side="rows")
    c = boolean_exhaustive_oracle(A, side="cols")
    assert r.cost == c.cost
    assert r.cost == boolean_cost(A, r.u, r.v)
    if seed < 4:
        small = from_dense(A.to_dense()[:4, :5], binary=True)
        assert boolean_exhaustive_oracle(small).cost == brute_oracle(small.to_dense())


@pytest.mark.parametrize("mode", ["exact", "sampled"])
def test_smallopt_exact_product(mode):
    P = gen_planted_boolean(60, 60, 20, 25, 0, 2)
    sol = solve_boolean_smallopt(P.matrix, 0.01, mode, 0)
    assert sol.cost == 0 and not sol.fallback
    assert np.array_equal(sol.u, P.factors["u"]) and np.array_equal(sol.v, P.factors["v"])


def test_smallopt_state_sets_nested():
    P = gen_planted_boolean(200, 200, 80, 80, 60, 5)
    sol = solve_boolean_smallopt(P.matrix, 0.01, "exact", 0)
    st_ = sol.state
    assert set(st_.R_S) <= set(st_.R_R) and set(st_.C_S) <= set(st_.C_R)
    phi = 60 / P.matrix.total_nnz
    assert sol.cost <= (1 + 5 * phi) * 60 + 37 * phi ** 2 * P.matrix.total_nnz


def test_smallopt_counts_reads():
    P = gen_planted_boolean(100, 100, 40, 40, 10, 5)
    A = P.matrix
    A.stats.reset()
    solve_boolean_smallopt(A, 0.01, "exact", 0)
    assert A.stats.adjacency_reads >= A.total_nnz and A.stats.entry_reads == 0
    A.stats.reset()
    solve_boolean_smallopt(A, 0.01, "sampled", 0, c=0.05)
    assert A.stats.entry_reads > 0


def test_smallopt_validation():
    A = random_binary(0, 5, 5)
    with pytest.raises(PreconditionError):
        solve_boolean_smallopt(A, 0.5)
    with pytest.raises(PreconditionError):
        solve_boolean_smallopt(A, 0.01, mode="fast")


def test_combined_dense_noise_returns_column_solution():
    A = random_binary(3, 30, 30, 0.5)
    sol = solve_boolean_combined(A, 0)
    assert sol.info["branch"] == "column" and sol.info["phi"] > PHI_MAX


def test_combined_planted_bound():
    P = gen_planted_boolean(300, 300, 150, 150, 100, 9)
    psi = 100 / P.matrix.total_nnz
    sol = solve_boolean_combined(P.matrix, 1)
    assert sol.cost <= (1 + 500 * psi) * 100


def test_fpt_exact_product_and_strict_guard():
    P = gen_planted_boolean(12, 12, 5, 6, 0, 0)
    sol = solve_boolean_exact_fpt(P.matrix, 0)
    assert sol.cost == 0
    Q = gen_planted_boolean(12, 12, 6, 6, 3, 1)
    with pytest.raises(PreconditionError):
        solve_boolean_exact_fpt(Q.matrix, 0, strict=True)
    assert solve_boolean_exact_fpt(Q.matrix, 0).cost == boolean_exhaustive_oracle(Q.matrix).cost


@pytest.mark.parametrize("seed", range(3))
def test_fpt_in_regime_matches_oracle(seed):
    P = gen_planted_boolean(16, 200, 11, 150, 3, seed)
    sol = solve_boolean_exact_fpt(P.matrix, seed, strict=True)
    assert not sol.fallback
    assert sol.cost == boolean_exhaustive_oracle(P.matrix).cost
