import numpy as np
import pytest
from hypothesis import given, strategies as st

from l0lra.errors import MatrixFormatError, PreconditionError
from l0lra.matcore import (AliasTable, from_dense, from_triplets, l0_distance_exact,
                           outer_product, read_matrix_market, residual_exact, same_values,
                           write_matrix_market)

from conftest import random_sparse_dense


def dense_distance(A, B):
    return int(sum(A[i, j] != B[i, j] for i in range(A.shape[0]) for j in range(A.shape[1])))


def small_matrix():
    return st.tuples(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2 ** 32 - 1),
                     st.floats(0.0, 1.0))


def test_from_triplets_drops_zeros_and_sorts():
    A = from_triplets(3, 2, [(2, 0, 1.5), (0, 0, 2.0), (1, 1, 0.0)])
    assert A.total_nnz == 2
    assert list(A.column(0)[0]) == [0, 2]
    assert A.col_nnz.tolist() == [2, 0]
    assert A.row_nnz.tolist() == [1, 0, 1]


def test_from_triplets_rejects_duplicates_and_range():
    with pytest.raises(ValueError):
        from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0)])
    with pytest.raises(ValueError):
        from_triplets(2, 2, [(2, 0, 1.0)])


def test_entry_and_lookup_charge_reads():
    A = from_dense(np.array([[1.0, 0.0], [0.0, 3.0]]))
    assert A.entry(1, 1) == 3.0 and A.entry(0, 1) == 0.0
    assert A.stats.entry_reads == 2
    vals = A.lookup([0, 1, 1], [0, 0, 1])
    assert vals.tolist() == [1.0, 0.0, 3.0]
    assert A.stats.entry_reads == 5
    with A.stats.paused():
        A.entry(0, 0)
    assert A.stats.entry_reads == 5
    with pytest.raises(IndexError):
        A.entry(2, 0)


def test_arrays_are_read_only():
    A = from_dense(np.eye(3))
    with pytest.raises(ValueError):
        A.vals[0] = 5.0


@given(small_matrix())
def test_csc_csr_agree_with_dense(params):
    m, n, seed, d = params
    M = random_sparse_dense(np.random.default_rng(seed), m, n, d)
    A = from_dense(M)
    assert np.array_equal(A.to_dense(), M)
    for i in range(m):
        cols, vals = A.row(i)
        assert np.array_equal(cols, np.flatnonzero(M[i]))
        assert np.array_equal(vals, M[i, cols])
    rr, cc = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    assert np.array_equal(A.lookup(rr.ravel(), cc.ravel()), M.ravel())


@given(small_matrix(), st.integers(0, 2 ** 32 - 1))
def test_l0_distance_matches_dense(params, seed2):
    m, n, seed, d = params
    r = np.random.default_rng(seed)
    M = random_sparse_dense(r, m, n, d)
    N = M.copy()
    flip = r.random((m, n)) < 0.3
    N[flip] = random_sparse_dense(np.random.default_rng(seed2), m, n, 0.5)[flip]
    assert l0_distance_exact(from_dense(M), from_dense(N)) == dense_distance(M, N)
    assert l0_distance_exact(from_dense(M), from_dense(M)) == 0


@given(small_matrix(), st.integers(0, 2 ** 32 - 1))
def test_residual_exact_matches_dense(params, seed2):
    m, n, seed, d = params
    M = random_sparse_dense(np.random.default_rng(seed), m, n, d)
    r = np.random.default_rng(seed2)
    j = int(r.integers(n))
    v = r.choice([0.0, 0.5, 1.0, -2.0, 3.0], size=n)
    dense = np.outer(M[:, j], v)
    assert residual_exact(from_dense(M), j, v) == dense_distance(M, dense)


def test_residual_exact_bad_inputs():
    A = from_dense(np.eye(3))
    with pytest.raises(IndexError):
        residual_exact(A, 3, np.zeros(3))
    with pytest.raises(ValueError):
        residual_exact(A, 0, np.zeros(2))


def test_distance_identity_examples():
    A = from_dense(np.eye(4))
    assert l0_distance_exact(A, from_dense(np.zeros((4, 4)))) == 4
    assert l0_distance_exact(A, outer_product(np.ones(4), np.ones(4))) == 12
    with pytest.raises(ValueError):
        l0_distance_exact(A, from_dense(np.eye(3)))


def test_same_values_is_bitwise():
    a = np.array([0.1 + 0.2, 1.0, 0.0])
    b = np.array([0.3, 1.0, -0.0])
    assert same_values(a, b).tolist() == [False, True, True]


def test_alias_table_probabilities_exact():
    w = np.array([1, 0, 3, 4, 2], dtype=float)
    t = AliasTable(w)
    assert np.allclose(t.probabilities(), w / w.sum(), atol=1e-12)


def test_alias_table_empirical_frequencies():
    w = np.array([5, 1, 0, 2, 2], dtype=float)
    t = AliasTable(w)
    draws = t.sample(np.random.default_rng(0), size=200000)
    freq = np.bincount(draws, minlength=5) / draws.size
    assert freq[2] == 0
    assert np.all(np.abs(freq - w / w.sum()) < 0.005)


def test_sample_nonzeros_uniform():
    M = np.zeros((6, 4))
    M[0, 0] = 1
    M[:, 1] = 2
    M[2:5, 3] = 3
    A = from_dense(M)
    r, c, v = A.sample_nonzeros(np.random.default_rng(1), 100000)
    assert np.all(M[r, c] == v)
    counts = np.bincount(r * 4 + c, minlength=24)[M.ravel() != 0]
    assert counts.size == 10
    assert np.all(np.abs(counts / 100000 - 0.1) < 0.006)
    assert A.stats.nonzero_samples == 100000
    with pytest.raises(PreconditionError):
        from_dense(np.zeros((2, 2))).sample_nonzeros(np.random.default_rng(0), 1)


@given(small_matrix())
def test_matrix_market_roundtrip_real(tmp_path_factory, params):
    m, n, seed, d = params
    r = np.random.default_rng(seed)
    M = random_sparse_dense(r, m, n, d) * r.standard_normal()
    path = str(tmp_path_factory.mktemp("mm") / "a.mtx")
    write_matrix_market(path, from_dense(M))
    B = read_matrix_market(path)
    assert B.shape == (m, n)
    assert np.all(same_values(B.to_dense(), M))


def test_matrix_market_pattern_and_comments(tmp_path):
    p = tmp_path / "b.mtx"
    p.write_text("%%MatrixMarket matrix coordinate pattern general\n% note\n3 3 2\n1 1\n3 2\n")
    A = read_matrix_market(str(p))
    assert A.binary and A.to_dense().tolist() == [[1, 0, 0], [0, 0, 0], [0, 1, 0]]
    q = tmp_path / "c.mtx"
    write_matrix_market(str(q), A)
    assert read_matrix_market(str(q)).to_dense().tolist() == A.to_dense().tolist()


@pytest.mark.parametrize("text", [
    "not a header\n1 1 0\n",
    "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 1\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n",
    "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n",
])
def test_matrix_market_malformed(tmp_path, text):
    p = tmp_path / "bad.mtx"
    p.write_text(text)
    with pytest.raises(MatrixFormatError):
        read_matrix_market(str(p))
