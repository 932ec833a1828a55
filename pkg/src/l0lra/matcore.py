"""Sparse matrix storage, uniform nonzero sampling and exact l0 distances.

A :class:`SparseMatrix` keeps every column as a sorted adjacency array of
``(row, value)`` pairs together with the row and column nonzero counts.
Row adjacency arrays are stored as well.  All reads that algorithms make
through the public accessors are charged to an :class:`AccessStats`
instance, which is how read-complexity experiments are measured.

Real values are compared by exact equality of their 64-bit patterns.
"""
import threading

import numpy as np

from .errors import PreconditionError, MatrixFormatError


def as_rng(rng=None):
    """Return a ``numpy.random.Generator`` (seeds and ``None`` accepted)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def same_values(a, b):
    """Elementwise exact equality of float64 bit patterns (with -0 == 0)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return (a.view(np.int64) == b.view(np.int64)) | ((a == 0) & (b == 0))


class AccessStats(object):
    """Thread-safe counters for entry reads, adjacency reads and samples.

    ``entry_reads`` counts random-access lookups of a single cell,
    ``adjacency_reads`` counts cells read by scanning adjacency arrays and
    ``nonzero_samples`` counts uniformly sampled nonzero entries.
    """

    FIELDS = ("entry_reads", "adjacency_reads", "nonzero_samples")

    def __init__(self):
        self._lock = threading.Lock()
        self._paused = 0
        self.entry_reads = 0
        self.adjacency_reads = 0
        self.nonzero_samples = 0

    def add(self, entry_reads=0, adjacency_reads=0, nonzero_samples=0):
        if min(entry_reads, adjacency_reads, nonzero_samples) < 0:
            raise ValueError("access counters only grow")
        with self._lock:
            if self._paused:
                return
            self.entry_reads += int(entry_reads)
            self.adjacency_reads += int(adjacency_reads)
            self.nonzero_samples += int(nonzero_samples)

    def reset(self):
        with self._lock:
            self.entry_reads = 0
            self.adjacency_reads = 0
            self.nonzero_samples = 0

    def snapshot(self):
        with self._lock:
            return {f: getattr(self, f) for f in self.FIELDS}

    @property
    def total(self):
        s = self.snapshot()
        return sum(s.values())

    def paused(self):
        """Context manager that suspends counting (used for reporting)."""
        return _Paused(self)

    def __repr__(self):
        return "AccessStats(%s)" % ", ".join(
            "%s=%d" % kv for kv in self.snapshot().items())


class _Paused(object):
    def __init__(self, stats):
        self.stats = stats

    def __enter__(self):
        with self.stats._lock:
            self.stats._paused += 1
        return self.stats

    def __exit__(self, *exc):
        with self.stats._lock:
            self.stats._paused -= 1
        return False


def stats_delta(before, after):
    return {k: after[k] - before[k] for k in after}


class AliasTable(object):
    """Walker/Vose alias table for O(1) sampling from a finite distribution.

    Parameters
    ----------
    weights : array_like
        Non-negative weights, not all zero.
    """

    def __init__(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must not all be zero")
        n = w.size
        scaled = w * (n / total)
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] = (scaled[l] + scaled[s]) - 1.0
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        # leftovers are 1 up to rounding
        for i in small + large:
            prob[i] = 1.0
            alias[i] = i
        self.n = n
        self.prob = prob
        self.alias = alias

    def sample(self, rng, size=None):
        """Draw outcome indices; returns an int for ``size=None``."""
        rng = as_rng(rng)
        i = rng.integers(self.n, size=size)
        coin = rng.random(size=size)
        out = np.where(coin < self.prob[i], i, self.alias[i])
        if size is None:
            return int(out)
        return out

    def probabilities(self):
        """The exact outcome distribution encoded by the table."""
        p = self.prob / self.n
        np.add.at(p, self.alias, (1.0 - self.prob) / self.n)
        return p


class SparseMatrix(object):
    """Immutable sparse matrix with column and row adjacency arrays.

    Use :func:`from_triplets` or :func:`from_dense` to build one.  The
    attributes are read-only numpy arrays:

    ``col_ptr, row_idx, vals``
        compressed columns; ``row_idx`` is strictly increasing per column.
    ``row_ptr, col_idx, row_vals``
        compressed rows; ``col_idx`` is strictly increasing per row.
    ``col_nnz, row_nnz``
        nonzero counts per column and row.
    """

    def __init__(self, m, n, col_ptr, row_idx, vals, binary=False):
        self.m = int(m)
        self.n = int(n)
        self.col_ptr = np.asarray(col_ptr, dtype=np.int64)
        self.row_idx = np.asarray(row_idx, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=np.float64)
        self.binary = bool(binary)
        self.col_nnz = np.diff(self.col_ptr)
        self.total_nnz = int(self.row_idx.size)
        self.entry_col = np.repeat(np.arange(self.n, dtype=np.int64), self.col_nnz)
        # keys in column-major order; sorted because columns are sorted
        self._keys = self.entry_col * self.m + self.row_idx
        order = np.argsort(self.row_idx, kind="stable")
        self.col_idx = self.entry_col[order]
        self.row_vals = self.vals[order]
        self.row_nnz = np.bincount(self.row_idx, minlength=self.m).astype(np.int64)
        self.row_ptr = np.concatenate([[0], np.cumsum(self.row_nnz)]).astype(np.int64)
        self._row_order = order
        for a in (self.col_ptr, self.row_idx, self.vals, self.col_nnz,
                  self.entry_col, self._keys, self.col_idx, self.row_vals,
                  self.row_nnz, self.row_ptr):
            a.setflags(write=False)
        self.stats = AccessStats()
        self._alias = None
        self._alias_lock = threading.Lock()

    # -- basic properties -------------------------------------------------
    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def kind(self):
        return "binary" if self.binary else "real"

    @property
    def cols(self):
        """Per-column ``(rows, values)`` adjacency arrays (views)."""
        return [self.column(j) for j in range(self.n)]

    def __repr__(self):
        return "SparseMatrix(%d x %d, nnz=%d, kind=%s)" % (
            self.m, self.n, self.total_nnz, self.kind)

    def _check_index(self, i, j):
        if not (0 <= i < self.m and 0 <= j < self.n):
            raise IndexError("index (%d, %d) out of range for %dx%d" % (i, j, self.m, self.n))

    # -- access paths -----------------------------------------------------
    def column(self, j):
        """Adjacency array of column ``j`` (no reads charged)."""
        a, b = self.col_ptr[j], self.col_ptr[j + 1]
        return self.row_idx[a:b], self.vals[a:b]

    def row(self, i):
        """Adjacency array of row ``i`` (no reads charged)."""
        a, b = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[a:b], self.row_vals[a:b]

    def dense_column(self, j):
        out = np.zeros(self.m)
        r, v = self.column(j)
        out[r] = v
        return out

    def entry(self, i, j):
        """Return ``A[i, j]`` by binary search in column ``j``."""
        i, j = int(i), int(j)
        self._check_index(i, j)
        self.stats.add(entry_reads=1)
        r, v = self.column(j)
        p = np.searchsorted(r, i)
        if p < r.size and r[p] == i:
            return float(v[p])
        return 0.0

    def lookup(self, rows, cols, charge=True):
        """Vectorised :meth:`entry` over arrays of coordinates."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= self.m
                          or cols.min() < 0 or cols.max() >= self.n):
            raise IndexError("lookup index out of range")
        if charge:
            self.stats.add(entry_reads=rows.size)
        return self._lookup(rows, cols)

    def _lookup(self, rows, cols):
        keys = cols * self.m + rows
        pos = np.searchsorted(self._keys, keys)
        pos_c = np.minimum(pos, max(self.total_nnz - 1, 0))
        out = np.zeros(keys.shape)
        if self.total_nnz:
            hit = self._keys[pos_c] == keys
            out[hit] = self.vals[pos_c[hit]]
        return out

    def sample_nonzero(self, rng):
        """One uniformly random nonzero entry as ``(row, col, value)``."""
        r, c, v = self.sample_nonzeros(rng, 1)
        return int(r[0]), int(c[0]), float(v[0])

    def sample_nonzeros(self, rng, size, charge=True):
        """``size`` independent uniform nonzero entries (column alias table,
        then a uniform position inside the column)."""
        if self.total_nnz == 0:
            raise PreconditionError("cannot sample a nonzero from an empty matrix")
        rng = as_rng(rng)
        table = self.alias_table()
        size = int(size)
        col = table.sample(rng, size=size)
        off = rng.integers(0, self.col_nnz[col])
        pos = self.col_ptr[col] + off
        if charge:
            self.stats.add(nonzero_samples=size)
        return self.row_idx[pos], col, self.vals[pos]

    def alias_table(self):
        if self._alias is None:
            with self._alias_lock:
                if self._alias is None:
                    self._alias = AliasTable(self.col_nnz)
        return self._alias

    # -- conversions ------------------------------------------------------
    def to_dense(self):
        out = np.zeros((self.m, self.n))
        out[self.row_idx, self.entry_col] = self.vals
        return out

    def dense_columns(self, cols):
        cols = np.asarray(cols, dtype=np.int64)
        out = np.zeros((self.m, cols.size))
        for t, j in enumerate(cols):
            r, v = self.column(j)
            out[r, t] = v
        return out

    def dense_rows(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        out = np.zeros((rows.size, self.n))
        for t, i in enumerate(rows):
            c, v = self.row(i)
            out[t, c] = v
        return out

    def triplets(self):
        return list(zip(self.row_idx.tolist(), self.entry_col.tolist(), self.vals.tolist()))


# -- construction ---------------------------------------------------------
def from_triplets(m, n, entries, binary=False):
    """Build a :class:`SparseMatrix` from ``(row, col, value)`` triplets.

    Zero values are dropped.  Duplicate coordinates and out-of-range
    indices raise ``ValueError``.  With ``binary=True`` every stored value
    must equal 1.
    """
    m, n = int(m), int(n)
    if m < 0 or n < 0:
        raise ValueError("dimensions must be non-negative")
    entries = list(entries)
    if entries:
        arr = np.asarray(entries, dtype=np.float64).reshape(-1, 3)
        rows = arr[:, 0]
        cols = arr[:, 1]
        vals = arr[:, 2]
        if np.any(rows != np.floor(rows)) or np.any(cols != np.floor(cols)):
            raise ValueError("indices must be integers")
        rows = rows.astype(np.int64)
        cols = cols.astype(np.int64)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    return _from_coo(m, n, rows, cols, vals, binary)


def _from_coo(m, n, rows, cols, vals, binary):
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
        raise ValueError("entry index out of range for %dx%d matrix" % (m, n))
    keys = cols * max(m, 1) + rows
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
        k = keys[1:][keys[1:] == keys[:-1]][0]
        raise ValueError("duplicate coordinate (%d, %d)" % (k % max(m, 1), k // max(m, 1)))
    rows, cols, vals = rows[order], cols[order], vals[order]
    keep = vals != 0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    if binary and np.any(vals != 1.0):
        raise ValueError("binary matrix may only store the value 1")
    col_ptr = np.concatenate([[0], np.cumsum(np.bincount(cols, minlength=n))])
    return SparseMatrix(m, n, col_ptr, rows, vals, binary=binary)


def from_dense(M, binary=False):
    """Build a :class:`SparseMatrix` from a dense 2-d array."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a 2-d array")
    # column-major nonzero scan gives sorted keys directly
    c, r = np.nonzero(M.T)
    return _from_coo(M.shape[0], M.shape[1], r, c, M[r, c], binary)


def outer_product(u, v, binary=False):
    """Materialise ``u v^T`` as a :class:`SparseMatrix`."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    su = np.flatnonzero(u)
    sv = np.flatnonzero(v)
    rr = np.tile(su, sv.size)
    cc = np.repeat(sv, su.size)
    vals = u[rr] * v[cc]
    return _from_coo(u.size, v.size, rr, cc, vals, binary)


def materialize_rank1(A, j, v):
    """The matrix ``A[:, j] v^T`` as a :class:`SparseMatrix`."""
    return outer_product(A.dense_column(j), v)


# -- exact distances ------------------------------------------------------
def l0_distance_exact(A, B):
    """Number of cells where ``A`` and ``B`` differ.

    Computed as ``nnz(B) + |T2| - |T4|`` where ``T2`` are nonzeros of A
    that are zero in B and ``T4`` are nonzeros of A equal to B's entry.
    One pass over A's nonzeros with lookups into B.
    """
    if A.shape != B.shape:
        raise ValueError("dimension mismatch %s vs %s" % (A.shape, B.shape))
    A.stats.add(adjacency_reads=A.total_nnz)
    B.stats.add(entry_reads=A.total_nnz)
    if A.total_nnz == 0:
        return B.total_nnz
    b = B._lookup(A.row_idx, A.entry_col)
    t2 = int(np.count_nonzero(b == 0))
    t4 = int(np.count_nonzero(same_values(A.vals, b)))
    return B.total_nnz + t2 - t4


def residual_exact(A, j, v):
    """Exact ``||A - A[:, j] v^T||_0`` without materialising the product.

    The product entry at ``(i, c)`` is the float ``A[i, j] * v[c]``.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != A.n:
        raise ValueError("coefficient vector has length %d, expected %d" % (v.size, A.n))
    j = int(j)
    if not 0 <= j < A.n:
        raise IndexError("column %d out of range" % j)
    u = A.dense_column(j)
    nnz_b = int(A.col_nnz[j]) * int(np.count_nonzero(v))
    A.stats.add(adjacency_reads=A.total_nnz + int(A.col_nnz[j]))
    if A.total_nnz == 0:
        return nnz_b
    b = u[A.row_idx] * v[A.entry_col]
    t2 = int(np.count_nonzero(b == 0))
    t4 = int(np.count_nonzero(same_values(A.vals, b)))
    return nnz_b + t2 - t4


# -- MatrixMarket ---------------------------------------------------------
def write_matrix_market(path, A, comments=()):
    """Write ``A`` in MatrixMarket coordinate format (1-based indices)."""
    field = "pattern" if A.binary else "real"
    lines = ["%%%%MatrixMarket matrix coordinate %s general" % field]
    for c in comments:
        lines.append("%" + str(c))
    lines.append("%d %d %d" % (A.m, A.n, A.total_nnz))
    r = (A.row_idx + 1).tolist()
    c = (A.entry_col + 1).tolist()
    if A.binary:
        lines.extend("%d %d" % rc for rc in zip(r, c))
    else:
        lines.extend("%d %d %s" % (a, b, format(v, ".17g"))
                     for a, b, v in zip(r, c, A.vals.tolist()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path):
    """Read a coordinate MatrixMarket file (``real``, ``integer`` or
    ``pattern``, ``general`` symmetry only)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise MatrixFormatError("cannot read %s: %s" % (path, e))
    lines = text.splitlines()
    if not lines:
        raise MatrixFormatError("%s: empty file" % path)
    header = lines[0].split()
    if (len(header) < 5 or header[0].lower() != "%%matrixmarket"
            or header[1].lower() != "matrix" or header[2].lower() != "coordinate"):
        raise MatrixFormatError("%s: not a coordinate MatrixMarket file" % path)
    field, symmetry = header[3].lower(), header[4].lower()
    if field not in ("real", "integer", "pattern", "double"):
        raise MatrixFormatError("%s: unsupported field %r" % (path, field))
    if symmetry != "general":
        raise MatrixFormatError("%s: unsupported symmetry %r" % (path, symmetry))
    body = [l for l in lines[1:] if l.strip() and not l.lstrip().startswith("%")]
    if not body:
        raise MatrixFormatError("%s: missing size line" % path)
    try:
        m, n, nnz = (int(x) for x in body[0].split()[:3])
        rows, cols, vals = [], [], []
        for l in body[1:]:
            parts = l.split()
            rows.append(int(parts[0]) - 1)
            cols.append(int(parts[1]) - 1)
            vals.append(1.0 if field == "pattern" else float(parts[2]))
    except (ValueError, IndexError) as e:
        raise MatrixFormatError("%s: malformed entry (%s)" % (path, e))
    if len(rows) != nnz:
        raise MatrixFormatError("%s: expected %d entries, found %d" % (path, nnz, len(rows)))
    try:
        return _from_coo(m, n, rows, cols, vals, binary=(field == "pattern"))
    except ValueError as e:
        raise MatrixFormatError("%s: %s" % (path, e))
