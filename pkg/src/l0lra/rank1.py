"""Real and boolean l0 rank-1 approximation from columns of the input.

Every solution here has the form ``A[:, j] z^T``: a column of ``A``
scaled by a coefficient vector.  The column-scan baseline fits every
column exactly; :func:`solve_rank1` samples a few columns from each weight
class, fits them on a sample of rows and ranks them by an estimated
residual.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PreconditionError
from .estimate import EstimatorConfig, residual_race
from .matcore import as_rng, residual_exact, same_values

#: constant in the ``c eps^-2 log`` sample sizes
SAMPLE_CONSTANT = 8.0


@dataclass
class RankOneSolution:
    """``A[:, column] coeffs^T`` (or ``u coeffs^T`` when ``u`` is given)."""
    column: Optional[int]
    coeffs: np.ndarray
    cost_estimate: Optional[float] = None
    cost_exact: Optional[int] = None
    u: Optional[np.ndarray] = None
    exact_zero: bool = False
    info: dict = field(default_factory=dict)

    def left_vector(self, A):
        if self.u is not None:
            return np.asarray(self.u, dtype=np.float64)
        return A.dense_column(self.column)


@dataclass
class WeightClassPartition:
    """Columns bucketed by nonzero count: class 0 holds empty columns and
    class ``i >= 1`` holds columns with ``2**(i-1) <= nnz < 2**i``."""
    classes: list

    @classmethod
    def of(cls, A):
        idx = np.array([int(c).bit_length() for c in A.col_nnz], dtype=np.int64)
        top = int(idx.max()) if idx.size else 0
        return cls([np.flatnonzero(idx == i) for i in range(top + 1)])

    def class_of(self, j):
        for i, members in enumerate(self.classes):
            if j in members:
                return i
        raise KeyError(j)


def detect_exact_rank1(A):
    """Return ``(u, v)`` with ``A = u v^T`` exactly, or ``None``.

    ``u`` is the first nonzero column, so ``v`` has a 1 at that column.
    Runs in ``O(nnz + n)``.
    """
    if A.total_nnz == 0:
        return np.zeros(A.m), np.zeros(A.n)
    j0 = int(np.flatnonzero(A.col_nnz)[0])
    rows0, vals0 = A.column(j0)
    k = rows0.size
    nzc = np.flatnonzero(A.col_nnz)
    if np.any(A.col_nnz[nzc] != k):
        return None
    A.stats.add(adjacency_reads=A.total_nnz)
    R = A.row_idx.reshape(nzc.size, k)
    if np.any(R != rows0[None, :]):
        return None
    V = A.vals.reshape(nzc.size, k)
    coef = V[:, 0] / vals0[0]
    if not np.all(same_values(vals0[None, :] * coef[:, None], V)):
        return None
    u = np.zeros(A.m)
    u[rows0] = vals0
    v = np.zeros(A.n)
    v[nzc] = coef
    v[j0] = 1.0
    return u, v


def _gather_rows(A, rows):
    """Concatenated row adjacency arrays of ``rows``; charges the reads."""
    rows = np.asarray(rows, dtype=np.int64)
    lens = A.row_nnz[rows]
    total = int(lens.sum())
    A.stats.add(adjacency_reads=total)
    starts = A.row_ptr[rows]
    owner = np.repeat(np.arange(rows.size), lens)
    offs = np.arange(total) - np.repeat(np.cumsum(lens) - lens, lens)
    pos = starts[owner] + offs
    return rows[owner], A.col_idx[pos], A.row_vals[pos]


def mode_fit(A, u, rows, boolean=False):
    """Per-column mode of ratios ``A[i, c] / u[i]`` over ``rows``.

    ``rows`` must lie in ``supp(u)``.  The value 0 competes with the
    number of listed rows where ``A[i, c] = 0``.  Ties prefer 0, then the
    smallest absolute value, then the smallest bit pattern.  In boolean
    mode the candidates are only 0 and 1.
    """
    z = np.zeros(A.n)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return z
    r, c, a = _gather_rows(A, rows)
    nz_in = np.bincount(c, minlength=A.n)
    zero_count = rows.size - nz_in
    if boolean:
        ones = np.bincount(c, weights=(a == 1.0), minlength=A.n)
        z[ones > zero_count] = 1.0
        return z
    ratio = a / u[r]
    bits = ratio.view(np.int64)
    order = np.lexsort((bits, c))
    c_s, b_s, r_s = c[order], bits[order], ratio[order]
    if c_s.size == 0:
        return z
    new = np.ones(c_s.size, dtype=bool)
    new[1:] = (c_s[1:] != c_s[:-1]) | (b_s[1:] != b_s[:-1])
    starts = np.flatnonzero(new)
    counts = np.diff(np.append(starts, c_s.size))
    g_col, g_val, g_bits = c_s[starts], r_s[starts], b_s[starts]
    pick = np.lexsort((g_bits, np.abs(g_val), -counts, g_col))
    first = np.ones(pick.size, dtype=bool)
    first[1:] = g_col[pick][1:] != g_col[pick][:-1]
    best = pick[first]
    cols = g_col[best]
    win = counts[best] > zero_count[cols]
    z[cols[win]] = g_val[best][win]
    return z


def fit_column_sampled(A, u, epsilon, rng=None, c=SAMPLE_CONSTANT, boolean=False):
    """Fit ``z`` for direction ``u`` from a row sample of ``supp(u)``.

    Each row of ``N = supp(u)`` is kept with probability
    ``min(1, t / |N|)``, ``t = ceil(c eps^-2 ln m)``, and ``z_j`` is the
    sampled mode of ratios.
    """
    if not 0 < epsilon < 1:
        raise PreconditionError("epsilon must lie in (0, 1)")
    rng = as_rng(rng)
    u = np.asarray(u, dtype=np.float64).ravel()
    N = np.flatnonzero(u)
    if N.size == 0:
        return np.zeros(A.n)
    t = math.ceil(c * math.log(max(A.m, 3)) / epsilon ** 2)
    if t >= N.size:
        S = N
    else:
        S = N[rng.random(N.size) < t / N.size]
    return mode_fit(A, u, S, boolean=boolean)


def exact_column_fit(A, j, boolean=False):
    """Optimal ``z`` for direction ``A[:, j]``."""
    rows, _ = A.column(j)
    return mode_fit(A, A.dense_column(j), rows, boolean=boolean)


def solve_rank1_baseline(A, boolean=False):
    """Fit every column exactly and keep the best; cost at most 2 OPT."""
    if boolean and not A.binary:
        raise PreconditionError("boolean mode needs a binary matrix")
    best = None
    for j in range(A.n):
        z = exact_column_fit(A, j, boolean)
        cost = residual_exact(A, j, z)
        if best is None or cost < best[0]:
            best = (cost, j, z)
    if best is None:
        return RankOneSolution(None, np.zeros(0), 0.0, 0, u=np.zeros(A.m), exact_zero=True)
    cost, j, z = best
    return RankOneSolution(j, z, float(cost), int(cost), exact_zero=(cost == 0))


def _sample_columns(A, epsilon, rng, c):
    part = WeightClassPartition.of(A)
    width = math.ceil(c * math.log(max(A.n, 3)) / epsilon ** 2)
    picked = []
    for members in part.classes[1:]:
        if members.size:
            picked.append(np.unique(rng.choice(members, size=width, replace=True)))
    if not picked:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(picked)


def solve_rank1(A, epsilon=0.1, rng=None, c=SAMPLE_CONSTANT, boolean=False,
                delta=None, work_factor=1.0, threads=1):
    """Sublinear (2 + eps)-approximate rank-1 fit from a column of ``A``.

    Samples ``ceil(c eps^-2 ln n)`` columns (with replacement) from every
    nonempty weight class, fits each one with :func:`fit_column_sampled`
    at accuracy ``eps/15`` and estimates its residual with
    :func:`~l0lra.estimate.residual_race` at the same accuracy.  The
    column with the smallest estimate wins; its exact cost is reported in
    ``cost_exact``.

    Per-column work uses independent random streams spawned from ``rng``,
    so results do not depend on ``threads``.
    """
    if not 0 < epsilon <= 0.1:
        raise PreconditionError("epsilon must lie in (0, 0.1], got %r" % epsilon)
    if boolean and not A.binary:
        raise PreconditionError("boolean mode needs a binary matrix")
    rng = as_rng(rng)
    if A.total_nnz == 0:
        return RankOneSolution(0 if A.n else None, np.zeros(A.n), 0.0, 0, exact_zero=True)
    cols = _sample_columns(A, epsilon, rng, c)
    seeds = rng.integers(0, 2 ** 63, size=cols.size)
    cfg = EstimatorConfig(epsilon / 15.0, delta)

    def work(t):
        j = int(cols[t])
        sub = np.random.default_rng(int(seeds[t]))
        z = fit_column_sampled(A, A.dense_column(j), epsilon / 15.0, sub, c, boolean)
        y, path = residual_race(A, j, z, cfg, sub, work_factor, full_output=True)
        return y, j, z, path

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(work, range(cols.size)))
    else:
        results = [work(t) for t in range(cols.size)]
    y, j, z, path = min(results, key=lambda r: (r[0], r[1]))
    with A.stats.paused():
        cost = residual_exact(A, j, z)
    info = {"sampled_columns": int(cols.size),
            "sampled_path": int(sum(r[3] == "sampled" for r in results))}
    return RankOneSolution(j, z, float(y), int(cost), exact_zero=(y == 0), info=info)


def solve_rank1_boolean_2eps(A, epsilon=0.1, rng=None, c=SAMPLE_CONSTANT, **kw):
    """Boolean variant of :func:`solve_rank1`: coefficients in ``{0, 1}``."""
    if not A.binary:
        raise PreconditionError("solve_rank1_boolean_2eps needs a binary matrix")
    return solve_rank1(A, epsilon, rng, c=c, boolean=True, **kw)
