"""Boolean l0 rank-1: ``min ||A - u v^T||_0`` over binary ``u`` and ``v``.

Contents:

* row profiles (zeros inside and ones outside the chosen columns) and the
  cost identities they satisfy;
* the support-size estimator for ``beta = nnz(v)`` (and ``alpha``);
* the small-OPT algorithm, which prunes light rows and columns, selects
  heavy ones and decides the rest by majority against the selection;
* the combined algorithm, the fixed-parameter exact solver and an
  exhaustive oracle for small matrices.

Row and column nonzero counts are treated as free.  Entry reads are
charged to ``A.stats``; computing the exact cost of a returned solution
is bookkeeping and is not charged.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EnumerationLimitError, PreconditionError
from .matcore import as_rng
from .rank1 import solve_rank1_boolean_2eps

#: constant in the ``c log(mn) / delta**2`` probe counts
PROBE_CONSTANT = 6.0
#: largest phi the small-OPT algorithm accepts
PHI_MAX = 1.0 / 80
#: largest psi the exact solver is guaranteed for
PSI_MAX_EXACT = 1.0 / 240


def _require_binary(A):
    if not A.binary:
        raise PreconditionError("boolean algorithms need a binary matrix")


def _binary_vector(x, size, name):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != size:
        raise PreconditionError("%s has length %d, expected %d" % (name, x.size, size))
    if np.any((x != 0) & (x != 1)):
        raise PreconditionError("%s must be binary" % name)
    return x.astype(bool)


def inside_counts(A, u, v):
    """Number of ones of ``A`` inside ``supp(u) x supp(v)``."""
    return int(np.count_nonzero(u[A.row_idx] & v[A.entry_col]))


def boolean_cost(A, u, v):
    """``||A - u v^T||_0`` for binary ``A``, ``u``, ``v`` (O(nnz))."""
    u = _binary_vector(u, A.m, "u")
    v = _binary_vector(v, A.n, "v")
    A.stats.add(adjacency_reads=A.total_nnz)
    return int(u.sum()) * int(v.sum()) + A.total_nnz - 2 * inside_counts(A, u, v)


@dataclass
class TechnicalProfile:
    """Per-row ``x_i`` (zeros of row i in supp(v)) and ``y_i`` (ones
    outside supp(v)), with ``alpha = nnz(u)``, ``beta = nnz(v)``."""
    x: np.ndarray
    y: np.ndarray
    alpha: int
    beta: int
    R: np.ndarray
    cost: int


def technical_profile(A, u, v):
    """Row profile of ``(u, v)``; checks the row identity and the cost split.

    For every row ``nnz(A_i) = beta - x_i + y_i``, and the cost of
    ``(u, v)`` is the sum of ``x_i + y_i`` over selected rows plus
    ``beta - x_i + y_i`` over the others.
    """
    _require_binary(A)
    ub = _binary_vector(u, A.m, "u")
    vb = _binary_vector(v, A.n, "v")
    beta = int(vb.sum())
    inside = np.bincount(A.row_idx[vb[A.entry_col]], minlength=A.m)
    x = beta - inside
    y = A.row_nnz - inside
    if np.any(A.row_nnz != beta - x + y):
        raise AssertionError("row identity violated")
    cost = int((x + y)[ub].sum() + (beta - x + y)[~ub].sum())
    direct = boolean_cost(A, ub, vb)
    if cost != direct:
        raise AssertionError("cost decomposition %d != direct count %d" % (cost, direct))
    return TechnicalProfile(x, y, int(ub.sum()), beta, np.flatnonzero(ub), cost)


def beta_objective(counts, upper):
    """``Lambda(b) = sum_i min(c_i, |c_i - b|)`` for ``b = 1..upper``.

    Uses a counting sort, prefix sums ``P`` and the counting function
    ``L(x) = #{c_i <= x}``:
    ``Lambda(b) = P(max) - 2 [P(b) - P(b/2)] - [len + L(b/2) - 2 L(b)] b``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size and counts.min() < 0:
        raise PreconditionError("counts must be non-negative")
    upper = int(upper)
    top = max(upper, int(counts.max()) if counts.size else 0)
    hist = np.bincount(counts, minlength=top + 1)
    L = np.cumsum(hist)
    P = np.cumsum(hist * np.arange(top + 1))
    b = np.arange(1, upper + 1)
    L1, L2 = L[b // 2], L[b]
    P1, P2 = P[b // 2], P[b]
    return P[-1] - 2 * (P2 - P1) - (counts.size + L1 - 2 * L2) * b


def estimate_beta(row_nnz, m, n):
    """Estimate ``beta = nnz(v)`` from the row counts of ``A`` (m x n).

    Returns the smallest minimiser over ``1..n`` of :func:`beta_objective`.
    Call with ``(col_nnz, n, m)`` to estimate ``alpha``.
    """
    counts = np.asarray(row_nnz, dtype=np.int64)
    if counts.size != m:
        raise PreconditionError("expected %d counts, got %d" % (m, counts.size))
    if counts.size and counts.max() > n:
        raise PreconditionError("a count exceeds the row length %d" % n)
    if not np.any(counts):
        raise PreconditionError("all-zero matrix has no rank-1 target")
    return int(np.argmin(beta_objective(counts, n))) + 1


@dataclass
class BooleanRunState:
    """Intermediate sets and estimates of the small-OPT algorithm."""
    phi: float
    alpha_hat: int
    beta_hat: int
    R_R: np.ndarray
    C_R: np.ndarray
    R_S: np.ndarray = None
    C_S: np.ndarray = None
    X: np.ndarray = None
    Y: np.ndarray = None
    X2: np.ndarray = None
    Y2: np.ndarray = None


@dataclass
class BooleanSolution:
    """Binary factors ``u``, ``v`` and their exact cost."""
    u: np.ndarray
    v: np.ndarray
    cost: int
    method: str = ""
    fallback: bool = False
    state: Optional[BooleanRunState] = None
    info: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.u, self.v, self.cost))


def _solution(A, u, v, method, **kw):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    with A.stats.paused():
        cost = boolean_cost(A, u, v)
    return BooleanSolution(u, v, cost, method, **kw)


def _from_rank1(A, sol, method, **kw):
    if sol.column is None:
        return _solution(A, np.zeros(A.m), np.zeros(A.n), method, **kw)
    return _solution(A, A.dense_column(sol.column), sol.coeffs, method, **kw)


# -- count estimates ------------------------------------------------------
def _exact_counts(A, row_sel, col_sel):
    """Ones of each row inside ``col_sel`` and of each column inside
    ``row_sel`` (one scan over the nonzeros)."""
    A.stats.add(adjacency_reads=A.total_nnz)
    inr = row_sel[A.row_idx]
    inc = col_sel[A.entry_col]
    rows = np.bincount(A.row_idx[inc], minlength=A.m)
    cols = np.bincount(A.entry_col[inr], minlength=A.n)
    return rows, cols


def probe_count(delta, m, n, c=PROBE_CONSTANT):
    """Probes per estimate for additive error ``delta`` times the pool."""
    return int(math.ceil(c * math.log(max(m * n, 2)) / delta ** 2))


def _probe_rows(A, rows, pool, ell, rng, by_column=False):
    """Estimate ones of each index in ``rows`` restricted to ``pool`` from
    ``ell`` uniform probes (with replacement)."""
    out = np.zeros(rows.size)
    if rows.size == 0 or pool.size == 0 or ell == 0:
        return out
    step = max(1, (1 << 22) // ell)
    for a in range(0, rows.size, step):
        idx = rows[a:a + step]
        probe = pool[rng.integers(pool.size, size=(idx.size, ell))]
        own = np.repeat(idx, ell).reshape(idx.size, ell)
        if by_column:
            vals = A.lookup(probe.ravel(), own.ravel())
        else:
            vals = A.lookup(own.ravel(), probe.ravel())
        hits = np.count_nonzero(vals.reshape(idx.size, ell), axis=1)
        out[a:a + step] = hits * (pool.size / ell)
    return out


def _steps_1_to_4(A, phi, mode, rng, c):
    m, n = A.shape
    beta_hat = estimate_beta(A.row_nnz, m, n)
    alpha_hat = estimate_beta(A.col_nnz, n, m)
    shrink = (1.0 - phi) / (1.0 + phi)
    R_R = np.flatnonzero(A.row_nnz >= shrink * beta_hat / 2.0)
    C_R = np.flatnonzero(A.col_nnz >= shrink * alpha_hat / 2.0)
    st = BooleanRunState(phi, alpha_hat, beta_hat, R_R, C_R)
    if mode == "exact":
        rsel = np.zeros(m, dtype=bool)
        rsel[R_R] = True
        csel = np.zeros(n, dtype=bool)
        csel[C_R] = True
        xr, yc = _exact_counts(A, rsel, csel)
        X, Y = xr[R_R].astype(np.float64), yc[C_R].astype(np.float64)
    else:
        ell = probe_count(1.0 / 9.0, m, n, c)
        X = _probe_rows(A, R_R, C_R, ell, rng)
        Y = _probe_rows(A, C_R, R_R, ell, rng, by_column=True)
    st.X, st.Y = X, Y
    st.R_S = R_R[X > 2.0 * beta_hat / 3.0]
    st.C_S = C_R[Y > 2.0 * alpha_hat / 3.0]
    return st


def _check_mode(mode):
    if mode in ("exact", "exact-counts"):
        return "exact"
    if mode in ("sampled", "sampled-counts"):
        return "sampled"
    raise PreconditionError("mode must be 'exact' or 'sampled', got %r" % (mode,))


def solve_boolean_smallopt(A, phi, mode="exact", rng=None, c=PROBE_CONSTANT):
    """Small-OPT boolean rank-1 with cost ``(1 + 5 phi) OPT + 37 phi^2 nnz``.

    Parameters
    ----------
    A : SparseMatrix (binary)
    phi : float
        Upper bound on ``OPT / nnz(A)``, in ``(0, 1/80]``.
    mode : {"exact", "sampled"}
        Count exactly by scanning the nonzeros, or estimate counts from
        ``ceil(c ln(mn) / delta**2)`` probes per row or column, with
        ``delta = 1/9`` for the selection step and ``delta = phi`` for
        the final majority step.
    c : float
        Probe constant for sampled mode.

    Returns
    -------
    BooleanSolution
        ``fallback`` is set when no row or no column was selected and the
        (2 + eps) column algorithm was used instead.
    """
    _require_binary(A)
    if not 0 < phi <= PHI_MAX:
        raise PreconditionError("phi must lie in (0, 1/80], got %r" % phi)
    mode = _check_mode(mode)
    rng = as_rng(rng)
    m, n = A.shape
    st = _steps_1_to_4(A, phi, mode, rng, c)
    if st.R_S.size == 0 or st.C_S.size == 0:
        sol = solve_rank1_boolean_2eps(A, 0.1, rng)
        return _from_rank1(A, sol, "smallopt", fallback=True, state=st)
    rest_r = np.setdiff1d(st.R_R, st.R_S)
    rest_c = np.setdiff1d(st.C_R, st.C_S)
    if mode == "exact":
        rsel = np.zeros(m, dtype=bool)
        rsel[st.R_S] = True
        csel = np.zeros(n, dtype=bool)
        csel[st.C_S] = True
        xr, yc = _exact_counts(A, rsel, csel)
        X2, Y2 = xr[rest_r].astype(np.float64), yc[rest_c].astype(np.float64)
    else:
        ell = probe_count(phi, m, n, c)
        X2 = _probe_rows(A, rest_r, st.C_S, ell, rng)
        Y2 = _probe_rows(A, rest_c, st.R_S, ell, rng, by_column=True)
    st.X2, st.Y2 = X2, Y2
    u = np.zeros(m)
    v = np.zeros(n)
    u[st.R_S] = 1.0
    v[st.C_S] = 1.0
    u[rest_r[X2 >= st.C_S.size / 2.0]] = 1.0
    v[rest_c[Y2 >= st.R_S.size / 2.0]] = 1.0
    return _solution(A, u, v, "smallopt", state=st)


def solve_boolean_combined(A, rng=None, mode="exact", c=PROBE_CONSTANT):
    """``(1 + 500 psi)``-approximation.

    Runs the (2 + eps) column algorithm with ``eps = 0.1``; its cost gives
    ``phi = cost / nnz(A)``.  If ``phi > 1/80`` that solution is returned,
    otherwise the small-OPT algorithm runs with ``phi`` and the cheaper of
    the two is returned.
    """
    _require_binary(A)
    rng = as_rng(rng)
    if A.total_nnz == 0:
        return _solution(A, np.zeros(A.m), np.zeros(A.n), "combined")
    first = _from_rank1(A, solve_rank1_boolean_2eps(A, 0.1, rng), "combined")
    phi = first.cost / A.total_nnz
    first.info["phi"] = phi
    if first.cost == 0 or phi > PHI_MAX:
        first.info["branch"] = "column"
        return first
    second = solve_boolean_smallopt(A, phi, mode, rng, c)
    second.info["phi"] = phi
    if second.cost < first.cost:
        second.method = "combined"
        second.info["branch"] = "smallopt"
        return second
    first.info["branch"] = "column"
    return first


# -- enumeration ----------------------------------------------------------
def _gray_search(D, base_ones, base_size, col_total):
    """Best subset of the rows of ``D`` (added to a fixed base selection)
    when every column is then set by strict majority.

    Candidates are visited in reflected Gray-code order so consecutive
    candidates differ by one row; the running column counts are updated
    by cumulative sums over each chunk of flips.

    Returns ``(cost, mask)`` of the first best candidate.
    """
    r, n = D.shape
    D = D.astype(np.int64)
    cur = base_ones.astype(np.int64).copy()
    size = int(base_size)
    tot = col_total.astype(np.int64)

    def cost_of(ones, sz):
        return (tot - ones + np.minimum(ones, sz - ones)).sum(axis=-1)

    best_cost = int(cost_of(cur, size))
    best_t = 0
    total = 1 << r
    chunk = max(1, (1 << 22) // max(n, 1))
    t0 = 1
    while t0 < total:
        t1 = min(total, t0 + chunk)
        t = np.arange(t0, t1, dtype=np.int64)
        low = t & -t
        bit = np.log2(low).astype(np.int64)
        gray = t ^ (t >> 1)
        sign = np.where((gray >> bit) & 1, 1, -1)
        ones = cur + np.cumsum(sign[:, None] * D[bit], axis=0)
        sizes = size + np.cumsum(sign)
        costs = (tot - ones + np.minimum(ones, sizes[:, None] - ones)).sum(axis=1)
        a = int(np.argmin(costs))
        if costs[a] < best_cost:
            best_cost = int(costs[a])
            best_t = int(t[a])
        cur = ones[-1]
        size = int(sizes[-1])
        t0 = t1
    g = best_t ^ (best_t >> 1)
    mask = np.array([(g >> i) & 1 for i in range(r)], dtype=bool)
    return best_cost, mask


def _majority(M, sel):
    """Strict-majority completion of the other side given selected rows."""
    ones = M[sel].sum(axis=0)
    return (ones > sel.sum() - ones).astype(np.float64)


def _enumerate(A, side, undecided, base, cap):
    """Exhaustive search over ``undecided`` indices on ``side`` with
    ``base`` fixed to 1 and the other side completed by majority."""
    if undecided.size > cap:
        raise EnumerationLimitError(
            "%d undecided %s exceed the enumeration cap %d" % (undecided.size, side, cap))
    if side == "rows":
        D = A.dense_rows(undecided)
        basesel = np.zeros(A.m, dtype=bool)
        basesel[base] = True
        base_ones = np.bincount(A.entry_col[basesel[A.row_idx]], minlength=A.n)
        _, mask = _gray_search(D, base_ones, base.size, A.col_nnz)
        u = np.zeros(A.m)
        u[base] = 1.0
        u[undecided[mask]] = 1.0
        ub = u.astype(bool)
        ones = np.bincount(A.entry_col[ub[A.row_idx]], minlength=A.n)
        v = (ones > ub.sum() - ones).astype(np.float64)
    else:
        D = A.dense_columns(undecided).T
        basesel = np.zeros(A.n, dtype=bool)
        basesel[base] = True
        base_ones = np.bincount(A.row_idx[basesel[A.entry_col]], minlength=A.m)
        _, mask = _gray_search(D, base_ones, base.size, A.row_nnz)
        v = np.zeros(A.n)
        v[base] = 1.0
        v[undecided[mask]] = 1.0
        vb = v.astype(bool)
        ones = np.bincount(A.row_idx[vb[A.entry_col]], minlength=A.m)
        u = (ones > vb.sum() - ones).astype(np.float64)
    return u, v


def boolean_exhaustive_oracle(A, side="auto", max_side=20):
    """Exact boolean rank-1 optimum by enumerating the smaller side.

    ``side`` may force ``"rows"`` or ``"cols"``.
    """
    _require_binary(A)
    if side == "auto":
        side = "rows" if A.m <= A.n else "cols"
    size = A.m if side == "rows" else A.n
    if size > max_side:
        raise EnumerationLimitError("oracle enumerates 2^%d supports; limit is 2^%d"
                                    % (size, max_side))
    with A.stats.paused():
        u, v = _enumerate(A, side, np.arange(size), np.zeros(0, dtype=np.int64), max_side)
    return _solution(A, u, v, "oracle")


def solve_boolean_exact_fpt(A, rng=None, cap=22, strict=False):
    """Exact boolean rank-1 when ``OPT / nnz(A) <= 1/240``.

    Estimates ``phi`` from the (2 + eps) column algorithm, runs the
    pruning and selection steps of the small-OPT algorithm with exact
    counts, and enumerates the smaller undecided side (at most ``cap``
    indices) with majority completion.

    If the estimate shows the instance is outside that regime, a
    ``strict`` call raises :class:`PreconditionError`; otherwise the
    whole smaller side is enumerated when it fits under ``cap``.
    """
    _require_binary(A)
    rng = as_rng(rng)
    if A.total_nnz == 0:
        return _solution(A, np.zeros(A.m), np.zeros(A.n), "fpt")
    first = _from_rank1(A, solve_rank1_boolean_2eps(A, 0.1, rng), "fpt")
    if first.cost == 0:
        return first
    phi = first.cost / A.total_nnz
    if phi > PHI_MAX:
        if strict:
            raise PreconditionError(
                "estimated OPT/nnz >= %.4g exceeds 1/240; exact solver precondition violated"
                % (phi / 3.0))
        side = "rows" if A.m <= A.n else "cols"
        size = min(A.m, A.n)
        if size > cap:
            raise PreconditionError(
                "instance outside the OPT/nnz <= 1/240 regime and min(m, n) = %d exceeds "
                "the enumeration cap %d" % (size, cap))
        u, v = _enumerate(A, side, np.arange(size), np.zeros(0, dtype=np.int64), cap)
        return _solution(A, u, v, "fpt", fallback=True, info={"phi": phi})
    st = _steps_1_to_4(A, phi, "exact", rng, PROBE_CONSTANT)
    rest_r = np.setdiff1d(st.R_R, st.R_S)
    rest_c = np.setdiff1d(st.C_R, st.C_S)
    if rest_r.size <= rest_c.size:
        u, v = _enumerate(A, "rows", rest_r, st.R_S, cap)
    else:
        u, v = _enumerate(A, "cols", rest_c, st.C_S, cap)
    return _solution(A, u, v, "fpt", state=st,
                     info={"phi": phi, "undecided_rows": int(rest_r.size),
                           "undecided_cols": int(rest_c.size)})
