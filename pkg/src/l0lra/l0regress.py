"""l0 regression ``min_x ||U x - b||_0``.

Two solvers:

* :func:`l0_regress_exact` enumerates row subsets of size at most ``k``
  whose rows are linearly independent.  Any consistent set of satisfied
  rows is solved by any particular solution on one of its row bases, so
  the best of these candidates (and ``x = 0``) is optimal.
* :func:`l0_regress_approx` repeatedly takes a random row order, greedily
  collects a maximal independent row set, solves on it and keeps the best
  candidate.

Both have ``*_many`` variants that share the row work across many right
hand sides (columns of ``B``), which is what the rank-k code uses.

A residual entry counts as zero when ``|(U x)_i - b_i|`` is at most
``MATCH_RTOL`` times ``||U_i||_1 ||x||_inf + |b_i|``.  Predicted values here are
sums of products, so the exact bitwise comparison used for stored data
would flag rounding noise as disagreement.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EnumerationLimitError, PreconditionError
from .matcore import as_rng

#: relative pivot threshold for independence tests
PIVOT_RTOL = 1e-9
#: relative threshold below which a residual entry counts as zero
MATCH_RTOL = 1e-9


@dataclass
class RegressionInstance:
    """``U`` (m x k), ``b`` (m,) and the pivot tolerance for rank tests."""
    U: np.ndarray
    b: np.ndarray
    rank_tolerance: Optional[float] = None

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.float64)
        if self.U.ndim == 1:
            self.U = self.U[:, None]
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        m, k = self.U.shape
        if m < 1 or k < 1:
            raise PreconditionError("need m >= 1 and k >= 1")
        if self.b.size != m:
            raise PreconditionError("b has length %d, expected %d" % (self.b.size, m))
        if self.rank_tolerance is None:
            self.rank_tolerance = default_tolerance(self.U)
        if not self.rank_tolerance > 0:
            raise PreconditionError("rank_tolerance must be positive")


def default_tolerance(U):
    scale = float(np.max(np.abs(U))) if np.size(U) else 0.0
    return PIVOT_RTOL * scale if scale > 0 else PIVOT_RTOL


def default_repeats(k, size):
    """``ceil(8 k ln(size))`` where ``size`` is the parent matrix's m*n."""
    return max(1, int(math.ceil(8 * k * math.log(max(size, 2)))))


def mismatch(pred, B, rtol=MATCH_RTOL, scale=None):
    """Boolean mask of entries where ``pred`` and ``B`` disagree."""
    diff = np.abs(pred - B)
    if rtol == 0:
        return diff != 0
    if scale is None:
        scale = np.abs(pred) + np.abs(B)
    return diff > rtol * scale


def match_scale(U, X, B):
    """Per-entry scale for the residual tolerance (broadcasts over stacks)."""
    rows = np.abs(U).sum(axis=-1)[..., :, None]
    return rows * np.abs(X).max(axis=-2, keepdims=True) + np.abs(B)


def residual_count(U, x, b, rtol=MATCH_RTOL):
    """``||U x - b||_0`` under the matching tolerance."""
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 1)
    pred = U @ x
    return int(np.count_nonzero(mismatch(pred, b, rtol, match_scale(U, x, b))))


def _counts(U, X, B, rtol):
    """Per-column residual counts of ``U X`` against ``B``."""
    pred = U @ X
    return np.count_nonzero(mismatch(pred, B, rtol, match_scale(U, X, B)), axis=-2)


def _ratio_candidates(u, B, rtol):
    """k = 1 exhaustively: every ratio b_i / u_i is a candidate."""
    nz = np.flatnonzero(u)
    m, c = B.shape
    best = np.count_nonzero(B, axis=0).astype(np.int64)
    X = np.zeros((1, c))
    for i in nz:
        x = B[i] / u[i]
        cnt = _counts(u[:, None], x[None, :], B, rtol)
        better = cnt < best
        best = np.where(better, cnt, best)
        X[0, better] = x[better]
    return X, best


def l0_regress_exact_many(U, B, rank_tolerance=None, max_rows=14, max_k=4, rtol=MATCH_RTOL):
    """Exact l0 regression of every column of ``B`` on ``U``.

    Rows of ``U`` that are entirely zero add a fixed cost and are removed
    before enumeration; ``max_rows`` bounds the remaining rows.

    Returns
    -------
    X : ndarray (k, c)
    costs : ndarray (c,)
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    B = np.asarray(B, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    m, k = U.shape
    if B.shape[0] != m:
        raise PreconditionError("B has %d rows, U has %d" % (B.shape[0], m))
    tol = default_tolerance(U) if rank_tolerance is None else rank_tolerance
    live = np.flatnonzero(np.any(U != 0, axis=1))
    fixed = np.count_nonzero(np.delete(B, live, axis=0), axis=0)
    Ur, Br = U[live], B[live]
    mr = live.size
    if k > max_k or mr > max_rows:
        raise EnumerationLimitError(
            "exact l0 regression limited to %d nonzero rows and k <= %d (got %d rows, k = %d); "
            "use l0_regress_approx" % (max_rows, max_k, mr, k))
    c = B.shape[1]
    X = np.zeros((k, c))
    best = np.count_nonzero(Br, axis=0).astype(np.int64)
    if k == 1:
        X, best = _ratio_candidates(Ur[:, 0], Br, rtol)
        return X, best + fixed
    for size in range(1, min(k, mr) + 1):
        subsets = np.array(list(itertools.combinations(range(mr), size)), dtype=np.int64)
        US = Ur[subsets]                                    # (P, size, k)
        sv = np.linalg.svd(US, compute_uv=False)
        ok = sv[:, -1] > tol
        if not np.any(ok):
            continue
        subsets, US = subsets[ok], US[ok]
        XS = np.linalg.pinv(US) @ Br[subsets]               # (P, k, c)
        cnt = _counts(Ur, XS, Br, rtol)                     # (P, c)
        arg = np.argmin(cnt, axis=0)
        cbest = cnt[arg, np.arange(c)]
        better = cbest < best
        best = np.where(better, cbest, best)
        X[:, better] = XS[arg[better], :, np.flatnonzero(better)].T
    return X, best + fixed


def l0_regress_exact(inst, max_rows=14, max_k=4):
    """Globally optimal ``(x, cost)`` for a :class:`RegressionInstance`."""
    X, cost = l0_regress_exact_many(inst.U, inst.b[:, None], inst.rank_tolerance,
                                    max_rows=max_rows, max_k=max_k)
    return X[:, 0], int(cost[0])


def numerical_rank(U, tol=None):
    if U.size == 0:
        return 0
    tol = default_tolerance(U) if tol is None else tol
    return int(np.count_nonzero(np.linalg.svd(U, compute_uv=False) > tol))


def greedy_row_basis(U, order, rank, tol):
    """First rows in ``order`` that are independent of the ones before."""
    k = U.shape[1]
    basis = np.zeros((0, k))
    picked = []
    for i in order:
        row = U[i]
        res = row - basis.T @ (basis @ row)
        rn = np.linalg.norm(res)
        if rn > tol:
            basis = np.vstack([basis, res / rn])
            picked.append(i)
            if len(picked) == rank:
                break
    return np.array(picked, dtype=np.int64)


def l0_regress_approx_many(U, B, rng=None, repeats=None, rank_tolerance=None,
                           rtol=MATCH_RTOL, size_hint=None):
    """Randomised l0 regression of every column of ``B`` on ``U``.

    Each repeat draws one random row order that is shared by all columns.
    ``x = 0`` is always a candidate, and when ``U`` has a single column
    every ratio ``b_i / u_i`` is tried, which makes that case exact.

    Returns
    -------
    X : ndarray (k, c)
    costs : ndarray (c,)
    """
    rng = as_rng(rng)
    U = np.asarray(U, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    B = np.asarray(B, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    m, k = U.shape
    c = B.shape[1]
    if repeats is None:
        repeats = default_repeats(k, size_hint if size_hint else m * k)
    if repeats < 1:
        raise PreconditionError("repeats must be >= 1")
    if k == 1:
        return _ratio_candidates(U[:, 0], B, rtol)
    tol = default_tolerance(U) if rank_tolerance is None else rank_tolerance
    rank = numerical_rank(U, tol)
    X = np.zeros((k, c))
    best = np.count_nonzero(B, axis=0).astype(np.int64)
    if rank == 0:
        return X, best
    for _ in range(int(repeats)):
        S = greedy_row_basis(U, rng.permutation(m), rank, tol)
        if S.size == 0:
            continue
        XS = np.linalg.pinv(U[S]) @ B[S]
        cnt = _counts(U, XS, B, rtol)
        better = cnt < best
        if np.any(better):
            best = np.where(better, cnt, best)
            X[:, better] = XS[:, better]
    return X, best


def l0_regress_approx(inst, rng=None, repeats=None):
    """Randomised ``(z, cost)`` with cost at most k times the optimum w.h.p."""
    X, cost = l0_regress_approx_many(inst.U, inst.b[:, None], rng, repeats,
                                     inst.rank_tolerance)
    return X[:, 0], int(cost[0])
