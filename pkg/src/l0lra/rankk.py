"""Real l0 rank-k approximation by column selection.

All solutions have the form ``A[:, J] Z``.  The module provides

* the exact residual ``||A - A[:, J] Z||_0``;
* a constructive certifier that turns any factorization ``U V`` into a
  column selection of cost at most ``(k + 1) ||A - U V||_0``;
* the basic algorithm (all k-subsets, approximate regression per column);
* the bicriteria algorithm that selects ``O(k log(n/k))`` columns by
  repeated random coverage tests under guesses of the optimum;
* a bracket oracle for small instances.

These algorithms work on a dense copy of ``A`` and are meant for
moderate sizes.
"""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError, EnumerationLimitError, PreconditionError
from .l0regress import (MATCH_RTOL, default_tolerance, l0_regress_approx_many,
                        l0_regress_exact_many, match_scale, mismatch, numerical_rank)
from .matcore import as_rng

#: default bound on the number of k-subsets the basic algorithm enumerates
SUBSET_CAP = 10 ** 5


@dataclass
class RankKSolution:
    """``A[:, columns] @ coeffs`` and its exact cost."""
    columns: np.ndarray
    coeffs: np.ndarray
    cost: int
    method: str = ""
    info: dict = field(default_factory=dict)

    @property
    def rank(self):
        return int(len(self.columns))


@dataclass
class CertifyState:
    """One level of the certifier: surviving rows, active columns and the
    columns chosen so far."""
    level: int
    S: np.ndarray
    R: np.ndarray
    I: list
    peeled_rows: np.ndarray = None
    spanned: np.ndarray = None


def _check_selection(A, J, Z):
    J = np.asarray(J, dtype=np.int64).ravel()
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1 and J.size == 1:
        Z = Z[None, :]
    if Z.shape != (J.size, A.n):
        raise PreconditionError("Z has shape %s, expected (%d, %d)" % (Z.shape, J.size, A.n))
    if J.size and (J.min() < 0 or J.max() >= A.n):
        raise PreconditionError("column index out of range")
    if np.unique(J).size != J.size:
        raise PreconditionError("selected columns must be distinct")
    return J, Z


def _column_costs(D, J, Z, rtol=MATCH_RTOL, block=2048):
    """Per-column residual counts of dense ``D`` against ``D[:, J] Z``."""
    n = D.shape[1]
    if J.size == 0:
        return np.count_nonzero(D, axis=0)
    C = D[:, J]
    out = np.empty(n, dtype=np.int64)
    for a in range(0, n, block):
        Zb = Z[:, a:a + block]
        Db = D[:, a:a + block]
        out[a:a + block] = np.count_nonzero(
            mismatch(C @ Zb, Db, rtol, match_scale(C, Zb, Db)), axis=0)
    return out


def residual_rankk_exact(A, J, Z, rtol=MATCH_RTOL):
    """``||A - A[:, J] Z||_0``, evaluated in blocks of columns.

    Entries count as equal when they match to relative tolerance
    ``rtol`` (see :mod:`l0lra.l0regress`); integer data built from
    integer coefficients matches exactly.
    """
    J, Z = _check_selection(A, J, Z)
    return int(_column_costs(A.to_dense(), J, Z, rtol).sum())


def _solution(A, D, J, Z, method, info=None):
    J = np.asarray(J, dtype=np.int64)
    cost = int(_column_costs(D, J, Z).sum())
    return RankKSolution(J, Z, cost, method, info or {})


def _complete(J, k, n):
    """Pad ``J`` to ``min(k, n)`` columns with the lowest unused indices."""
    J = list(J)
    used = set(J)
    j = 0
    while len(J) < min(k, n):
        if j not in used:
            J.append(j)
            used.add(j)
        j += 1
    return J


def _refine(D, J, Z, rng, size_hint):
    """Per column keep the cheaper of ``Z`` and an approximate regression."""
    base = _column_costs(D, J, Z)
    if J.size == 0:
        return Z, base
    X, cost = l0_regress_approx_many(D[:, J], D, rng, size_hint=size_hint)
    better = cost < base
    Z = Z.copy()
    Z[:, better] = X[:, better]
    return Z, np.where(better, cost, base)


def certify_column_selection(A, U, V, rng=None, full_output=False):
    """Turn a rank-k factorization into at most ``k`` columns of ``A``.

    Follows the constructive argument: columns where ``U V`` vanishes are
    set aside; then, level by level, either the rows and columns still in
    play are so noisy that any choice is within the bound, or the column
    with the fewest disagreements on the surviving rows is chosen, its
    disagreeing rows are peeled off and the columns it spans on the
    remaining rows are settled.  After ``k`` choices the rest are expressed
    through ``V[:, I]^-1 V``.

    Each column of the resulting ``Z`` is then replaced by an approximate
    regression fit when that is cheaper, which can only lower the cost.

    Returns
    -------
    RankKSolution
        cost at most ``(k + 1) ||A - U V||_0``.  With ``full_output`` the
        list of :class:`CertifyState` levels is in ``info["levels"]``.
    """
    rng = as_rng(rng)
    U = np.asarray(U, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    if V.ndim == 1:
        V = V[None, :]
    m, n = A.shape
    k = V.shape[0]
    if U.shape != (m, k) or V.shape[1] != n:
        raise PreconditionError("U is %s and V is %s for a %dx%d matrix"
                                % (U.shape, V.shape, m, n))
    if numerical_rank(V, default_tolerance(V)) < k:
        raise PreconditionError("V must have full row rank %d" % k)
    D = A.to_dense()
    P = U @ V
    M = mismatch(P, D, MATCH_RTOL, match_scale(U, V, D))
    Z = np.zeros((k, n))
    slot = {}
    S = np.arange(m)
    R = np.flatnonzero(np.any(P != 0, axis=0))
    I = []
    levels = []
    stopped = False
    for level in range(k):
        st = CertifyState(level, S.copy(), R.copy(), list(I))
        levels.append(st)
        opt = int(M[np.ix_(S, R)].sum())
        if R.size == 0 or opt >= S.size * R.size / (k + 1 - level):
            stopped = True
            break
        dis = M[np.ix_(S, R)].sum(axis=0)
        i = int(R[np.argmin(dis)])
        T = S[M[S, i]]
        S = S[~M[S, i]]
        slot[i] = len(I)
        I.append(i)
        R = R[R != i]
        st.peeled_rows = T
        if R.size == 0:
            st.spanned = np.zeros(0, dtype=np.int64)
            continue
        C = D[np.ix_(S, I)]
        B = D[np.ix_(S, R)]
        coef = np.linalg.lstsq(C, B, rcond=None)[0] if S.size else np.zeros((len(I), R.size))
        fit = ~np.any(mismatch(C @ coef, B, MATCH_RTOL, match_scale(C, coef, B)), axis=0)
        spanned = R[fit]
        Z[:len(I), spanned] = coef[:, fit]
        st.spanned = spanned
        R = R[~fit]
    if not stopped and len(I) == k and R.size:
        VI = V[:, I]
        try:
            Z[:, R] = np.linalg.solve(VI, V[:, R])
        except np.linalg.LinAlgError:
            Z[:, R] = np.linalg.lstsq(VI, V[:, R], rcond=None)[0]
    for j in I:
        Z[:, j] = 0.0
        Z[slot[j], j] = 1.0
    J = np.array(_complete(I, k, n), dtype=np.int64)
    Z = Z[:J.size]
    Z, _ = _refine(D, J, Z, rng, m * n)
    info = {"chosen": list(I), "stopped_early": stopped,
            "planted_cost": int(M.sum())}
    if full_output:
        info["levels"] = levels
    return _solution(A, D, J, Z, "certify", info)


def solve_rankk_basic(A, k, rng=None, cap=SUBSET_CAP, regress="approx", repeats=None):
    """Best of all k-subsets of columns, each column fitted by regression.

    ``regress="approx"`` uses the randomised regression (the algorithm's
    ``k (k + 1)`` guarantee); ``"exact"`` uses exact enumeration and is
    only for small inputs.  Ties keep the first subset in lexicographic
    order.
    """
    rng = as_rng(rng)
    m, n = A.shape
    if not 1 <= k <= n:
        raise PreconditionError("need 1 <= k <= n")
    count = math.comb(n, k)
    if count > cap:
        raise CapExceededError("%d subsets of %d columns exceed the cap %d; "
                               "use solve_rankk_bicriteria" % (count, n, cap))
    D = A.to_dense()
    best = None
    for J in itertools.combinations(range(n), k):
        J = np.array(J, dtype=np.int64)
        if regress == "exact":
            X, cost = l0_regress_exact_many(D[:, J], D)
        else:
            X, cost = l0_regress_approx_many(D[:, J], D, rng, repeats, size_hint=m * n)
        total = int(cost.sum())
        if best is None or total < best[0]:
            best = (total, J, X)
    _, J, X = best
    return _solution(A, D, J, X, "basic", {"subsets": count})


def _select_columns(D, k, delta, rng, retries, repeats):
    """Sampling-based column selection under the guess ``delta``.

    Returns the selected columns, or ``None`` when a level exhausts its
    retries or the depth cap is exceeded.
    """
    m, n = D.shape
    Q = np.arange(n)
    J = []
    depth_cap = int(math.ceil(10 * math.log2(n / (2.0 * k)))) + 5
    depth = 0
    while Q.size > 2 * k:
        depth += 1
        if depth > depth_cap:
            return None
        thr = 100.0 * (k + 1) ** 2 * delta / Q.size
        for _ in range(retries):
            Rs = rng.choice(Q, size=2 * k, replace=False)
            _, cost = l0_regress_approx_many(D[:, Rs], D[:, Q], rng, repeats, size_hint=m * n)
            covered = cost <= thr
            if covered.sum() >= Q.size / 10.0:
                J.extend(int(j) for j in Rs)
                keep = ~covered & ~np.isin(Q, Rs)
                Q = Q[keep]
                break
        else:
            return None
    J.extend(int(j) for j in Q)
    return np.array(sorted(set(J)), dtype=np.int64)


def _exact_rank_solution(D, k):
    """Columns and coefficients reproducing ``D`` exactly if rank <= k."""
    m, n = D.shape
    if numerical_rank(D) > k:
        return None
    J = []
    for j in range(n):
        if numerical_rank(D[:, J + [j]]) > len(J):
            J.append(j)
        if len(J) == k:
            break
    J = _complete(J, k, n)
    C = D[:, J]
    Z = np.linalg.lstsq(C, D, rcond=None)[0]
    if np.any(_column_costs(D, np.array(J), Z)):
        return None
    return np.array(J, dtype=np.int64), Z


def solve_rankk_bicriteria(A, k, rng=None, retries=50, repeats=None, threads=1):
    """Bicriteria rank-k: ``O(k log(n/k))`` columns of ``A``.

    An exact-rank test handles a zero optimum.  Otherwise for every guess
    ``delta`` in ``1, 2, 4, ...`` up to ``m n`` the columns are selected
    by rounds of random ``2k``-column coverage tests (a column counts as
    covered when its regression residual is at most
    ``100 (k + 1)^2 delta / |Q|``, and a round must cover a tenth of the
    active set ``Q``) until at most ``2k`` remain, which are all taken.
    Guesses that exhaust ``retries`` at a level are abandoned.  ``Z`` is
    fitted by approximate regression and the cheapest guess is returned.
    """
    rng = as_rng(rng)
    m, n = A.shape
    if k < 1 or n <= 2 * k:
        raise PreconditionError("need k >= 1 and n > 2k (n = %d, k = %d)" % (n, k))
    D = A.to_dense()
    exact = _exact_rank_solution(D, k)
    if exact is not None:
        return _solution(A, D, exact[0], exact[1], "bicriteria", {"guess": 0})
    guesses = []
    g = 1
    while True:
        guesses.append(g)
        if g >= m * n:
            break
        g *= 2
    seeds = rng.integers(0, 2 ** 63, size=len(guesses))

    def run(t):
        sub = np.random.default_rng(int(seeds[t]))
        J = _select_columns(D, k, guesses[t], sub, retries, repeats)
        if J is None:
            return None
        X, cost = l0_regress_approx_many(D[:, J], D, sub, size_hint=m * n)
        return int(cost.sum()), t, J, X

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, range(len(guesses))))
    else:
        results = [run(t) for t in range(len(guesses))]
    done = [r for r in results if r is not None]
    if not done:
        raise PreconditionError("every guess of the optimum was abandoned")
    _, t, J, X = min(done, key=lambda r: (r[0], r[2].size, r[1]))
    info = {"guess": guesses[t], "abandoned": len(results) - len(done)}
    return _solution(A, D, J, X, "bicriteria", info)


def rankk_bracket_oracle(A, k, cap=SUBSET_CAP):
    """Bracket ``(ceil(B / (k + 1)), B)`` around the rank-k optimum, where
    ``B`` is the best k-subset cost under exact per-column regression."""
    m, n = A.shape
    if not 1 <= k <= 3:
        raise EnumerationLimitError("bracket oracle supports k <= 3")
    if k > n:
        raise PreconditionError("k exceeds the number of columns")
    if math.comb(n, k) > cap:
        raise EnumerationLimitError("too many column subsets")
    D = A.to_dense()
    best = None
    for J in itertools.combinations(range(n), k):
        _, cost = l0_regress_exact_many(D[:, list(J)], D)
        total = int(cost.sum())
        if best is None or total < best:
            best = total
    return -(-best // (k + 1)), best
