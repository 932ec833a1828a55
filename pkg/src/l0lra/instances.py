"""Seeded instance generators with certified cost bounds.

Each ``gen_*`` function is a deterministic function of its parameters and
the random generator state.  Planted generators check at generation time
that the planted factors have cost exactly ``s``.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .matcore import (as_rng, from_dense, l0_distance_exact, outer_product,
                      read_matrix_market, write_matrix_market)

NONZERO_VALUES = np.array([-5, -4, -3, -2, -1, 1, 2, 3, 4, 5], dtype=np.float64)


@dataclass
class PlantedInstance:
    """A matrix together with factors of known cost.

    ``factors`` maps names to arrays: ``u``/``v`` for rank-1 instances or
    ``U``/``V`` for rank-k ones.  ``cost_upper_bound`` is the exact cost
    of the factors, which bounds the optimum from above.
    """
    matrix: object
    factors: dict
    flips: int
    cost_upper_bound: int
    params: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def psi_bound(self):
        nnz = self.matrix.total_nnz
        return self.cost_upper_bound / nnz if nnz else float("inf")

    def product(self):
        if "u" in self.factors:
            return np.outer(self.factors["u"], self.factors["v"])
        return self.factors["U"] @ self.factors["V"]


def _support(size, count, rng):
    mask = np.zeros(size, dtype=bool)
    mask[rng.choice(size, size=count, replace=False)] = True
    return mask


def _corrupt(P, s, rng, boolean):
    """Change ``s`` distinct cells of ``P`` to values that differ from it."""
    m, n = P.shape
    A = P.copy()
    cells = rng.choice(m * n, size=s, replace=False)
    r, c = np.divmod(cells, n)
    if boolean:
        A[r, c] = 1.0 - A[r, c]
    else:
        pool = np.concatenate([[0.0], NONZERO_VALUES])
        for t in range(s):
            old = A[r[t], c[t]]
            choices = pool[pool != old]
            A[r[t], c[t]] = choices[rng.integers(choices.size)]
    return A


def gen_planted_rank1_real(m, n, support_density, s, rng=None):
    """Integer rank-1 matrix ``u v^T`` with ``s`` corrupted cells.

    ``u`` and ``v`` have ``max(1, round(density * size))`` nonzeros drawn
    from ``{-5..-1, 1..5}``.  Each corrupted cell gets a value from
    ``{-5..5}`` different from the product entry.
    """
    rng = as_rng(rng)
    if s < 0 or s > m * n:
        raise PreconditionError("need 0 <= s <= m*n")
    if not 0 < support_density <= 1:
        raise PreconditionError("support_density must lie in (0, 1]")
    u = np.zeros(m)
    v = np.zeros(n)
    su = _support(m, max(1, int(round(support_density * m))), rng)
    sv = _support(n, max(1, int(round(support_density * n))), rng)
    u[su] = rng.choice(NONZERO_VALUES, size=int(su.sum()))
    v[sv] = rng.choice(NONZERO_VALUES, size=int(sv.sum()))
    P = np.outer(u, v)
    A = from_dense(_corrupt(P, s, rng, boolean=False))
    cost = l0_distance_exact(A, outer_product(u, v))
    A.stats.reset()
    if cost != s:
        raise RuntimeError("planted cost %d != %d" % (cost, s))
    return PlantedInstance(A, {"u": u, "v": v}, s, s,
                           {"m": m, "n": n, "support_density": support_density, "s": s})


def gen_planted_boolean(m, n, alpha, beta, s, rng=None):
    """Binary ``u v^T`` with ``alpha`` ones in ``u``, ``beta`` in ``v`` and
    ``s`` flipped bits."""
    rng = as_rng(rng)
    if not (0 <= alpha <= m and 0 <= beta <= n and 0 <= s <= m * n):
        raise PreconditionError("need alpha <= m, beta <= n, 0 <= s <= m*n")
    if (alpha == 0 or beta == 0) and s == 0:
        raise PreconditionError("all-zero planted boolean instance")
    u = _support(m, alpha, rng).astype(np.float64)
    v = _support(n, beta, rng).astype(np.float64)
    P = np.outer(u, v)
    A = from_dense(_corrupt(P, s, rng, boolean=True), binary=True)
    cost = l0_distance_exact(A, outer_product(u, v, binary=True))
    A.stats.reset()
    if cost != s:
        raise RuntimeError("planted cost %d != %d" % (cost, s))
    return PlantedInstance(A, {"u": u, "v": v}, s, s,
                           {"m": m, "n": n, "alpha": alpha, "beta": beta, "s": s})


def gen_planted_rankk_real(m, n, k, s, rng=None):
    """Integer ``U V`` of rank ``k`` plus ``s`` corrupted cells.

    Entries of ``U`` (m x k) and ``V`` (k x n) are drawn from
    ``{-5..-1, 1..5}``; ``V`` is redrawn until it has full row rank.
    """
    rng = as_rng(rng)
    if not 1 <= k <= min(m, n):
        raise PreconditionError("need 1 <= k <= min(m, n)")
    if s < 0 or s > m * n:
        raise PreconditionError("need 0 <= s <= m*n")
    while True:
        U = rng.choice(NONZERO_VALUES, size=(m, k))
        V = rng.choice(NONZERO_VALUES, size=(k, n))
        if np.linalg.matrix_rank(U) == k and np.linalg.matrix_rank(V) == k:
            break
    P = U @ V
    A = from_dense(_corrupt(P, s, rng, boolean=False))
    cost = l0_distance_exact(A, from_dense(P))
    A.stats.reset()
    if cost != s:
        raise RuntimeError("planted cost %d != %d" % (cost, s))
    return PlantedInstance(A, {"U": U, "V": V}, s, s, {"m": m, "n": n, "k": k, "s": s})


def gen_identity_plus_ones(n):
    """``I + J``: 2 on the diagonal, 1 elsewhere."""
    if n < 2:
        raise PreconditionError("need n >= 2")
    return from_dense(np.ones((n, n)) + np.eye(n))


def gen_gaussian_identity(n, k, rng=None, full_output=False):
    """The ``(n + k) x n`` matrix ``[G; I]`` with Gaussian ``G`` (k x n).

    Its planted factors ``U = [I_k; 0]`` and ``V = G`` cost exactly ``n``
    (the identity block), while any solution spanned by ``k`` columns of
    the matrix costs at least ``(n - k) k``.
    """
    rng = as_rng(rng)
    if not 1 <= k <= n / 2:
        raise PreconditionError("need 1 <= k <= n/2")
    G = rng.standard_normal((k, n))
    A = from_dense(np.vstack([G, np.eye(n)]))
    if not full_output:
        return A
    U = np.vstack([np.eye(k), np.zeros((n, k))])
    cost = l0_distance_exact(A, from_dense(U @ G))
    A.stats.reset()
    return PlantedInstance(A, {"U": U, "V": G}, cost, cost, {"n": n, "k": k})


def gen_sample_lb_hard(n, phi, rng=None, full_output=False):
    """Hard instance for sampling algorithms, built from paired row blocks.

    With ``k = phi n / 2`` and ``phi' = 25 phi``, block ``i`` (rows ``2i``
    and ``2i + 1``, 0-based) draws ``b_ij ~ Bernoulli(p_i)`` with ``p_i``
    uniform over ``{1/2 - phi', 1/2 + phi'}``, and sets
    ``A[2i+1, 2j+1] = A[2i, 2j] = b_ij`` and the two other cells of the
    2x2 block to ``1 - b_ij``.  Every later row has ones exactly in the odd
    (0-based) columns.  Every row has ``n / 2`` ones.

    With ``full_output`` returns a :class:`PlantedInstance` whose factors
    are the odd-column ``v`` and the best ``u`` for it, and whose ``meta``
    holds the labels ``p``.
    """
    rng = as_rng(rng)
    if n < 2 or n % 2:
        raise PreconditionError("n must be even and >= 2")
    if not 0 < phi <= 0.01:
        raise PreconditionError("phi must lie in (0, 1/100]")
    half = phi * n / 2.0
    k = int(round(half))
    if k < 1 or abs(k - half) > 1e-9:
        raise PreconditionError("phi * n / 2 must be a positive integer (got %g)" % half)
    ph = 25.0 * phi
    high = rng.random(k) < 0.5
    p = np.where(high, 0.5 + ph, 0.5 - ph)
    A = np.zeros((n, n))
    b = (rng.random((k, n // 2)) < p[:, None]).astype(np.float64)
    A[0:2 * k:2, 0::2] = b
    A[1:2 * k:2, 1::2] = b
    A[0:2 * k:2, 1::2] = 1.0 - b
    A[1:2 * k:2, 0::2] = 1.0 - b
    A[2 * k:, 1::2] = 1.0
    M = from_dense(A, binary=True)
    if not full_output:
        return M
    v = np.zeros(n)
    v[1::2] = 1.0
    ones_in = A[:, 1::2].sum(axis=1)
    u = (ones_in > n / 4.0).astype(np.float64)
    u[2 * k:] = 1.0
    cost = l0_distance_exact(M, outer_product(u, v, binary=True))
    M.stats.reset()
    return PlantedInstance(M, {"u": u, "v": v}, cost, cost, {"n": n, "phi": phi},
                           {"k": k, "phi_prime": ph, "p": p.tolist()})


# -- serialisation --------------------------------------------------------
def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def save_instance(prefix, matrix, sidecar):
    """Write ``prefix.mtx`` and ``prefix.json``; returns both paths."""
    mpath, jpath = prefix + ".mtx", prefix + ".json"
    write_matrix_market(mpath, matrix)
    with open(jpath, "w") as fh:
        json.dump({k: _jsonable(v) for k, v in sidecar.items()}, fh, indent=1, sort_keys=True,
                  default=_jsonable)
        fh.write("\n")
    return mpath, jpath


def instance_sidecar(inst, generator, seed):
    """JSON-ready description of a :class:`PlantedInstance`."""
    return {
        "generator": generator,
        "seed": seed,
        "params": inst.params,
        "flips": int(inst.flips),
        "cost_upper_bound": int(inst.cost_upper_bound),
        "factors": {k: _jsonable(v) for k, v in inst.factors.items()},
        "meta": inst.meta,
    }


def load_instance(prefix):
    """Read ``prefix.mtx`` and, if present, the sidecar ``prefix.json``."""
    A = read_matrix_market(prefix + ".mtx")
    try:
        with open(prefix + ".json") as fh:
            side = json.load(fh)
    except FileNotFoundError:
        side = None
    return A, side
