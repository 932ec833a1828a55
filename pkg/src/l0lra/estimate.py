"""Relative-error mean estimation and the sampled l0 residual estimator.

The stopping rule draws ``X`` in ``[0, 1]`` until the running sum reaches
``Y = 1 + 4 (1 + eps) (e - 2) ln(2 / delta) / eps**2`` and reports
``Y / draws``.  :func:`residual_sample_estimate` applies it to the
residual ``||A - A[:, j] v^T||_0`` and :func:`residual_race` combines it
with the exact linear-time computation under a shared work budget.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CapExceededError, PreconditionError
from .matcore import as_rng, residual_exact, same_values


@dataclass(frozen=True)
class EstimatorConfig:
    """Accuracy target for the estimators.

    ``delta=None`` means ``1 / (m n)**2`` for the matrix at hand.
    """
    epsilon: float = 0.1
    delta: Optional[float] = None
    sample_cap: int = 10 ** 8

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise PreconditionError("epsilon must lie in (0, 1), got %r" % self.epsilon)
        if self.delta is not None and not 0 < self.delta < 1:
            raise PreconditionError("delta must lie in (0, 1), got %r" % self.delta)
        if self.sample_cap < 1:
            raise PreconditionError("sample_cap must be >= 1")

    def resolved_delta(self, m=None, n=None):
        if self.delta is not None:
            return self.delta
        if m is None or n is None:
            raise PreconditionError("delta unset and matrix dimensions unknown")
        return min(0.5, 1.0 / float(max(m * n, 2)) ** 2)

    def with_epsilon(self, epsilon):
        return EstimatorConfig(epsilon, self.delta, self.sample_cap)


def stopping_threshold(epsilon, delta):
    """The sum the stopping rule waits for."""
    return 1.0 + 4.0 * (1.0 + epsilon) * (math.e - 2.0) * math.log(2.0 / delta) / epsilon ** 2


@dataclass
class StoppingResult:
    estimate: float
    draws: int
    threshold: float


def stopping_rule_estimate(sampler, cfg, delta=None, full_output=False):
    """Estimate the mean of a ``[0, 1]``-valued random variable.

    Parameters
    ----------
    sampler : callable
        ``sampler(size)`` returns an array of ``size`` independent draws.
    cfg : EstimatorConfig
    delta : float, optional
        Overrides ``cfg.delta``; one of the two must be set.
    full_output : bool
        Return a :class:`StoppingResult` instead of the bare estimate.

    Raises
    ------
    CapExceededError
        if ``cfg.sample_cap`` draws do not reach the threshold.
    """
    if delta is None:
        delta = cfg.delta
    if delta is None:
        raise PreconditionError("delta must be given")
    ups = stopping_threshold(cfg.epsilon, delta)
    cap = int(cfg.sample_cap)
    total = 0.0
    draws = 0
    chunk = int(math.ceil(ups))
    while draws < cap:
        size = min(chunk, cap - draws)
        x = np.asarray(sampler(size), dtype=np.float64)
        if x.shape != (size,):
            raise ValueError("sampler returned shape %s, expected (%d,)" % (x.shape, size))
        csum = np.cumsum(x) + total
        hit = int(np.searchsorted(csum, ups, side="left"))
        if hit < size:
            draws += hit + 1
            res = StoppingResult(ups / draws, draws, ups)
            return res if full_output else res.estimate
        total = float(csum[-1])
        draws += size
        # size the next chunk from the running mean
        if total > 0:
            need = (ups - total) * draws / total
            chunk = int(min(max(1.1 * need + 64, 64), 1 << 24))
        else:
            chunk = min(2 * chunk, 1 << 24)
    raise CapExceededError("stopping rule reached its cap of %d draws (sum %.3g < %.3g)"
                           % (cap, total, ups))


class _ResidualSampler(object):
    """Draws of X for A against the implicit rank-1 matrix B = A[:, j] v^T."""

    def __init__(self, A, j, v, rng):
        self.A = A
        self.j = int(j)
        self.v = v
        self.rng = rng
        self.rows_j, self.vals_j = A.column(self.j)
        self.supp_v = np.flatnonzero(v)
        self.nnz_b = self.rows_j.size * self.supp_v.size
        self.total = A.total_nnz + self.nnz_b
        self.p_a = A.total_nnz / self.total if self.total else 0.0
        self.branch = []

    def __call__(self, size):
        rng = self.rng
        from_a = rng.random(size) < self.p_a
        na = int(from_a.sum())
        out = np.empty(size)
        if na:
            r, c, a = self.A.sample_nonzeros(rng, na, charge=False)
            b = self.A._lookup(r, np.full(na, self.j)) * self.v[c]
            out[from_a] = _disagreement(a, b)
        nb = size - na
        if nb:
            t = rng.integers(self.rows_j.size, size=nb)
            s = rng.integers(self.supp_v.size, size=nb)
            r = self.rows_j[t]
            c = self.supp_v[s]
            b = self.vals_j[t] * self.v[c]
            a = self.A._lookup(r, c)
            out[~from_a] = _disagreement(a, b)
        self.branch.append(from_a)
        return out

    def charge(self, draws):
        """Charge the reads of the first ``draws`` draws to ``A.stats``."""
        if not self.branch:
            return
        used = np.concatenate(self.branch)[:draws]
        na = int(used.sum())
        self.A.stats.add(entry_reads=draws, nonzero_samples=na,
                         adjacency_reads=draws - na)


def _disagreement(a, b):
    x = np.where(same_values(a, b), 0.0, 1.0)
    x[(a != 0) & (b != 0) & (x == 1.0)] = 0.5
    return x


def residual_sample_estimate(A, j, v, cfg, rng=None, full_output=False):
    """Sampled estimate of ``||A - A[:, j] v^T||_0``.

    Each draw picks ``C`` from ``{A, B}`` with probability proportional to
    ``||C||_0``, takes a uniform nonzero of ``C`` and scores 0 if ``A`` and
    ``B`` agree there, 1/2 if both are nonzero and differ, 1 otherwise.
    The mean is ``||A - B||_0 / (||A||_0 + ||B||_0)``.
    """
    rng = as_rng(rng)
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != A.n:
        raise ValueError("coefficient vector has length %d, expected %d" % (v.size, A.n))
    smp = _ResidualSampler(A, j, v, rng)
    if smp.total == 0:
        raise PreconditionError("both A and A[:, j] v^T are zero")
    delta = cfg.resolved_delta(A.m, A.n)
    try:
        res = stopping_rule_estimate(smp, cfg, delta=delta, full_output=True)
    except CapExceededError:
        smp.charge(sum(b.size for b in smp.branch))
        raise
    smp.charge(res.draws)
    value = smp.total * res.estimate
    if full_output:
        return value, res
    return value


def residual_race(A, j, v, cfg, rng=None, work_factor=1.0, full_output=False):
    """Estimate ``||A - A[:, j] v^T||_0`` by racing sampling against exact.

    The sampled estimator runs with a budget of ``work_factor * ||A||_0``
    draws (one draw counts as one unit of work).  If it does not finish,
    the exact residual is computed.  ``full_output`` returns
    ``(value, path)`` with ``path`` in ``{"sampled", "exact"}``.
    """
    rng = as_rng(rng)
    v = np.asarray(v, dtype=np.float64).ravel()
    budget = int(math.ceil(work_factor * A.total_nnz))
    delta = cfg.resolved_delta(A.m, A.n)
    ups = stopping_threshold(cfg.epsilon, delta)
    value = None
    # every draw adds at most 1 to the sum, so fewer than ups draws never stop
    if budget >= ups:
        local = EstimatorConfig(cfg.epsilon, delta, max(1, min(budget, cfg.sample_cap)))
        try:
            value = residual_sample_estimate(A, j, v, local, rng)
            path = "sampled"
        except CapExceededError:
            value = None
    if value is None:
        value = float(residual_exact(A, j, v))
        path = "exact"
    if full_output:
        return value, path
    return value
