"""Head runs in Bernoulli sequences.

With ``X_{-1} = 0`` the indicator ``I^(i) = 1{X_{i-1} = 0, X_i = ... = X_{i+k-1} = 1}``
fires at the first position of every maximal run of ones whose length is
at least ``k``; ``S_{n,k} = sum_{i=0}^{n-k} I^(i)`` counts those runs.
All exact laws here come from enumerating the ``2^n`` sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .coupling import (
    BoundReport,
    CouplingLaw,
    InternalConsistencyError,
)
from .discrete_dist import IntegerPMF, empirical_pmf, tv_distance
from .poisson_stein import PoissonLaw
from .poisson_stein import cdf as poisson_cdf
from .pointproc import make_rng

__all__ = [
    "RunsConfig",
    "RunsSizeBias",
    "count_runs",
    "runs_mean",
    "brute_force_dist",
    "sizebias_runs_check",
    "bounds_runs",
    "remark_zero_bound",
    "simulate_runs",
    "MAX_EXHAUSTIVE_N",
    "MAX_SIZEBIAS_N",
]

MAX_EXHAUSTIVE_N = 20
MAX_SIZEBIAS_N = 14


@dataclass(frozen=True)
class RunsConfig:
    """Sequence length ``n``, run length ``k`` and success probability ``p``."""

    n: int
    k: int
    p: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if int(self.k) != self.k or not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n (got k={self.k}, n={self.n})")
        if not 0 < self.p <= 0.5:
            raise ValueError("need 0 < p <= 1/2")

    @property
    def lam(self) -> float:
        return runs_mean(self.n, self.k, self.p)


def runs_mean(n: int, k: int, p: float) -> float:
    """``E[S_{n,k}] = p^k (1 + (n - k)(1 - p))``."""
    return p**k * (1.0 + (n - k) * (1.0 - p))


def count_runs(bits, k: int) -> int:
    """Evaluate ``sum_{i=0}^{n-k} I^(i)`` for one sequence.

    Examples
    --------
    >>> count_runs([1, 1, 1], 1)
    1
    >>> count_runs([0, 1, 0, 1], 1)
    2
    """
    x = [int(b) for b in bits]
    n = len(x)
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n (got k={k}, n={n})")
    total = 0
    for i in range(n - k + 1):
        prev = x[i - 1] if i >= 1 else 0
        if prev == 0 and all(x[j] == 1 for j in range(i, i + k)):
            total += 1
    return total


def _indicators(bits: np.ndarray, k: int) -> np.ndarray:
    """``I^(i)`` for ``i = 0..n-k`` on a batch of sequences (rows)."""
    m, n = bits.shape
    prev = np.concatenate([np.zeros((m, 1), dtype=bits.dtype), bits[:, :-1]], axis=1)
    starts = bits & (1 - prev)
    cs = np.concatenate([np.zeros((m, 1), dtype=np.int16), np.cumsum(bits, axis=1, dtype=np.int16)],
                        axis=1)
    full = (cs[:, k:] - cs[:, : n - k + 1]) == k
    return (full & (starts[:, : n - k + 1] == 1)).astype(np.int8)


def _bit_block(n: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


@lru_cache(maxsize=512)
def _count_table(n: int, k: int) -> np.ndarray:
    """``table[c, s]`` = number of sequences with ``c`` ones and ``S = s``."""
    if n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive enumeration limited to n <= {MAX_EXHAUSTIVE_N}")
    smax = n // k + 1
    table = np.zeros((n + 1) * (smax + 1), dtype=np.int64)
    chunk = 1 << 15
    for start in range(0, 1 << n, chunk):
        bits = _bit_block(n, start, min(start + chunk, 1 << n))
        s = _indicators(bits, k).sum(axis=1)
        c = bits.sum(axis=1, dtype=np.int64)
        table += np.bincount(c * (smax + 1) + s, minlength=table.size)
    table = table.reshape(n + 1, smax + 1)
    table.setflags(write=False)
    return table


def _count_table_upto(n: int, k: int, smax: int) -> np.ndarray:
    table = _count_table(n, k)
    out = np.zeros((n + 1, smax + 1))
    w = min(smax + 1, table.shape[1])
    out[:, :w] = table[:, :w]
    return out


def _seq_weights(n: int, p: float) -> np.ndarray:
    c = np.arange(n + 1)
    return p**c * (1.0 - p) ** (n - c)


def brute_force_dist(cfg: RunsConfig) -> IntegerPMF:
    """Exact law of ``S_{n,k}`` by summing over all ``2^n`` sequences.

    Sequences are grouped by their number of ones, so one enumeration per
    ``(n, k)`` serves every ``p``.
    """
    if cfg.n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive enumeration limited to n <= {MAX_EXHAUSTIVE_N}")
    table = _count_table(cfg.n, cfg.k)
    mass = _seq_weights(cfg.n, cfg.p) @ table
    support = np.nonzero(mass > 0)[0]
    m = mass[support]
    return IntegerPMF(support, m / m.sum())


@dataclass(frozen=True)
class RunsSizeBias:
    """Exact size-bias coupling ``(S, -U_Y)`` and the identity residual."""

    coupling: CouplingLaw
    max_residual: float
    lam: float


def sizebias_runs_check(cfg: RunsConfig, tol: float = 1e-12) -> RunsSizeBias:
    """Exact joint law of ``(S, U_Y)`` and a check of the size-bias identity.

    ``U_l`` sums ``I^(i)`` over ``max(0, l-k) <= i <= min(n-k, l+k)`` and ``Y``
    is independent of the sequence with ``P(Y = l) = E[I^(l)] / E[S]``. The
    identity ``m P(S = m) = E[S] P(S - U_Y = m - 1)`` is checked for every
    ``m`` up to one past the support.
    """
    n, k, p = cfg.n, cfg.k, cfg.p
    if n > MAX_SIZEBIAS_N:
        raise ValueError(f"exact size-bias enumeration limited to n <= {MAX_SIZEBIAS_N}")
    L = n - k + 1
    bits = _bit_block(n, 0, 1 << n)
    ind = _indicators(bits, k).astype(np.int64)
    s = ind.sum(axis=1)
    c = bits.sum(axis=1, dtype=np.int64)
    cs = np.concatenate([np.zeros((ind.shape[0], 1), dtype=np.int64), np.cumsum(ind, axis=1)], axis=1)
    ell = np.arange(L)
    lo = np.maximum(0, ell - k)
    hi = np.minimum(n - k, ell + k)
    U = cs[:, hi + 1] - cs[:, lo]
    # Integer counts keyed by (ones, S, U_l, l > 0) keep the sums exact.
    smax = int(s.max()) + 1
    dims = (n + 1, smax + 1, smax + 1, 2)
    key = np.ravel_multi_index(
        (np.repeat(c, L), np.repeat(s, L), U.ravel(), np.tile((ell > 0).astype(np.int64), s.size)), dims)
    counts = np.bincount(key, minlength=int(np.prod(dims))).reshape(dims).astype(float)
    w_c = _seq_weights(n, p)
    e_ind = np.array([p**k, p**k * (1.0 - p)])
    lam = float(p**k + (L - 1) * e_ind[1])
    joint = np.einsum("c,csuy,y->su", w_c, counts, e_ind) / lam
    p_s = np.zeros(smax + 2)
    p_s[: smax + 1] = w_c @ _count_table_upto(n, k, smax)
    shifted = np.zeros(smax + 2)
    for sv in range(smax + 1):
        for uv in range(sv + 1):
            shifted[sv - uv] += joint[sv, uv]
    m = np.arange(1, smax + 2)
    resid = np.abs(m * p_s[m] - lam * shifted[m - 1])
    max_resid = float(resid.max())
    if max_resid > tol:
        raise InternalConsistencyError(f"runs size-bias identity off by {max_resid:.3g}")
    table = {}
    for sv in range(smax + 1):
        for uv in range(smax + 1):
            if joint[sv, uv] > 0:
                table[(sv, -uv)] = joint[sv, uv]
    total = sum(table.values())
    table = {key: val / total for key, val in table.items()}
    return RunsSizeBias(CouplingLaw.from_table(table, lam), max_resid, lam)


def remark_zero_bound(cfg: RunsConfig) -> float:
    """``exp(-(n - k + 1) p^k (1 - p))``, an upper bound on ``P(S = 0)``."""
    return math.exp(-(cfg.n - cfg.k + 1) * cfg.p**cfg.k * (1.0 - cfg.p))


def bounds_runs(cfg: RunsConfig, v: int) -> dict[str, BoundReport]:
    """TV bound ``(2k+1) min(1, lam) p^k`` and the ``k``-free CDF bound.

    The CDF bound ``40 (v+2)^2 log(n) / n`` needs ``n >= 2`` and is omitted
    otherwise. Exact left-hand sides are attached for ``n <= 20``.
    """
    if int(v) != v or v < 0:
        raise ValueError("v must be a non-negative integer")
    lam = cfg.lam
    law = brute_force_dist(cfg) if cfg.n <= MAX_EXHAUSTIVE_N else None
    tv_lhs = tv_distance(law, PoissonLaw(lam)) if law is not None else None
    cdf_lhs = abs(float(law.cdf(v)) - poisson_cdf(lam, v)) if law is not None else None
    reports = {
        "tv": BoundReport(
            "runs", "tv",
            {"lambda": lam, "2k+1": 2 * cfg.k + 1, "min(1,lambda)": min(1.0, lam), "p^k": cfg.p**cfg.k},
            (2 * cfg.k + 1) * min(1.0, lam) * cfg.p**cfg.k, tv_lhs),
    }
    if cfg.n >= 2:
        reports["uniform"] = BoundReport(
            "runs", "uniform", {"v": v, "n": cfg.n, "log(n)/n": math.log(cfg.n) / cfg.n},
            40.0 * (v + 2) ** 2 * math.log(cfg.n) / cfg.n, cdf_lhs)
    if law is not None:
        reports["remark_zero"] = BoundReport(
            "runs", "remark_zero", {"(n-k+1)p^k(1-p)": (cfg.n - cfg.k + 1) * cfg.p**cfg.k * (1 - cfg.p)},
            remark_zero_bound(cfg), law.prob(0))
    return reports


def simulate_runs(cfg: RunsConfig, reps: int, seed) -> IntegerPMF:
    """Empirical law of ``S_{n,k}`` from ``reps`` simulated sequences."""
    rng = make_rng(seed)
    out = np.empty(reps, dtype=np.int64)
    chunk = 1 << 15
    for start in range(0, reps, chunk):
        m = min(chunk, reps - start)
        bits = (rng.random((m, cfg.n)) < cfg.p).astype(np.int8)
        out[start:start + m] = _indicators(bits, cfg.k).sum(axis=1)
    return empirical_pmf(out)
