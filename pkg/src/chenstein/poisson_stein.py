"""Poisson arithmetic and solutions of the Stein equation for the Poisson law.

For ``lam > 0`` and a test function ``g`` the Stein equation reads::

    lam * f(i + 1) - i * f(i) = g(i) - E[g(P_lam)],   f(0) = 0.

Two families of test functions are supported: indicators of finite sets
(or intervals ``[0, v]``) and 1-Lipschitz functions. All Poisson masses are
handled in log space so that indices of several hundred are safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

import numpy as np
from scipy.special import gammaln, logsumexp, pdtr, pdtrc

__all__ = [
    "NumericalInstabilityError",
    "LipschitzError",
    "PoissonLaw",
    "IntervalSet",
    "NATURALS",
    "MagicFactors",
    "SteinSolution",
    "WASSERSTEIN_CONSTANT",
    "WASSERSTEIN_CONSTANT_EXACT",
    "pmf",
    "log_pmf",
    "cdf",
    "sf",
    "poisson_tail_index",
    "stein_f_indicator",
    "stein_f_indicator_values",
    "stein_f_zero",
    "stein_f_lipschitz",
    "stein_f_lipschitz_values",
    "magic_factors",
]

#: Rounded constant used in the Wasserstein magic factor.
WASSERSTEIN_CONSTANT = 1.1437
#: The exact value 8 / (3 sqrt(2e)) that 1.1437 rounds up.
WASSERSTEIN_CONSTANT_EXACT = 8.0 / (3.0 * math.sqrt(2.0 * math.e))

RESIDUAL_TOL = 1e-10
LIPSCHITZ_SLACK = 1e-12


class NumericalInstabilityError(ArithmeticError):
    """Raised when a Stein recursion leaves its residual tolerance."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class LipschitzError(ValueError):
    """Raised when a test function visibly violates the Lip(1) condition."""


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not (lam > 0.0) or not math.isfinite(lam):
        raise ValueError(f"Poisson mean must be positive and finite, got {lam!r}")
    return lam


def log_pmf(lam: float, k) -> np.ndarray | float:
    """Log Poisson mass ``k log(lam) - lam - log(k!)``."""
    lam = _check_lam(lam)
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise ValueError("Poisson support is the non-negative integers")
    out = k_arr * math.log(lam) - lam - gammaln(k_arr + 1.0)
    return float(out) if np.ndim(out) == 0 else out


def pmf(lam: float, k) -> np.ndarray | float:
    """Poisson mass ``P(P_lam = k)`` evaluated through log-Gamma.

    Examples
    --------
    >>> round(pmf(2.0, 3), 10)
    0.1804470443
    """
    out = np.exp(log_pmf(lam, k))
    return float(out) if np.ndim(out) == 0 else out


def cdf(lam: float, v) -> np.ndarray | float:
    """Poisson distribution function ``P(P_lam <= v)``."""
    lam = _check_lam(lam)
    v_arr = np.asarray(v)
    out = np.where(v_arr < 0, 0.0, pdtr(np.maximum(v_arr, 0), lam))
    return float(out) if np.ndim(out) == 0 else out


def sf(lam: float, v) -> np.ndarray | float:
    """Poisson survival function ``P(P_lam > v)``."""
    lam = _check_lam(lam)
    v_arr = np.asarray(v)
    out = np.where(v_arr < 0, 1.0, pdtrc(np.maximum(v_arr, 0), lam))
    return float(out) if np.ndim(out) == 0 else out


def poisson_tail_index(lam: float, tol: float = 1e-17, weight_mean: bool = False) -> int:
    """Smallest ``N`` with ``P(P_lam > N) < tol``.

    With ``weight_mean`` the criterion is ``lam * P(P_lam >= N) < tol``, which
    bounds ``E[(P_lam - N)_+]`` and hence the Wasserstein truncation error.
    """
    lam = _check_lam(lam)
    n = int(lam + 10.0 * math.sqrt(lam) + 10.0)
    while True:
        err = lam * sf(lam, n - 1) if weight_mean else sf(lam, n)
        if err < tol:
            break
        n += max(1, int(math.sqrt(lam)) + 1)
    return n


@dataclass(frozen=True)
class PoissonLaw:
    """Poisson distribution with mean ``lam``."""

    lam: float

    def __post_init__(self):
        _check_lam(self.lam)

    def pmf(self, k):
        return pmf(self.lam, k)

    def cdf(self, v):
        return cdf(self.lam, v)

    def sf(self, v):
        return sf(self.lam, v)

    def mean(self) -> float:
        return self.lam

    def truncation_index(self, tol: float = 1e-12) -> int:
        return poisson_tail_index(self.lam, tol)


@dataclass(frozen=True)
class IntervalSet:
    """The integer interval ``{lo, ..., hi}``; ``hi=None`` means unbounded."""

    lo: int
    hi: int | None

    def __post_init__(self):
        if self.lo < 0 or (self.hi is not None and self.hi < self.lo):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    def contains(self, k: int) -> bool:
        return k >= self.lo and (self.hi is None or k <= self.hi)


#: All of the non-negative integers; its Stein solution vanishes identically.
NATURALS = IntervalSet(0, None)

SetLike = Union[IntervalSet, Iterable[int]]


def _normalize_set(A: SetLike) -> IntervalSet | np.ndarray:
    if isinstance(A, IntervalSet):
        return A
    arr = np.unique(np.asarray(list(A), dtype=np.int64))
    if arr.size and arr[0] < 0:
        raise ValueError("sets must lie in the non-negative integers")
    return arr


def _log_pmf_grid(lam: float, n: int) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    return k * math.log(lam) - lam - gammaln(k + 1.0)


def _log_prob_of_set(lam: float, A: IntervalSet | np.ndarray) -> float:
    if isinstance(A, IntervalSet):
        if A.hi is None:
            return math.log(sf(lam, A.lo - 1)) if A.lo > 0 else 0.0
        return float(logsumexp(log_pmf(lam, np.arange(A.lo, A.hi + 1))))
    if A.size == 0:
        return -math.inf
    return float(logsumexp(log_pmf(lam, A)))


def stein_f_indicator_values(lam: float, A: SetLike, imax: int) -> np.ndarray:
    """Values ``f_A(0), ..., f_A(imax)`` of the Stein solution for ``1_A``.

    Uses the representation::

        f_A(i) = P(P in A, P < i) * G(i) - P(P in A, P >= i) * H(i)

    with ``G(i) = e^lam (i-1)! lam^-i P(P >= i)`` and
    ``H(i) = e^lam (i-1)! lam^-i P(P < i)``. Every product is formed from
    log-space partial sums of Poisson masses, so no factorial or power is
    ever materialised.
    """
    lam = _check_lam(lam)
    imax = int(imax)
    if imax < 0:
        raise ValueError("imax must be non-negative")
    Aset = _normalize_set(A)
    out = np.zeros(imax + 1)
    if isinstance(Aset, IntervalSet) and Aset.lo == 0 and Aset.hi is None:
        return out
    if not isinstance(Aset, IntervalSet) and Aset.size == 0:
        return out
    if imax == 0:
        return out

    top = max(imax, int(lam + 40.0 * math.sqrt(lam) + 40.0)) + 80
    if isinstance(Aset, IntervalSet):
        top = max(top, Aset.lo + 80)
    else:
        top = max(top, int(Aset[-1]) + 80)
    lp = _log_pmf_grid(lam, top)
    in_A = np.zeros(top + 1, dtype=bool)
    if isinstance(Aset, IntervalSet):
        hi = top if Aset.hi is None else min(Aset.hi, top)
        in_A[Aset.lo : hi + 1] = True
    else:
        in_A[Aset] = True

    lpA = np.where(in_A, lp, -np.inf)
    lpA_low = np.logaddexp.accumulate(lpA)  # log P(P in A, P <= k)
    lpA_high = np.logaddexp.accumulate(lpA[::-1])[::-1]  # log P(P in A, P >= k)
    lp_low = np.logaddexp.accumulate(lp)
    lp_high = np.logaddexp.accumulate(lp[::-1])[::-1]

    i = np.arange(1, imax + 1)
    log_scale = lam + gammaln(i.astype(float)) - i * math.log(lam)
    log_G = log_scale + lp_high[i]
    log_H = log_scale + lp_low[i - 1]
    a_low = lpA_low[i - 1]
    a_high = lpA_high[i]
    first = np.where(np.isneginf(a_low), 0.0, np.exp(a_low + log_G))
    second = np.where(np.isneginf(a_high), 0.0, np.exp(a_high + log_H))
    out[1:] = first - second
    return out


def stein_f_indicator(lam: float, A: SetLike, i: int) -> float:
    """Stein solution ``f_A(i)`` for the indicator of ``A``.

    Parameters
    ----------
    lam : float
        Poisson mean, positive.
    A : IntervalSet or iterable of int
        Finite set, an ``IntervalSet``, or ``NATURALS``.
    i : int
        Evaluation point, ``i >= 0``.

    Examples
    --------
    >>> round(stein_f_indicator(1.0, {0}, 1), 10)
    0.6321205588
    """
    i = int(i)
    if i < 0:
        raise ValueError("index must be non-negative")
    Aset = _normalize_set(A)
    if isinstance(Aset, np.ndarray) and Aset.size == 1 and Aset[0] == 0:
        return stein_f_zero(lam, i)
    return float(stein_f_indicator_values(lam, Aset, i)[i])


def stein_f_zero(lam: float, i: int) -> float:
    """Stein solution for ``A = {0}`` via its positive series.

    ``f(i) = sum_{l >= 0} lam^l (i-1)! / (i+l)! * e^-lam``, summed term by
    term with ratio ``lam / (i + l + 1)`` and stopped once the next term is
    below ``1e-16`` of the partial sum.
    """
    lam = _check_lam(lam)
    i = int(i)
    if i < 0:
        raise ValueError("index must be non-negative")
    if i == 0:
        return 0.0
    # Work with log terms to survive e^-lam underflow and huge partial sums.
    log_term = -math.log(i) - lam
    log_sum = log_term
    l = 0
    while True:
        log_term += math.log(lam) - math.log(i + l + 1)
        l += 1
        # Terms grow while i + l < lam, so only stop after the peak.
        if i + l >= lam and log_term < log_sum + math.log(1e-16):
            break
        log_sum = float(np.logaddexp(log_sum, log_term))
    return math.exp(log_sum)


def _eval_g(g: Callable, ks: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(g(ks), dtype=float)
        if vals.shape == ks.shape:
            return vals
    except Exception:
        pass
    return np.array([float(g(int(k))) for k in ks], dtype=float)


def _expect_g(lam: float, g: Callable) -> tuple[float, int]:
    """``E[g(P_lam)]`` truncated with certified error below ``1e-13``."""
    g0 = abs(float(_eval_g(g, np.array([0]))[0]))
    v = int(lam + 10.0 * math.sqrt(lam) + 10.0)
    while g0 * sf(lam, v) + lam * sf(lam, v - 1) >= 1e-13:
        v += max(1, int(math.sqrt(lam)) + 1)
    ks = np.arange(v + 1)
    vals = _eval_g(g, ks)
    weights = np.exp(_log_pmf_grid(lam, v))
    return float(np.dot(weights, vals)), v


def stein_f_lipschitz_values(lam: float, g: Callable, imax: int) -> np.ndarray:
    """Values ``f_g(0), ..., f_g(imax)`` for a 1-Lipschitz ``g``.

    Below the mean the recursion is run forward from ``f(0) = 0``; there the
    error amplification factor ``i / lam`` is at most one. Above the mean the
    same recursion is run backward from a far index, where the factor
    ``lam / i`` is below one and a zero start value is forgotten geometrically.
    The two branches must agree at the seam and every residual must lie below
    ``1e-10``.
    """
    lam = _check_lam(lam)
    imax = int(imax)
    if imax < 0:
        raise ValueError("imax must be non-negative")
    eg, _ = _expect_g(lam, g)
    seam = int(math.floor(lam)) + 1
    # Backward start: product of lam/j over [max(seam, imax), N) below 1e-18,
    # so the zero start is forgotten at every returned index.
    log_prod = 0.0
    n_far = max(seam, imax)
    while log_prod > math.log(1e-18):
        log_prod += math.log(lam) - math.log(n_far + 1)
        n_far += 1
    n_far += 2
    ks = np.arange(n_far + 1)
    gv = _eval_g(g, ks)
    diffs = np.abs(np.diff(gv))
    bad = np.nonzero(diffs > 1.0 + LIPSCHITZ_SLACK)[0]
    if bad.size:
        j = int(bad[0])
        raise LipschitzError(f"|g({j + 1}) - g({j})| = {diffs[j]:.6g} exceeds 1")
    c = gv - eg

    f = np.zeros(n_far + 1)
    for j in range(0, seam):
        f[j + 1] = (c[j] + j * f[j]) / lam
    forward_seam = f[seam]
    fb = np.zeros(n_far + 1)
    for j in range(n_far - 1, seam - 1, -1):
        fb[j] = (lam * fb[j + 1] - c[j]) / j
    if abs(fb[seam] - forward_seam) > RESIDUAL_TOL:
        raise NumericalInstabilityError(
            f"forward and backward branches disagree at index {seam}: "
            f"{forward_seam!r} vs {fb[seam]!r}",
            index=seam,
        )
    f[seam + 1 :] = fb[seam + 1 :]
    upto = min(imax + 1, n_far - 1)
    j = np.arange(upto)
    resid = np.abs(lam * f[j + 1] - j * f[j] - c[j])
    bad = np.nonzero(resid > RESIDUAL_TOL)[0]
    if bad.size:
        raise NumericalInstabilityError(
            f"Stein residual {resid[bad[0]]:.3g} at index {int(bad[0])}",
            index=int(bad[0]),
        )
    return f[: imax + 1].copy()


def stein_f_lipschitz(lam: float, g: Callable, i: int) -> float:
    """Stein solution ``f_g(i)`` for a test function with Lipschitz constant 1.

    Examples
    --------
    >>> round(stein_f_lipschitz(1.0, lambda k: k, 1), 12)
    -1.0
    """
    i = int(i)
    if i < 0:
        raise ValueError("index must be non-negative")
    return float(stein_f_lipschitz_values(lam, g, i)[i])


@dataclass(frozen=True)
class SteinSolution:
    """Lazily evaluated Stein solution for a fixed target.

    ``target`` is either a set description (for indicator targets) or a
    callable ``g`` with Lipschitz constant at most one.
    """

    lam: float
    target: object
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        _check_lam(self.lam)

    @property
    def is_indicator(self) -> bool:
        return not callable(self.target)

    def values(self, imax: int) -> np.ndarray:
        cached = self._cache.get("values")
        if cached is not None and cached.size > imax:
            return cached[: imax + 1]
        if self.is_indicator:
            vals = stein_f_indicator_values(self.lam, self.target, imax)
        else:
            vals = stein_f_lipschitz_values(self.lam, self.target, imax)
        self._cache["values"] = vals
        return vals

    def __call__(self, i: int) -> float:
        return float(self.values(int(i))[int(i)])

    def delta(self, i: int) -> float:
        """Forward difference ``f(i + 1) - f(i)``."""
        v = self.values(int(i) + 1)
        return float(v[i + 1] - v[i])


@dataclass(frozen=True)
class MagicFactors:
    """Uniform bounds on Stein solutions and their differences.

    Attributes
    ----------
    sup_f_g, sup_delta_f_g
        Bounds for solutions with 1-Lipschitz test functions.
    sup_f_A, sup_delta_f_A
        Bounds for indicator solutions.
    f0_at_1, f0_from_2
        Bounds on ``|f_{0}(1)|`` and ``|f_{0}(i)|`` for ``i >= 2``.
    delta_f0
        Bound on ``|f_{0}(i+1) - f_{0}(i)|`` for ``i >= n`` (``None`` without ``n``).
    delta_f0v
        Upper bound on ``f_{0..v}(i+1) - f_{0..v}(i)`` for ``i >= v + 2``
        (``None`` without ``v``).
    precondition_violated
        True when ``v > lam`` so ``delta_f0v`` fell back to ``sup_delta_f_A``.
    """

    lam: float
    v: int | None
    n: int | None
    sup_f_g: float
    sup_delta_f_g: float
    sup_f_A: float
    sup_delta_f_A: float
    f0_at_1: float
    f0_from_2: float
    delta_f0: float | None
    delta_f0v: float | None
    precondition_violated: bool = False
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "sup_f_g": self.sup_f_g,
            "sup_delta_f_g": self.sup_delta_f_g,
            "sup_f_A": self.sup_f_A,
            "sup_delta_f_A": self.sup_delta_f_A,
            "f0_at_1": self.f0_at_1,
            "f0_from_2": self.f0_from_2,
            "delta_f0": self.delta_f0,
            "delta_f0v": self.delta_f0v,
        }


def _factorial_over_power(n: int, lam: float) -> float:
    """``(n-1)! / lam^n`` in log space, capped to avoid overflow."""
    log_val = float(gammaln(n)) - n * math.log(lam)
    return math.exp(min(log_val, 700.0))


def magic_factors(lam: float, v: int | None = None, n: int | None = None) -> MagicFactors:
    """Return the magic factors for mean ``lam``.

    Examples
    --------
    >>> magic_factors(4.0).sup_delta_f_A
    0.25
    """
    lam = _check_lam(lam)
    if v is not None and (int(v) != v or v < 1):
        raise ValueError("v must be a positive integer")
    if n is not None and (int(n) != n or n < 1):
        raise ValueError("n must be a positive integer")
    sup_delta_f_A = min(1.0, 1.0 / lam)
    delta_f0 = None
    if n is not None:
        delta_f0 = min(1.0 / n, _factorial_over_power(int(n), lam))
    delta_f0v = None
    violated = False
    flags: tuple[str, ...] = ()
    if v is not None:
        if v <= lam:
            delta_f0v = min(1.0, (v + 1) ** 2 / lam**2)
        else:
            violated = True
            delta_f0v = sup_delta_f_A
            flags = ("precondition v <= lambda violated; using the indicator bound",)
    return MagicFactors(
        lam=lam,
        v=v,
        n=n,
        sup_f_g=1.0,
        sup_delta_f_g=min(1.0, WASSERSTEIN_CONSTANT / math.sqrt(lam)),
        sup_f_A=min(1.0, 1.0 / math.sqrt(lam)),
        sup_delta_f_A=sup_delta_f_A,
        f0_at_1=min(1.0, 1.0 / lam),
        f0_from_2=min(1.0, 1.0 / lam**2),
        delta_f0=delta_f0,
        delta_f0v=delta_f0v,
        precondition_violated=violated,
        flags=flags,
    )
