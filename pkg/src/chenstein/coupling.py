"""Generalised size-bias couplings and the Poisson approximation bounds they give.

A coupling is the joint law of ``(X, Z)`` with ``X`` in the non-negative
integers and ``Z`` integer valued, together with a rate ``lam``. The error
sequence ``q_{i-1} = i P(X = i) - lam P(X + Z = i - 1)`` measures how far
``X + Z + 1`` is from a size-bias version of ``X``; when it vanishes and
``lam = E[X]`` the sharper bounds apply.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .discrete_dist import (
    IntegerPMF,
    kolmogorov_distance,
    tv_distance,
    wasserstein_distance,
)
from .poisson_stein import WASSERSTEIN_CONSTANT, PoissonLaw
from .poisson_stein import cdf as poisson_cdf

__all__ = [
    "CouplingError",
    "InsufficientDataError",
    "PreconditionError",
    "NonZeroQError",
    "InternalConsistencyError",
    "EstimateBiasWarning",
    "CouplingLaw",
    "QSequence",
    "BoundReport",
    "SignBounds",
    "CouplingTerms",
    "q_sequence",
    "bounds_exact",
    "bounds_approximate",
    "zero_prob_sign_bounds",
    "estimate_coupling_terms",
    "sizebias_wald_test",
    "zero_weight",
    "BOUND_SLACK",
]

BOUND_SLACK = 1e-12
MIN_SAMPLES = 100


class CouplingError(ValueError):
    """Base class for invalid couplings or unmet theorem hypotheses."""


class InsufficientDataError(CouplingError):
    """Raised when a sample-mode estimate has too few samples."""


class PreconditionError(CouplingError):
    """Raised when a theorem hypothesis (e.g. ``lam == E[X]``) fails."""


class NonZeroQError(PreconditionError):
    """Raised by :func:`bounds_exact` when the error sequence is not zero."""


class InternalConsistencyError(RuntimeError):
    """A proven inequality failed on exact input; this indicates a bug."""


class EstimateBiasWarning(UserWarning):
    """Plug-in estimates of ``sum |q_i|`` from samples are biased upward."""


@dataclass(frozen=True, eq=False)
class CouplingLaw:
    """Joint law of ``(X, Z)`` with rate ``lam``.

    Build instances with :meth:`from_table` (exact probabilities) or
    :meth:`from_samples` (equally weighted draws).
    """

    x: np.ndarray
    z: np.ndarray
    weight: np.ndarray
    lam: float
    mode: str = "exact"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        z = np.asarray(self.z, dtype=np.int64)
        w = np.asarray(self.weight, dtype=float)
        if x.ndim != 1 or x.shape != z.shape or x.shape != w.shape or x.size == 0:
            raise CouplingError("x, z and weight must be non-empty 1-d arrays of equal length")
        if np.any(x < 0):
            raise CouplingError("X must be non-negative")
        if np.any(w < 0):
            raise CouplingError("probabilities must be non-negative")
        if self.mode not in ("exact", "samples"):
            raise CouplingError(f"unknown mode {self.mode!r}")
        if self.mode == "exact" and abs(w.sum() - 1.0) > 1e-12:
            raise CouplingError(f"probabilities sum to {w.sum()!r}, not 1")
        if not (float(self.lam) > 0) or not math.isfinite(float(self.lam)):
            raise CouplingError("lambda must be positive")
        for name, arr in (("x", x), ("z", z), ("weight", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def from_table(cls, table, lam: float) -> "CouplingLaw":
        """Exact coupling from ``{(x, z): probability}`` or ``[((x, z), p), ...]``.

        Repeated atoms are merged.
        """
        items = table.items() if isinstance(table, Mapping) else table
        merged: dict[tuple[int, int], float] = {}
        for (xv, zv), p in items:
            key = (int(xv), int(zv))
            merged[key] = merged.get(key, 0.0) + float(p)
        keys = sorted(merged)
        x = np.array([k[0] for k in keys], dtype=np.int64)
        z = np.array([k[1] for k in keys], dtype=np.int64)
        w = np.array([merged[k] for k in keys])
        return cls(x, z, w, lam, "exact")

    @classmethod
    def from_samples(cls, x: Iterable[int], z: Iterable[int], lam: float) -> "CouplingLaw":
        x = np.asarray(x, dtype=np.int64)
        z = np.asarray(z, dtype=np.int64)
        n = x.size
        return cls(x, z, np.full(n, 1.0 / n if n else 0.0), lam, "samples")

    @property
    def n_samples(self) -> int | None:
        return int(self.x.size) if self.mode == "samples" else None

    @property
    def z_minus(self) -> np.ndarray:
        return np.maximum(-self.z, 0)

    def expect(self, values: np.ndarray) -> float:
        return float(np.dot(self.weight, values))

    def mean_x(self) -> float:
        return self.expect(self.x)

    def e_abs_z(self) -> float:
        return self.expect(np.abs(self.z))

    def x_law(self) -> IntegerPMF:
        mass = np.bincount(self.x, weights=self.weight)
        mass = mass / mass.sum()
        if self.mode == "samples":
            idx = np.nonzero(mass)[0]
            return IntegerPMF(idx, mass[idx], "empirical", self.n_samples)
        idx = np.nonzero(mass)[0]
        return IntegerPMF(idx, mass[idx] / mass[idx].sum())

    def prob_sum_nonnegative(self) -> float:
        return self.expect((self.x + self.z >= 0).astype(float))


@dataclass(frozen=True, eq=False)
class QSequence:
    """Error sequence ``q_0, q_1, ...`` with a certified bound on the omitted tail.

    ``tail_bound`` is ``0.0`` for exact tables. For sample estimates it is
    ``None`` because nothing beyond the observed support can be certified.
    """

    values: np.ndarray
    tail_bound: float | None
    stderr: np.ndarray | None = None

    def __getitem__(self, i: int) -> float:
        return float(self.values[i]) if 0 <= i < self.values.size else 0.0

    @property
    def estimated(self) -> bool:
        return self.tail_bound is None

    def abs_sum(self, start: int = 0) -> float:
        """``sum_{i >= start} |q_i|`` including the certified tail bound."""
        if self.tail_bound is not None and not math.isfinite(self.tail_bound):
            raise CouplingError("the q-sequence tail is not summable")
        tail = 0.0 if self.tail_bound is None else self.tail_bound
        return float(np.abs(self.values[start:]).sum() + tail)

    def is_zero(self, tol: float = 1e-10) -> bool:
        return bool(np.all(np.abs(self.values) <= tol)) and (self.tail_bound or 0.0) <= tol


def q_sequence(c: CouplingLaw) -> QSequence:
    """Error sequence of a coupling.

    Examples
    --------
    >>> c = CouplingLaw.from_table({(0, 0): 0.5, (1, 0): 0.5}, lam=0.5)
    >>> q_sequence(c).values[:2].tolist()
    [0.25, -0.25]
    """
    x, z, w, lam = c.x, c.z, c.weight, c.lam
    s = x + z
    top = int(max(x.max(), s.max() + 1, 1))
    ok = s >= 0
    if c.mode == "exact":
        px = np.bincount(x, weights=w, minlength=top + 1)
        ps = np.bincount(s[ok], weights=w[ok], minlength=top + 1)
        i = np.arange(1, top + 1)
        return QSequence(i * px[i] - lam * ps[i - 1], 0.0)

    n = x.size
    if n < MIN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_SAMPLES} samples, got {n}")
    a_idx = x - 1
    a_val = x.astype(float)
    has_a = x >= 1
    b_val = np.full(n, -lam)
    total = np.zeros(top + 1)
    sq = np.zeros(top + 1)
    np.add.at(total, a_idx[has_a], a_val[has_a])
    np.add.at(total, s[ok], b_val[ok])
    np.add.at(sq, a_idx[has_a], a_val[has_a] ** 2)
    np.add.at(sq, s[ok], b_val[ok] ** 2)
    both = has_a & ok & (a_idx == s)
    np.add.at(sq, a_idx[both], 2.0 * a_val[both] * b_val[both])
    mean = total / n
    var = np.maximum(sq / n - mean**2, 0.0)
    return QSequence(mean, None, np.sqrt(var / n))


@dataclass(frozen=True)
class BoundReport:
    """One bound: its itemised terms, assembled value and optional left-hand side.

    ``satisfied`` is ``exact_lhs <= bound + slack`` when a left-hand side is
    available, otherwise ``None``.
    """

    theorem: str
    quantity: str
    terms: dict
    bound: float
    exact_lhs: float | None = None
    slack: float = BOUND_SLACK
    notes: tuple[str, ...] = ()

    @property
    def satisfied(self) -> bool | None:
        if self.exact_lhs is None:
            return None
        return bool(self.exact_lhs <= self.bound + self.slack)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        d["satisfied"] = self.satisfied
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def zero_weight(lam: float, k: int) -> float:
    """``min(lam / (k + 1), k! / lam^k)`` used in the bound at zero."""
    log_fact = float(gammaln(k + 1)) - k * math.log(lam)
    return min(lam / (k + 1), math.exp(min(log_fact, 700.0)))


def _factorial_over_power(m: int, lam: float) -> float:
    return math.exp(min(float(gammaln(m + 1)) - m * math.log(lam), 700.0))


def _check_m_v(m: int, v: int):
    if int(m) != m or m < 0:
        raise ValueError("m must be a non-negative integer")
    if int(v) != v or v < 1:
        raise ValueError("v must be a positive integer")


def _z_terms(c: CouplingLaw, m: int, v: int) -> dict:
    abs_z = np.abs(c.z)
    shifted = c.x - c.z_minus
    terms = {"E|Z|": c.e_abs_z()}
    for k in range(m):
        terms[f"E[|Z|1{{X-Z_-={k}}}]"] = c.expect(abs_z * (shifted == k))
    terms[f"E[|Z|1{{X-Z_-<={v}}}]"] = c.expect(abs_z * (shifted <= v))
    return terms


def _assemble(c: CouplingLaw, m: int, v: int, q: QSequence | None, theorem: str,
              exact_lhs: bool, include_sharp: bool) -> dict[str, BoundReport]:
    lam = c.lam
    zt = _z_terms(c, m, v)
    ez = zt["E|Z|"]
    sum_q = q.abs_sum() if q is not None else 0.0
    q0 = abs(q[0]) if q is not None else 0.0
    sum_q1 = q.abs_sum(1) if q is not None else 0.0
    notes: tuple[str, ...] = ()
    if q is not None and q.estimated:
        notes = ("sum |q_i| is a plug-in sample estimate without a certified tail",)

    lhs = {}
    if exact_lhs:
        law = c.x_law()
        target = PoissonLaw(lam)
        lhs = {
            "tv": tv_distance(law, target),
            "wasserstein": wasserstein_distance(law, target),
            "zero": abs(law.prob(0) - math.exp(-lam)),
            "cdf": abs(float(law.cdf(v)) - poisson_cdf(lam, v)),
        }

    reports: dict[str, BoundReport] = {}
    f_tv = min(1.0, lam)
    tv_terms = {"E|Z|": ez, "min(1,lambda)": f_tv}
    tv_bound = f_tv * ez
    if q is not None:
        f_q = min(1.0, 1.0 / math.sqrt(lam))
        tv_terms.update({"sum|q_i|": sum_q, "min(1,1/sqrt(lambda))": f_q})
        tv_bound += f_q * sum_q
    reports["tv"] = BoundReport(theorem, "tv", tv_terms, tv_bound, lhs.get("tv"), notes=notes)

    f_w = min(WASSERSTEIN_CONSTANT * math.sqrt(lam), lam)
    if q is None:
        reports["wasserstein"] = BoundReport(
            theorem, "wasserstein", {"E|Z|": ez, "min(1.1437*sqrt(lambda),lambda)": f_w},
            f_w * ez, lhs.get("wasserstein"), notes=notes)
    else:
        reports["wasserstein"] = BoundReport(
            theorem, "wasserstein", {"E|Z|": ez, "lambda": lam, "sum|q_i|": sum_q},
            lam * ez + sum_q, lhs.get("wasserstein"), notes=notes)
        if include_sharp:
            reports["wasserstein_sharp"] = BoundReport(
                theorem, "wasserstein_sharp",
                {"E|Z|": ez, "min(1.1437*sqrt(lambda),lambda)": f_w, "sum|q_i|": sum_q},
                f_w * ez + sum_q, lhs.get("wasserstein"), notes=notes)

    zero_terms = {"E|Z|": ez, f"{m}!/lambda^{m}": _factorial_over_power(m, lam)}
    zero_bound = zero_terms[f"{m}!/lambda^{m}"] * ez
    for k in range(m):
        wk = zero_weight(lam, k)
        ek = zt[f"E[|Z|1{{X-Z_-={k}}}]"]
        zero_terms[f"E[|Z|1{{X-Z_-={k}}}]"] = ek
        zero_terms[f"min(lambda/{k + 1},{k}!/lambda^{k})"] = wk
        zero_bound += wk * ek
    if q is not None:
        a, b = min(1.0, 1.0 / lam), min(1.0, 1.0 / lam**2)
        zero_terms.update({"|q_0|": q0, "sum_{i>=1}|q_i|": sum_q1,
                           "min(1,1/lambda)": a, "min(1,1/lambda^2)": b})
        zero_bound += a * q0 + b * sum_q1
    reports["zero"] = BoundReport(theorem, "zero", zero_terms, zero_bound, lhs.get("zero"),
                                  notes=notes)

    key = f"E[|Z|1{{X-Z_-<={v}}}]"
    cdf_terms = {"E|Z|": ez, f"(v+1)^2/lambda": (v + 1) ** 2 / lam, key: zt[key], "v": v}
    cdf_bound = (v + 1) ** 2 / lam * ez + zt[key]
    if q is not None:
        f_q = min(1.0, 1.0 / math.sqrt(lam))
        cdf_terms.update({"sum|q_i|": sum_q, "min(1,1/sqrt(lambda))": f_q})
        cdf_bound += f_q * sum_q
    reports["cdf"] = BoundReport(theorem, "cdf", cdf_terms, cdf_bound, lhs.get("cdf"),
                                 notes=notes)
    return reports


def bounds_exact(c: CouplingLaw, m: int, v: int) -> dict[str, BoundReport]:
    """Bounds for an exact size-bias coupling (``q == 0`` and ``lam == E[X]``).

    Returns reports keyed ``tv``, ``wasserstein``, ``zero`` and ``cdf``; each
    carries the exact left-hand side computed from the law of ``X``.

    Raises
    ------
    PreconditionError
        If ``lam`` differs from ``E[X]`` by more than ``1e-10``.
    NonZeroQError
        If the error sequence is not zero; use :func:`bounds_approximate`.
    """
    _check_m_v(m, v)
    if c.mode != "exact":
        raise CouplingError("bounds_exact needs an exact table; use estimate_coupling_terms")
    if abs(c.lam - c.mean_x()) > 1e-10:
        raise PreconditionError(f"lambda = {c.lam!r} but E[X] = {c.mean_x()!r}")
    q = q_sequence(c)
    if not q.is_zero(1e-10):
        raise NonZeroQError("q-sequence is not zero; call bounds_approximate instead")
    return _assemble(c, int(m), int(v), None, "exact_sizebias", True, False)


def bounds_approximate(c: CouplingLaw, m: int, v: int) -> dict[str, BoundReport]:
    """Bounds for a generalised coupling with error sequence ``q``.

    Reports are keyed ``tv``, ``wasserstein``, ``zero``, ``cdf`` and, when
    ``P(X + Z >= 0) = 1`` on the support, ``wasserstein_sharp``.
    """
    _check_m_v(m, v)
    q = q_sequence(c)
    if q.estimated:
        warnings.warn("sum |q_i| estimated from samples (biased upward, no certified tail)",
                      EstimateBiasWarning, stacklevel=2)
    sharp = bool(np.all(c.x + c.z >= 0))
    return _assemble(c, int(m), int(v), q, "approximate_sizebias", c.mode == "exact", sharp)


@dataclass(frozen=True)
class SignBounds:
    lower_applicable: bool
    upper_applicable: bool
    e_minus_lambda: float
    p_zero: float


def zero_prob_sign_bounds(c: CouplingLaw, tol: float = 1e-12) -> SignBounds:
    """One-sided comparisons of ``P(X = 0)`` with ``exp(-lam)``.

    The sign conditions on ``Z`` are exact; the sign conditions on ``q`` allow
    ``tol`` for floating-point noise in the table.
    """
    if c.mode != "exact":
        raise CouplingError("sign bounds need an exact table")
    q = q_sequence(c).values
    z_nonneg = bool(np.all(c.z >= 0))
    z_nonpos = bool(np.all(c.z <= 0))
    lower = z_nonneg and bool(np.all(q <= tol))
    upper = z_nonpos and bool(np.all(c.x + c.z >= 0)) and bool(np.all(q >= -tol))
    e = math.exp(-c.lam)
    p0 = c.expect((c.x == 0).astype(float))
    if lower and p0 < e - 1e-12:
        raise InternalConsistencyError(f"P(X=0) = {p0!r} < exp(-lambda) = {e!r}")
    if upper and p0 > e + 1e-12:
        raise InternalConsistencyError(f"P(X=0) = {p0!r} > exp(-lambda) = {e!r}")
    return SignBounds(lower, upper, e, p0)


@dataclass(frozen=True)
class CouplingTerms:
    """Monte Carlo estimates of coupling expectations with standard errors."""

    n: int
    estimates: dict
    stderr: dict

    def check_statistic(self) -> tuple[float, float]:
        """``E[Z] - (Var X - lam) / lam`` and its standard error."""
        return self.estimates["remark_statistic"], self.stderr["remark_statistic"]


def estimate_coupling_terms(x, z, lam: float, m: int, v: int) -> CouplingTerms:
    """Sample means (with ``sqrt(var / n)`` errors) of the coupling expectations.

    The check statistic uses the per-draw quantity
    ``Z - ((X - lam)^2 - lam) / lam`` whose mean is ``E[Z] - (Var X - lam)/lam``
    when ``lam = E[X]``; it should vanish for an exact size-bias coupling.
    """
    x = np.asarray(x, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    if x.shape != z.shape:
        raise CouplingError("x and z must have the same length")
    n = x.size
    if n < MIN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if not lam > 0:
        raise CouplingError("lambda must be positive")
    _check_m_v(m, v)
    abs_z = np.abs(z).astype(float)
    shifted = x - np.maximum(-z, 0)
    cols = {"E|Z|": abs_z, "E[Z]": z.astype(float)}
    for k in range(m):
        cols[f"E[|Z|1{{X-Z_-={k}}}]"] = abs_z * (shifted == k)
    cols[f"E[|Z|1{{X-Z_-<={v}}}]"] = abs_z * (shifted <= v)
    cols["remark_statistic"] = z - ((x - lam) ** 2 - lam) / lam
    est = {k: float(col.mean()) for k, col in cols.items()}
    se = {k: float(col.std(ddof=1) / math.sqrt(n)) for k, col in cols.items()}
    return CouplingTerms(n, est, se)


def sizebias_wald_test(s, s_prime, lam: float, kmax: int | None = None,
                       min_expected: float = 50.0) -> tuple[float, int, float]:
    """Test ``k P(S = k) = lam P(S' = k - 1)`` from paired draws of ``(S, S')``.

    Each draw contributes the vector ``Y_k = k 1{S = k} - lam 1{S' = k - 1}``
    for ``k = 1..K``; bins with little mass are merged into the last one.
    The Wald statistic ``n Ybar' Cov^+ Ybar`` is asymptotically chi-square
    with ``rank(Cov)`` degrees of freedom under the identity.

    Returns
    -------
    (statistic, degrees_of_freedom, p_value)
    """
    s = np.asarray(s, dtype=np.int64)
    sp = np.asarray(s_prime, dtype=np.int64)
    n = s.size
    if n < MIN_SAMPLES or sp.size != n:
        raise InsufficientDataError("need at least 100 paired draws")
    if kmax is None:
        counts = np.bincount(s, minlength=2)
        kmax = 1
        while kmax + 1 < counts.size and counts[kmax + 1] >= min_expected:
            kmax += 1
    ks = np.arange(1, kmax + 1)
    Y = np.zeros((n, kmax))
    for j, k in enumerate(ks):
        if k < kmax:
            Y[:, j] = k * (s == k) - lam * (sp == k - 1)
        else:
            Y[:, j] = s * (s >= k) - lam * (sp >= k - 1)
    mean = Y.mean(axis=0)
    cov = np.cov(Y, rowvar=False, ddof=1).reshape(kmax, kmax)
    pinv = np.linalg.pinv(cov, rcond=1e-10, hermitian=True)
    stat = float(n * mean @ pinv @ mean)
    df = int(np.linalg.matrix_rank(cov, tol=1e-10 * max(1.0, np.abs(cov).max())))
    pval = float(stats.chi2.sf(stat, max(df, 1)))
    return stat, df, pval
