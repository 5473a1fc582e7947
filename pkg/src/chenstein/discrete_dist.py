"""Finite integer laws, distances to Poisson targets, and the Stein discrepancy."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Union

import numpy as np

from .poisson_stein import (
    IntervalSet,
    PoissonLaw,
    _normalize_set,
    cdf as poisson_cdf,
    pmf as poisson_pmf,
    poisson_tail_index,
    sf as poisson_sf,
    stein_f_indicator_values,
    stein_f_lipschitz_values,
)

__all__ = [
    "PMFValidationError",
    "IntegerPMF",
    "DiscrepancyVector",
    "empirical_pmf",
    "discrepancy_vector",
    "tv_distance",
    "wasserstein_distance",
    "kolmogorov_distance",
    "stein_discrepancy",
    "truncated_poisson",
]

MASS_TOL = 1e-12
#: Truncation tolerance for Poisson targets; far below the declared 1e-12 budget.
TARGET_TAIL = 1e-17


class PMFValidationError(ValueError):
    """Raised for malformed probability mass functions."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class IntegerPMF:
    """Probability mass function with finite support in the non-negative integers.

    Parameters
    ----------
    support : array_like of int
        Strictly ascending, non-negative.
    mass : array_like of float
        Non-negative, summing to one within ``1e-12``.
    origin : {"exact", "empirical"}
    sample_count : int, optional
        Number of samples behind an empirical law.
    """

    support: np.ndarray
    mass: np.ndarray
    origin: str = "exact"
    sample_count: int | None = None

    def __post_init__(self):
        sup = np.asarray(self.support)
        mass = np.asarray(self.mass, dtype=float)
        if sup.ndim != 1 or mass.ndim != 1 or sup.shape != mass.shape:
            raise PMFValidationError("support and mass must be 1-d arrays of equal length")
        if sup.size == 0:
            raise PMFValidationError("empty support")
        if not np.all(np.equal(np.mod(sup, 1), 0)):
            raise PMFValidationError("support must be integer valued")
        sup = sup.astype(np.int64)
        if sup[0] < 0:
            raise PMFValidationError("support must be non-negative")
        if np.any(np.diff(sup) <= 0):
            raise PMFValidationError("support must be strictly ascending")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise PMFValidationError("masses must be finite and non-negative")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise PMFValidationError(f"masses sum to {mass.sum()!r}, not 1")
        if self.origin not in ("exact", "empirical"):
            raise PMFValidationError(f"unknown origin {self.origin!r}")
        if self.origin == "empirical" and not self.sample_count:
            raise PMFValidationError("empirical laws need a positive sample_count")
        object.__setattr__(self, "support", _frozen(sup))
        object.__setattr__(self, "mass", _frozen(mass))

    @classmethod
    def from_mapping(cls, probs: Mapping[int, float], origin: str = "exact",
                     sample_count: int | None = None) -> "IntegerPMF":
        keys = sorted(probs)
        return cls(np.array(keys, dtype=np.int64), np.array([probs[k] for k in keys]),
                   origin, sample_count)

    @classmethod
    def from_dense(cls, mass: Iterable[float], drop_zeros: bool = True) -> "IntegerPMF":
        """Build from masses indexed by ``0, 1, 2, ...``."""
        mass = np.asarray(list(mass) if not isinstance(mass, np.ndarray) else mass, dtype=float)
        idx = np.arange(mass.size)
        if drop_zeros:
            keep = mass > 0
            if not keep.any():
                raise PMFValidationError("all masses are zero")
            idx, mass = idx[keep], mass[keep]
        return cls(idx, mass)

    @classmethod
    def point_mass(cls, k: int) -> "IntegerPMF":
        return cls(np.array([k]), np.array([1.0]))

    @property
    def max_value(self) -> int:
        return int(self.support[-1])

    def dense(self, upto: int | None = None) -> np.ndarray:
        """Masses on ``0..upto`` (default the largest support point)."""
        n = self.max_value if upto is None else int(upto)
        out = np.zeros(max(n, self.max_value) + 1)
        out[self.support] = self.mass
        return out[: n + 1]

    def prob(self, k: int) -> float:
        pos = np.searchsorted(self.support, k)
        if pos < self.support.size and self.support[pos] == k:
            return float(self.mass[pos])
        return 0.0

    def cdf(self, v) -> np.ndarray | float:
        v_arr = np.asarray(v)
        cum = np.concatenate([[0.0], np.cumsum(self.mass)])
        out = np.minimum(cum[np.searchsorted(self.support, v_arr, side="right")], 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        return float(np.dot(self.support, self.mass))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot((self.support - mu) ** 2, self.mass))

    def prob_of_set(self, A) -> float:
        Aset = _normalize_set(A)
        if isinstance(Aset, IntervalSet):
            hi = self.max_value if Aset.hi is None else Aset.hi
            sel = (self.support >= Aset.lo) & (self.support <= hi)
        else:
            sel = np.isin(self.support, Aset)
        return float(self.mass[sel].sum())

    def stderr(self) -> np.ndarray:
        """Per-bin standard errors ``sqrt(p (1 - p) / n)``; zeros for exact laws."""
        if self.origin != "empirical":
            return np.zeros_like(self.mass)
        return np.sqrt(self.mass * (1.0 - self.mass) / self.sample_count)

    def cdf_stderr(self, v) -> np.ndarray | float:
        """Standard error of the empirical distribution function at ``v``."""
        if self.origin != "empirical":
            return 0.0 * np.asarray(v, dtype=float)
        F = np.asarray(self.cdf(v))
        out = np.sqrt(F * (1.0 - F) / self.sample_count)
        return float(out) if np.ndim(out) == 0 else out

    def to_csv(self, path: str | Path | None = None) -> str:
        """Two-column ``value,probability`` CSV; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "probability"])
        for k, p in zip(self.support, self.mass):
            w.writerow([int(k), f"{p:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path) -> "IntegerPMF":
        """Read the format written by :meth:`to_csv` (path or CSV text)."""
        text = source
        if isinstance(source, Path) or ("\n" not in str(source) and Path(str(source)).exists()):
            text = Path(source).read_text()
        rows = list(csv.reader(io.StringIO(str(text))))
        if not rows or rows[0] != ["value", "probability"]:
            raise PMFValidationError("expected header 'value,probability'")
        sup = [int(r[0]) for r in rows[1:]]
        mass = [float(r[1]) for r in rows[1:]]
        return cls(np.array(sup), np.array(mass))

    def __eq__(self, other):
        if not isinstance(other, IntegerPMF):
            return NotImplemented
        return (np.array_equal(self.support, other.support)
                and np.array_equal(self.mass, other.mass)
                and self.origin == other.origin
                and self.sample_count == other.sample_count)

    def __hash__(self):
        return hash((self.support.tobytes(), self.mass.tobytes(), self.origin))


def empirical_pmf(samples: Iterable[int]) -> IntegerPMF:
    """Relative-frequency law of integer samples.

    Examples
    --------
    >>> empirical_pmf([0, 0, 1, 1]).mass.tolist()
    [0.5, 0.5]
    """
    arr = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples)
    if arr.size == 0:
        raise PMFValidationError("cannot build an empirical law from no samples")
    if not np.all(np.equal(np.mod(arr, 1), 0)) or arr.min() < 0:
        raise PMFValidationError("samples must be non-negative integers")
    vals, counts = np.unique(arr.astype(np.int64), return_counts=True)
    n = int(arr.size)
    return IntegerPMF(vals, counts / n, origin="empirical", sample_count=n)


def truncated_poisson(lam: float, tail: float = 1e-14) -> IntegerPMF:
    """Poisson law cut where the tail is below ``tail``, renormalised."""
    n = poisson_tail_index(lam, tail)
    mass = poisson_pmf(lam, np.arange(n + 1))
    return IntegerPMF(np.arange(n + 1), mass / mass.sum())


Law = Union[IntegerPMF, PoissonLaw]


def _common_grid(p: Law, q: Law) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Dense masses of both laws on a shared grid plus omitted tail masses.

    Returns ``(pm, qm, tail_p, tail_q)`` where the tails are Poisson masses
    beyond the grid (zero for finite laws). The grid end is chosen so that
    ``lam * P(P >= N)`` is below ``1e-17`` for every Poisson law involved.
    """
    n = 0
    for law in (p, q):
        if isinstance(law, IntegerPMF):
            n = max(n, law.max_value)
        elif isinstance(law, PoissonLaw):
            n = max(n, poisson_tail_index(law.lam, TARGET_TAIL, weight_mean=True))
        else:
            raise PMFValidationError(f"unsupported law type {type(law).__name__}")
    dense = []
    tails = []
    for law in (p, q):
        if isinstance(law, IntegerPMF):
            dense.append(law.dense(n))
            tails.append(0.0)
        else:
            dense.append(poisson_pmf(law.lam, np.arange(n + 1)))
            tails.append(poisson_sf(law.lam, n))
    return dense[0], dense[1], tails[0], tails[1]


def tv_distance(p: Law, q: Law) -> float:
    """Total variation distance ``(1/2) sum_k |p_k - q_k|``.

    Examples
    --------
    >>> round(tv_distance(IntegerPMF.from_mapping({0: 0.7, 1: 0.3}), PoissonLaw(0.3)), 7)
    0.0777545
    """
    pm, qm, tp, tq = _common_grid(p, q)
    return float(0.5 * np.abs(pm - qm).sum() + 0.5 * abs(tp - tq))


def _cdf_gap(p: Law, q: Law) -> np.ndarray:
    pm, qm, _, _ = _common_grid(p, q)
    return np.cumsum(pm) - np.cumsum(qm)


def wasserstein_distance(p: Law, q: Law) -> float:
    """Wasserstein distance ``sum_v |F_p(v) - F_q(v)|`` on the integers.

    The CDF gap beyond the grid is bounded by ``E[(P - N)_+]`` which the grid
    choice keeps below ``1e-17``.
    """
    return float(np.abs(_cdf_gap(p, q)).sum())


def kolmogorov_distance(p: Law, q: Law) -> float:
    """Kolmogorov distance ``max_v |F_p(v) - F_q(v)|``."""
    pm, qm, tp, tq = _common_grid(p, q)
    gap = np.abs(np.cumsum(pm) - np.cumsum(qm))
    return float(max(gap.max(), abs(tp - tq)))


@dataclass(frozen=True, eq=False)
class DiscrepancyVector:
    """``D(i) = i P(X = i) - lam P(X = i - 1)`` for ``i = 1 .. max(support) + 1``.

    ``values[j]`` holds ``D(j + 1)``; beyond the stored range ``D`` vanishes.
    """

    lam: float
    values: np.ndarray

    def __call__(self, i: int) -> float:
        if i < 1:
            raise ValueError("D is defined for i >= 1")
        return float(self.values[i - 1]) if i - 1 < self.values.size else 0.0

    def total(self) -> float:
        """``sum_i D(i)``, which telescopes to ``E[X] - lam``."""
        return float(self.values.sum())


def discrepancy_vector(p: IntegerPMF, lam: float) -> DiscrepancyVector:
    PoissonLaw(lam)
    dense = p.dense(p.max_value + 1)
    i = np.arange(1, p.max_value + 2)
    values = i * dense[i] - lam * dense[i - 1]
    return DiscrepancyVector(float(lam), _frozen(values))


def stein_discrepancy(p: IntegerPMF, lam: float, target) -> float:
    """``sum_{i >= 1} f(i) D(i)`` for the Stein solution ``f`` of ``target``.

    ``target`` is either a set description (finite iterable or
    :class:`~chenstein.poisson_stein.IntervalSet`) or a callable with
    Lipschitz constant at most one. The result equals
    ``P(P_lam in A) - P(X in A)`` or ``E g(P_lam) - E g(X)`` respectively.
    """
    if not isinstance(p, IntegerPMF):
        raise PMFValidationError("stein_discrepancy needs an IntegerPMF")
    D = discrepancy_vector(p, lam)
    imax = p.max_value + 1
    if callable(target):
        f = stein_f_lipschitz_values(lam, target, imax)
    elif isinstance(target, (IntervalSet, set, frozenset, list, tuple, range, np.ndarray)):
        f = stein_f_indicator_values(lam, target, imax)
    else:
        raise ValueError("target must be a set of non-negative integers or a Lip(1) callable")
    return float(np.dot(f[1:], D.values))
