"""Per-grid-point verdict rows shared by the simulation experiments."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

__all__ = ["CheckRow", "two_sided", "upper_only", "lower_only", "replicate"]

N_SIGMA = 3.0


@dataclass(frozen=True)
class CheckRow:
    """One comparison of an empirical quantity with its target.

    ``kind`` selects the verdict rule, with ``s = N_SIGMA * mc_error``:

    * ``"two_sided"``: ``|empirical - target| <= bound + s``
    * ``"upper"``: ``empirical - target <= bound + s``
    * ``"lower"``: ``empirical - target >= -(bound + s)``
    """

    check: str
    u: float
    empirical: float
    target: float
    bound: float
    mc_error: float
    kind: str = "two_sided"

    @property
    def passed(self) -> bool:
        allow = self.bound + N_SIGMA * self.mc_error + 1e-12
        diff = self.empirical - self.target
        if self.kind == "two_sided":
            return abs(diff) <= allow
        if self.kind == "upper":
            return diff <= allow
        if self.kind == "lower":
            return diff >= -allow
        raise ValueError(f"unknown kind {self.kind!r}")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d


def two_sided(check, u, empirical, target, bound, mc_error) -> CheckRow:
    return CheckRow(check, float(u), float(empirical), float(target), float(bound),
                    float(mc_error), "two_sided")


def upper_only(check, u, empirical, target, bound, mc_error) -> CheckRow:
    return CheckRow(check, float(u), float(empirical), float(target), float(bound),
                    float(mc_error), "upper")


def lower_only(check, u, empirical, target, bound, mc_error) -> CheckRow:
    return CheckRow(check, float(u), float(empirical), float(target), float(bound),
                    float(mc_error), "lower")


def replicate(fn: Callable[[int], object], reps: int,
              mapper: Callable[[Callable, Iterable], Iterable] | None = None) -> list:
    """``[fn(0), ..., fn(reps - 1)]`` through ``mapper`` (default: builtin map).

    Any order-preserving mapper works, such as ``ProcessPoolExecutor.map``;
    results are always returned in replication order.
    """
    m = map if mapper is None else mapper
    return list(m(fn, range(int(reps))))


def mean_and_se(values: Sequence[float]) -> tuple[float, float]:
    import numpy as np

    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()) if arr.size else math.nan, math.inf
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))
