"""Deterministic identity suites for the Stein machinery and the coupling bounds.

Each suite returns rows ``(suite, case, value, tolerance, pass)`` where
``pass`` means ``value <= tolerance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import CouplingLaw, bounds_approximate, bounds_exact, q_sequence
from .discrete_dist import IntegerPMF, discrepancy_vector
from .poisson_stein import magic_factors, pmf, stein_f_indicator_values
from .pointproc import SeedSpec, make_rng

__all__ = ["SelftestRow", "stein_residual_suite", "discrepancy_identity_suite",
           "bernoulli_bounds_suite", "run_all", "STEIN_LAMBDAS", "BERNOULLI_PS"]

STEIN_LAMBDAS = (0.1, 1.0, 10.0)
BERNOULLI_PS = tuple(round(0.05 * j, 2) for j in range(1, 11))


@dataclass(frozen=True)
class SelftestRow:
    suite: str
    case: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)

    def as_dict(self) -> dict:
        return {"suite": self.suite, "case": self.case, "value": self.value,
                "tolerance": self.tolerance, "pass": self.passed}


def _random_set(rng, top: int = 50) -> np.ndarray:
    size = int(rng.integers(1, top + 2))
    return np.sort(rng.choice(top + 1, size=size, replace=False))


def stein_residual_suite(seed: SeedSpec, n_sets: int = 50, imax: int = 200) -> list[SelftestRow]:
    """Residual of the Stein equation and the indicator magic factors.

    For each ``lam`` and ``n_sets`` random ``A subset {0..50}``: the largest
    residual over ``i <= imax``, and the largest excess of ``|f_A|`` and
    ``|Delta f_A|`` over ``min(1, 1/sqrt(lam))`` and ``min(1, 1/lam)``.
    """
    rows = []
    for lam in STEIN_LAMBDAS:
        rng = make_rng(seed.child("stein", lam))
        mf = magic_factors(lam)
        resid = excess_f = excess_df = -math.inf
        i = np.arange(imax + 1)
        for _ in range(n_sets):
            A = _random_set(rng)
            f = stein_f_indicator_values(lam, A, imax + 1)
            pA = float(np.sum(pmf(lam, A)))
            g = np.isin(i, A).astype(float) - pA
            r = lam * f[1:] - i * f[:-1] - g
            resid = max(resid, float(np.abs(r).max()))
            excess_f = max(excess_f, float(np.abs(f).max()) - mf.sup_f_A)
            excess_df = max(excess_df, float(np.abs(np.diff(f[1:])).max()) - mf.sup_delta_f_A)
        rows.append(SelftestRow("stein_residual", f"lambda={lam:g}", resid, 1e-10))
        rows.append(SelftestRow("magic_f_A", f"lambda={lam:g}", excess_f, 1e-12))
        rows.append(SelftestRow("magic_delta_f_A", f"lambda={lam:g}", excess_df, 1e-12))
    return rows


def discrepancy_identity_suite(seed: SeedSpec, n_laws: int = 100) -> list[SelftestRow]:
    """``sum_i f_A(i) D(i) = P(P_lam in A) - P(X in A)`` on random finite laws."""
    rng = make_rng(seed.child("discrepancy"))
    worst = 0.0
    for _ in range(n_laws):
        top = int(rng.integers(0, 30))
        w = rng.random(top + 1) ** 2
        law = IntegerPMF.from_dense(w / w.sum())
        lam = float(rng.uniform(0.1, 12.0))
        A = _random_set(rng, 40)
        D = discrepancy_vector(law, lam)
        f = stein_f_indicator_values(lam, A, D.values.size)
        lhs = float(np.dot(f[1:], D.values))
        rhs = float(np.sum(pmf(lam, A))) - law.prob_of_set(A)
        worst = max(worst, abs(lhs - rhs))
    return [SelftestRow("discrepancy_identity", f"{n_laws} laws", worst, 1e-10)]


def _bernoulli(p: float, exact: bool) -> CouplingLaw:
    z1 = -1 if exact else 0
    return CouplingLaw.from_table({(0, 0): 1.0 - p, (1, z1): p}, p)


def bernoulli_bounds_suite(m: int = 2, v: int = 1) -> list[SelftestRow]:
    """Exact distances against the reported bounds for Bernoulli couplings.

    ``Z = -X`` is an exact size-bias coupling; ``Z = 0`` is the approximate
    one. Each row's value is ``lhs - bound`` (non-positive when the bound
    holds); the q rows hold ``max |q_i|`` of the exact coupling.
    """
    rows = []
    for p in BERNOULLI_PS:
        for exact in (True, False):
            c = _bernoulli(p, exact)
            reps = bounds_exact(c, m, v) if exact else bounds_approximate(c, m, v)
            tag = "exact" if exact else "approximate"
            for key, rep in reps.items():
                rows.append(SelftestRow(f"bernoulli_{tag}", f"p={p:g} {key}",
                                        rep.exact_lhs - rep.bound, rep.slack))
            if exact:
                q = q_sequence(c)
                rows.append(SelftestRow("bernoulli_q_zero", f"p={p:g}",
                                        float(np.abs(q.values).max(initial=0.0)), 1e-12))
    return rows


def run_all(seed: SeedSpec) -> list[SelftestRow]:
    return stein_residual_suite(seed) + discrepancy_identity_suite(seed) + bernoulli_bounds_suite()
