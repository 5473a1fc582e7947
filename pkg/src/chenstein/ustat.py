"""Indicator U-statistics of binomial and Poisson point processes.

For a symmetric kernel ``h`` of arity ``l`` taking values in ``{0, 1}``,
``S`` counts the unordered ``l``-subsets of the pattern on which ``h = 1``.
This module evaluates ``S``, estimates the mean ``lam`` and the second
moment functional ``r``, builds the size-bias constructions and assembles
the Poisson approximation bounds for both input processes.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .coupling import BOUND_SLACK, BoundReport, zero_weight
from .discrete_dist import IntegerPMF, kolmogorov_distance, tv_distance
from .poisson_stein import WASSERSTEIN_CONSTANT, PoissonLaw
from .poisson_stein import cdf as poisson_cdf
from .pointproc import Box, PointPattern, make_rng, sample_poisson

__all__ = [
    "KernelError",
    "EfficiencyError",
    "DegenerateKernelWarning",
    "Kernel",
    "UStatSpec",
    "LambdaR",
    "eval_ustat",
    "lambda_r_binomial",
    "lambda_r_poisson",
    "bounds_ustat_binomial",
    "bounds_ustat_poisson",
    "sample_sizebias_poisson",
    "sample_sizebias_binomial",
    "exact_binomial_sizebias",
    "distance_kernel",
    "region_kernel",
    "constant_kernel",
]

PROPOSAL_CAP = 1_000_000


class KernelError(ValueError):
    """Raised for kernels that are not symmetric or not {0,1} valued."""


class EfficiencyError(RuntimeError):
    """Raised when rejection sampling of the biased tuple exceeds its cap."""


class DegenerateKernelWarning(UserWarning):
    """Monte Carlo saw no tuple with ``h = 1``."""


@dataclass(frozen=True)
class Kernel:
    """Symmetric indicator kernel.

    Parameters
    ----------
    arity : int
        Number of arguments ``l``.
    dim : int
        Dimension of each argument.
    evaluate : callable
        Maps an array of shape ``(M, l, dim)`` to ``M`` values in ``{0, 1}``.
    proposal : callable, optional
        ``proposal(rng, box, size)`` returning candidate tuples of shape
        ``(size, l, dim)``. Candidates are still accepted only when ``h = 1``.
        Defaults to uniform tuples on the box.
    name : str
    """

    arity: int
    dim: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    proposal: Callable | None = None
    name: str = "kernel"

    def __post_init__(self):
        if self.arity < 1 or self.dim < 1:
            raise KernelError("arity and dimension must be positive")

    def __call__(self, tuples: np.ndarray) -> np.ndarray:
        tuples = np.asarray(tuples, dtype=float)
        if tuples.ndim != 3 or tuples.shape[1:] != (self.arity, self.dim):
            raise KernelError(f"expected tuples of shape (M, {self.arity}, {self.dim})")
        vals = np.asarray(self.evaluate(tuples))
        if vals.shape != (tuples.shape[0],):
            raise KernelError("kernel must return one value per tuple")
        if not np.all((vals == 0) | (vals == 1)):
            raise KernelError("kernel values must lie in {0, 1}")
        return vals.astype(np.int64)

    def check_symmetry(self, box: Box, n_tuples: int = 1000, seed: int = 0) -> None:
        """Compare values on random uniform tuples under random permutations."""
        if self.arity == 1:
            return
        rng = np.random.default_rng(seed)
        tuples = _uniform_tuples(rng, box, n_tuples, self.arity)
        vals = self(tuples)
        perm = np.argsort(rng.random((n_tuples, self.arity)), axis=1)
        shuffled = np.take_along_axis(tuples, perm[:, :, None], axis=1)
        if not np.array_equal(vals, self(shuffled)):
            raise KernelError(f"kernel {self.name!r} is not symmetric")


def _uniform_tuples(rng, box: Box, size: int, arity: int) -> np.ndarray:
    lo = np.asarray(box.lower)
    return lo + box.sides * rng.random((size, arity, box.d))


def distance_kernel(delta: float, dim: int = 1) -> Kernel:
    """``h(x, y) = 1{||x - y|| <= delta}``."""
    def evaluate(t):
        return (np.linalg.norm(t[:, 0, :] - t[:, 1, :], axis=1) <= delta).astype(np.int64)
    return Kernel(2, dim, evaluate, name=f"distance<={delta}")


def region_kernel(lower: Sequence[float], upper: Sequence[float]) -> Kernel:
    """Arity-one kernel ``h(x) = 1{x in [lower, upper]}``."""
    lo, hi = np.asarray(lower, float), np.asarray(upper, float)

    def evaluate(t):
        return np.all((t[:, 0, :] >= lo) & (t[:, 0, :] <= hi), axis=1).astype(np.int64)
    return Kernel(1, lo.size, evaluate, name="region")


def constant_kernel(arity: int, dim: int = 1, value: int = 1) -> Kernel:
    return Kernel(arity, dim, lambda t: np.full(t.shape[0], value, dtype=np.int64),
                  name=f"constant{value}")


def _subset_index(n: int, arity: int) -> np.ndarray:
    if arity == 1:
        return np.arange(n).reshape(-1, 1)
    if arity == 2:
        i, j = np.triu_indices(n, k=1)
        return np.stack([i, j], axis=1)
    return np.array(list(itertools.combinations(range(n), arity)), dtype=np.int64).reshape(-1, arity)


def eval_ustat(pattern: PointPattern | np.ndarray, kernel: Kernel, check_symmetry: bool = True,
               chunk: int = 200_000) -> int:
    """Number of unordered ``l``-subsets of the pattern with ``h = 1``.

    Examples
    --------
    >>> pts = np.array([[0.0], [0.05], [0.5]])
    >>> eval_ustat(pts, distance_kernel(0.1))
    1
    """
    pts = pattern.points if isinstance(pattern, PointPattern) else np.asarray(pattern, float)
    pts = pts.reshape(-1, kernel.dim)
    if isinstance(pattern, PointPattern) and pattern.d != kernel.dim:
        raise KernelError("pattern and kernel dimensions differ")
    n = pts.shape[0]
    if n < kernel.arity:
        return 0
    idx = _subset_index(n, kernel.arity)
    if check_symmetry and kernel.arity > 1:
        sample = pts[idx[:1000]]
        rev = sample[:, ::-1, :]
        if not np.array_equal(kernel(sample), kernel(rev)):
            raise KernelError(f"kernel {kernel.name!r} is not symmetric")
    total = 0
    for start in range(0, idx.shape[0], chunk):
        total += int(kernel(pts[idx[start:start + chunk]]).sum())
    return total


@dataclass(frozen=True)
class LambdaR:
    """Mean ``lam`` and functional ``r`` with Monte Carlo standard errors."""

    lam: float
    r: float
    lam_se: float = 0.0
    r_se: float = 0.0
    method: str = "closed-form"


@dataclass(frozen=True)
class UStatSpec:
    """A U-statistic problem: kernel, input process and its ``lam`` and ``r``.

    ``process`` is ``"binomial"`` (``size`` = number of points ``n``) or
    ``"poisson"`` (``size`` = intensity ``t``).
    """

    kernel: Kernel
    process: str
    size: float
    box: Box
    lam: float
    r: float
    lam_se: float = 0.0
    r_se: float = 0.0
    method: str = "closed-form"

    def __post_init__(self):
        if self.process not in ("binomial", "poisson"):
            raise ValueError("process must be 'binomial' or 'poisson'")
        if self.lam < 0 or self.r < 0:
            raise ValueError("lambda and r must be non-negative")
        if self.kernel.arity == 1 and self.r != 0:
            raise ValueError("r must be 0 for arity-one kernels")

    @classmethod
    def build(cls, kernel: Kernel, process: str, size: float, box: Box, lr: LambdaR) -> "UStatSpec":
        return cls(kernel, process, size, box, lr.lam, lr.r, lr.lam_se, lr.r_se, lr.method)


def _falling(n: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= n - j
    return out


def _mc_moments(kernel: Kernel, box: Box, reps: int, seed, arity: int):
    """Monte Carlo ``E[h(U)]`` and, per overlap ``i``, ``E[h(X, Y) h(X, Y')]``."""
    rng = make_rng(seed) if not isinstance(seed, (int, np.integer)) else np.random.default_rng(seed)
    vals = kernel(_uniform_tuples(rng, box, reps, arity)).astype(float)
    p_hat, p_se = vals.mean(), vals.std(ddof=1) / math.sqrt(reps)
    overlaps = []
    for i in range(1, arity):
        shared = _uniform_tuples(rng, box, reps, i)
        y1 = _uniform_tuples(rng, box, reps, arity - i)
        y2 = _uniform_tuples(rng, box, reps, arity - i)
        prod = (kernel(np.concatenate([shared, y1], axis=1))
                * kernel(np.concatenate([shared, y2], axis=1))).astype(float)
        overlaps.append((prod.mean(), prod.std(ddof=1) / math.sqrt(reps)))
    if p_hat == 0:
        warnings.warn("no tuple with h = 1 was sampled; lambda estimate is 0",
                      DegenerateKernelWarning, stacklevel=3)
    return p_hat, p_se, overlaps


def lambda_r_binomial(kernel: Kernel, n: int, box: Box, closed_form: LambdaR | None = None,
                      reps: int = 100_000, seed=0) -> LambdaR:
    """``lam = (n)_l / l! E h`` and ``r = max_i (n)_{2l-i} E[h h']`` for uniform points.

    ``E[h h']`` is the expectation of ``h`` at two tuples sharing ``i``
    uniform points, which equals the inner-squared integral of the theorem.
    With ``closed_form`` the supplied values are returned unchanged.
    """
    l = kernel.arity
    if n < l:
        raise ValueError(f"need n >= arity ({n} < {l})")
    if closed_form is not None:
        return closed_form
    p_hat, p_se, overlaps = _mc_moments(kernel, box, reps, seed, l)
    scale = _falling(n, l) / math.factorial(l)
    r, r_se = 0.0, 0.0
    for i, (m, se) in enumerate(overlaps, start=1):
        f = _falling(n, 2 * l - i)
        if f * m >= r:
            r, r_se = f * m, f * se
    return LambdaR(float(scale * p_hat), float(r), float(scale * p_se), float(r_se),
                   f"monte-carlo({reps})")


def lambda_r_poisson(kernel: Kernel, t: float, box: Box, closed_form: LambdaR | None = None,
                     reps: int = 100_000, seed=0) -> LambdaR:
    """``lam = (t vol)^l / l! E h`` and ``r = max_i (t vol)^{2l-i} E[h h']``."""
    if not t > 0:
        raise ValueError("t must be positive")
    if closed_form is not None:
        return closed_form
    l = kernel.arity
    mass = t * box.volume
    p_hat, p_se, overlaps = _mc_moments(kernel, box, reps, seed, l)
    scale = mass**l / math.factorial(l)
    r, r_se = 0.0, 0.0
    for i, (m, se) in enumerate(overlaps, start=1):
        f = mass ** (2 * l - i)
        if f * m >= r:
            r, r_se = f * m, f * se
    return LambdaR(float(scale * p_hat), float(r), float(scale * p_se), float(r_se),
                   f"monte-carlo({reps})")


def _binomial_se(p: float, n: int) -> float:
    """``sqrt(p (1 - p) / n)`` with ``p (1 - p)`` floored at ``1 / n``.

    The floor keeps a zero-count estimate from claiming zero error; three of
    these standard errors is the rule-of-three bound ``3 / n``.
    """
    return math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)


def _law_cdf_upper(law: IntegerPMF, k: int, n_se: float = 3.0) -> float:
    """``P(S <= k)`` shifted up by ``n_se`` standard errors (capped at one)."""
    F = float(law.cdf(k))
    if law.origin != "empirical":
        return F
    return min(1.0, F + n_se * _binomial_se(F, law.sample_count))


def _lhs_reports(law: IntegerPMF | None, lam: float, v: int):
    if law is None:
        return {}, {}
    target = PoissonLaw(lam)
    lhs = {
        "tv": tv_distance(law, target),
        "zero": law.prob(0) - math.exp(-lam),
        "cdf": abs(float(law.cdf(v)) - poisson_cdf(lam, v)),
        "kolmogorov": kolmogorov_distance(law, target),
    }
    slack = {}
    if law.origin == "empirical":
        n = law.sample_count
        # TV of an empirical law is biased upward; half the summed per-bin
        # errors is a conservative 1-sigma scale.
        slack["tv"] = 3.0 * 0.5 * float(np.sqrt(law.mass * (1 - law.mass) / n).sum())
        p0 = law.prob(0)
        slack["zero"] = 3.0 * _binomial_se(p0, n)
        slack["cdf"] = 3.0 * _binomial_se(float(law.cdf(v)), n)
    return lhs, slack


def bounds_ustat_binomial(spec: UStatSpec, stilde_law: IntegerPMF, m: int, v: int,
                          s_law: IntegerPMF | None = None) -> dict[str, BoundReport]:
    """Bounds for a U-statistic of ``n >= 2l`` i.i.d. points.

    ``stilde_law`` is the (exact or empirical) law of the same statistic on
    ``n - 2l`` points; empirical probabilities enter shifted up by three
    standard errors, and ``r`` enters as ``r + 3 r_se``.
    """
    if spec.process != "binomial":
        raise ValueError("spec must describe a binomial input")
    l, n, lam = spec.kernel.arity, int(spec.size), spec.lam
    if n < 2 * l:
        raise ValueError(f"precondition n >= 2l violated ({n} < {2 * l})")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    r_used = spec.r + 3.0 * spec.r_se
    factor = 2**l * r_used / (math.factorial(l) * lam) + 2 * l**2 * lam / n
    base_terms = {"lambda": lam, "r": spec.r, "r_se": spec.r_se, "r_used": r_used,
                  "n": n, "l": l, "factor": factor}
    lhs, slack = _lhs_reports(s_law, lam, v)
    reports = {}
    f_tv = min(1.0, lam)
    reports["tv"] = BoundReport("ustat_binomial", "tv", {**base_terms, "min(1,lambda)": f_tv},
                                f_tv * factor, lhs.get("tv"), BOUND_SLACK + slack.get("tv", 0.0))
    f_w = min(WASSERSTEIN_CONSTANT * math.sqrt(lam), lam)
    reports["wasserstein"] = BoundReport(
        "ustat_binomial", "wasserstein", {**base_terms, "min(1.1437*sqrt(lambda),lambda)": f_w},
        f_w * factor, None)
    bracket = math.exp(min(float(gammaln(m + 1)) - m * math.log(lam), 700.0))
    zterms = dict(base_terms)
    for k in range(m):
        pk = _law_cdf_upper(stilde_law, k)
        zterms[f"P(S~<={k})"] = pk
        bracket += zero_weight(lam, k) * pk
    zero_lhs = abs(lhs["zero"]) if "zero" in lhs else None
    reports["zero"] = BoundReport("ustat_binomial", "zero", {**zterms, "bracket": bracket},
                                  bracket * factor, zero_lhs, BOUND_SLACK + slack.get("zero", 0.0))
    pv = _law_cdf_upper(stilde_law, v)
    cdf_bracket = (v + 1) ** 2 / lam + pv
    reports["cdf"] = BoundReport("ustat_binomial", "cdf",
                                 {**base_terms, f"P(S~<={v})": pv, "bracket": cdf_bracket, "v": v},
                                 cdf_bracket * factor, lhs.get("cdf"),
                                 BOUND_SLACK + slack.get("cdf", 0.0))
    return reports



def bounds_ustat_poisson(spec: UStatSpec, s_law: IntegerPMF, m: int, v: int) -> dict[str, BoundReport]:
    """Bounds for a U-statistic of a Poisson process.

    ``s_law`` is the exact or empirical law of ``S``; it feeds the brackets
    of the zero and CDF bounds and, when empirical, the left-hand sides with
    three-standard-error slack. The ``zero`` report checks the upper side
    ``P(S = 0) - exp(-lam) <= bound``; ``zero_lower`` checks that the same
    difference is non-negative.
    """
    if spec.process != "poisson":
        raise ValueError("spec must describe a Poisson input")
    l, lam = spec.kernel.arity, spec.lam
    if not lam > 0:
        raise ValueError("lambda must be positive")
    r_used = spec.r + 3.0 * spec.r_se
    base = 2**l * r_used / math.factorial(l)
    base_terms = {"lambda": lam, "r": spec.r, "r_se": spec.r_se, "r_used": r_used, "l": l,
                  "2^l r/l!": base}
    lhs, slack = _lhs_reports(s_law, lam, v)
    reports = {}
    f_tv = min(1.0, 1.0 / lam)
    reports["tv"] = BoundReport("ustat_poisson", "tv", {**base_terms, "min(1,1/lambda)": f_tv},
                                f_tv * base, lhs.get("tv"), BOUND_SLACK + slack.get("tv", 0.0))
    f_w = min(1.0, WASSERSTEIN_CONSTANT / math.sqrt(lam))
    reports["wasserstein"] = BoundReport(
        "ustat_poisson", "wasserstein", {**base_terms, "min(1,1.1437/sqrt(lambda))": f_w},
        f_w * base, None)
    bracket = math.exp(min(float(gammaln(m + 1)) - (m + 1) * math.log(lam), 700.0))
    zterms = dict(base_terms)
    for k in range(m):
        pk = _law_cdf_upper(s_law, k)
        wk = min(1.0 / (k + 1), math.exp(min(float(gammaln(k + 1)) - (k + 1) * math.log(lam), 700.0)))
        zterms[f"P(S<={k})"] = pk
        bracket += wk * pk
    reports["zero"] = BoundReport("ustat_poisson", "zero", {**zterms, "bracket": bracket},
                                  bracket * base, lhs.get("zero"),
                                  BOUND_SLACK + slack.get("zero", 0.0))
    if "zero" in lhs:
        reports["zero_lower"] = BoundReport(
            "ustat_poisson", "zero_lower", {"exp(-lambda)": math.exp(-lam)}, 0.0,
            -lhs["zero"], BOUND_SLACK + slack.get("zero", 0.0))
    pv = _law_cdf_upper(s_law, v)
    cdf_bracket = (v + 1) ** 2 / lam + pv
    reports["cdf"] = BoundReport("ustat_poisson", "cdf",
                                 {**base_terms, f"P(S<={v})": pv, "bracket": cdf_bracket, "v": v},
                                 cdf_bracket * base / lam, lhs.get("cdf"),
                                 BOUND_SLACK + slack.get("cdf", 0.0))
    return reports


def _draw_biased_tuple(kernel: Kernel, box: Box, rng, cap: int = PROPOSAL_CAP) -> np.ndarray:
    """One tuple from the density proportional to ``h`` by rejection."""
    proposed = 0
    batch = 256
    while proposed < cap:
        size = min(batch, cap - proposed)
        if kernel.proposal is not None:
            cand = np.asarray(kernel.proposal(rng, box, size), dtype=float)
        else:
            cand = _uniform_tuples(rng, box, size, kernel.arity)
        hits = np.nonzero(kernel(cand))[0]
        proposed += size
        if hits.size:
            return cand[hits[0]]
        batch = min(batch * 4, 65536)
    raise EfficiencyError(f"no accepted tuple after {cap} proposals")


def sample_sizebias_poisson(kernel: Kernel, t: float, box: Box, seed,
                            lam: float | None = None) -> tuple[int, int]:
    """One draw of ``(S, S')`` for a Poisson input.

    ``S`` is the statistic of the process ``eta``; ``chi`` is a tuple drawn
    independently from the density proportional to ``h`` and
    ``S' = S(eta + chi) - h(chi) = S(eta + chi) - 1``. Then
    ``k P(S = k) = lam P(S' = k - 1)``.
    """
    if lam is not None and not lam > 0:
        raise ValueError("lambda must be positive for the size-bias construction")
    rng = make_rng(seed)
    eta = sample_poisson(box, t, rng)
    s = eval_ustat(eta, kernel, check_symmetry=False)
    chi = _draw_biased_tuple(kernel, box, rng)
    union = np.concatenate([eta.points, chi], axis=0)
    s_prime = eval_ustat(union, kernel, check_symmetry=False) - 1
    return s, s_prime


def sample_sizebias_binomial(kernel: Kernel, n: int, box: Box, seed) -> tuple[int, int, int]:
    """One draw of ``(S, S', S~)`` for ``n`` i.i.d. uniform points.

    ``S'`` is the statistic on ``n - l`` uniform points plus a biased tuple,
    minus one; ``S~`` is the statistic on ``n - 2l`` points.
    """
    l = kernel.arity
    if n < 2 * l:
        raise ValueError(f"precondition n >= 2l violated ({n} < {2 * l})")
    rng = make_rng(seed)
    pts = _uniform_tuples(rng, box, n, 1)[:, 0, :]
    s = eval_ustat(pts, kernel, check_symmetry=False)
    chi = _draw_biased_tuple(kernel, box, rng)
    s_prime = eval_ustat(np.concatenate([pts[: n - l], chi]), kernel, check_symmetry=False) - 1
    s_tilde = eval_ustat(pts[: n - 2 * l], kernel, check_symmetry=False)
    return s, s_prime, s_tilde


@dataclass(frozen=True)
class ExactBinomialLaws:
    """Exact laws of ``S``, ``S'`` and ``S~`` on a finite point space."""

    s: IntegerPMF
    s_prime: IntegerPMF
    s_tilde: IntegerPMF
    lam: float
    r: float


def exact_binomial_sizebias(weights: Sequence[float], h: Callable[[tuple], int], n: int,
                            arity: int) -> ExactBinomialLaws:
    """Enumerate ``K^n`` for a finite space with atom weights ``K``.

    ``h`` takes a tuple of atom indices and returns 0 or 1. Points of a
    binomial process may coincide on a finite space; tuples are indexed by
    distinct positions, not distinct values.
    """
    w = np.asarray(weights, dtype=float)
    if abs(w.sum() - 1) > 1e-12 or np.any(w < 0):
        raise ValueError("weights must form a probability vector")
    a = w.size
    l = arity
    if n < 2 * l:
        raise ValueError("need n >= 2l")
    subsets = {m: list(itertools.combinations(range(m), l)) for m in (n, n - l, n - 2 * l)}

    def stat(cfg: tuple) -> int:
        return sum(int(h(tuple(cfg[j] for j in sub))) for sub in subsets[len(cfg)])

    def law_of(m: int) -> dict[int, float]:
        out: dict[int, float] = {}
        for cfg in itertools.product(range(a), repeat=m):
            p = float(np.prod(w[list(cfg)])) if m else 1.0
            k = stat(cfg) if m >= l else 0
            out[k] = out.get(k, 0.0) + p
        return out

    s_law = law_of(n)
    tilde_law = law_of(n - 2 * l)
    tuples = list(itertools.product(range(a), repeat=l))
    tuple_w = np.array([np.prod(w[list(tp)]) * h(tp) for tp in tuples])
    mass_h = tuple_w.sum()
    if mass_h <= 0:
        raise ValueError("kernel vanishes K^l-almost everywhere; lambda = 0")
    lam = _falling(n, l) / math.factorial(l) * mass_h
    sp: dict[int, float] = {}
    for cfg in itertools.product(range(a), repeat=n - l):
        p = float(np.prod(w[list(cfg)])) if n - l else 1.0
        for tp, tw in zip(tuples, tuple_w):
            if tw == 0:
                continue
            full = cfg + tp
            k = sum(int(h(tuple(full[j] for j in sub))) for sub in subsets[n]) - h(tp)
            sp[k] = sp.get(k, 0.0) + p * tw / mass_h
    r = 0.0
    for i in range(1, l):
        acc = 0.0
        for shared in itertools.product(range(a), repeat=i):
            inner = 0.0
            for rest in itertools.product(range(a), repeat=l - i):
                inner += float(np.prod(w[list(rest)])) * h(shared + rest)
            acc += float(np.prod(w[list(shared)])) * inner**2
        r = max(r, _falling(n, 2 * l - i) * acc)

    def to_pmf(d):
        keys = sorted(d)
        mass = np.array([d[k] for k in keys])
        return IntegerPMF(np.array(keys), mass / mass.sum())

    return ExactBinomialLaws(to_pmf(s_law), to_pmf(sp), to_pmf(tilde_law), lam, r)
