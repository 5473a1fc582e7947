"""Rescaled interpoint distances of a Poisson process.

Each unordered pair ``{x, y}`` of a Poisson process with intensity ``t``
whose midpoint falls in the unit-volume window ``W`` receives the mark
``t^2 k_d ||x - y||^d / 2``. The number of marks in ``[0, u]`` has mean
exactly ``u`` and is close to Poisson(``u``); the smallest mark ``Y_t`` is
close to a standard exponential variable with
``0 <= P(Y_t > u) - exp(-u) <= 81 / t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .discrete_dist import empirical_pmf, tv_distance
from .poisson_stein import PoissonLaw
from .pointproc import Box, SeedSpec, buffered_box, make_rng, sample_poisson
from .report import CheckRow, lower_only, replicate, two_sided, upper_only

__all__ = [
    "unit_ball_volume",
    "InterpointConfig",
    "SurvivalCurve",
    "InterpointResult",
    "buffer_radius",
    "pair_marks",
    "simulate_marks",
    "simulate_all",
    "survival_curve",
    "check_interpoint_bounds",
    "DEFAULT_U_GRID",
]

DEFAULT_U_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


def unit_ball_volume(d: int) -> float:
    """Volume ``pi^{d/2} / Gamma(d/2 + 1)`` of the unit ball in ``R^d``."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class InterpointConfig:
    """Parameters of one interpoint-distance study.

    ``u_grid`` defaults to ``{0.25, 0.5, 1, 2, 4}`` intersected with
    ``(0, u_max]``.
    """

    d: int
    t: float
    u_max: float
    reps: int
    seed: SeedSpec
    window: Box | None = None
    u_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not 0 < self.u_max < self.t:
            raise ValueError("need 0 < u_max < t")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        w = self.window if self.window is not None else Box.unit(self.d)
        if w.d != self.d:
            raise ValueError("window dimension differs from d")
        if abs(w.volume - 1.0) > 1e-12:
            raise ValueError(f"window volume must be 1, got {w.volume!r}")
        object.__setattr__(self, "window", w)
        grid = self.u_grid
        if grid is None:
            grid = tuple(u for u in DEFAULT_U_GRID if u <= self.u_max)
        grid = tuple(sorted(float(u) for u in grid))
        if not grid or grid[0] <= 0 or grid[-1] > self.u_max:
            raise ValueError("u grid must be non-empty and lie in (0, u_max]")
        object.__setattr__(self, "u_grid", grid)


def buffer_radius(cfg: InterpointConfig) -> float:
    """Half the largest pair distance whose mark can be ``<= u_max``."""
    kd = unit_ball_volume(cfg.d)
    return 0.5 * (2.0 * cfg.u_max / (kd * cfg.t**2)) ** (1.0 / cfg.d)


def pair_marks(points: np.ndarray, t: float, window: Box, u_max: float) -> np.ndarray:
    """Sorted marks ``<= u_max`` of pairs with midpoint in ``window``."""
    pts = np.asarray(points, dtype=float)
    d = window.d
    if pts.shape[0] < 2:
        return np.empty(0)
    kd = unit_ball_volume(d)
    delta = (2.0 * u_max / (kd * t**2)) ** (1.0 / d)
    pairs = cKDTree(pts).query_pairs(delta, output_type="ndarray")
    if pairs.size == 0:
        return np.empty(0)
    x, y = pts[pairs[:, 0]], pts[pairs[:, 1]]
    inside = window.contains(0.5 * (x + y))
    dist = np.linalg.norm(x[inside] - y[inside], axis=1)
    marks = 0.5 * t**2 * kd * dist**d
    return np.sort(marks[marks <= u_max])


def simulate_marks(cfg: InterpointConfig, replication: int, rho_scale: float = 1.0) -> np.ndarray:
    """Marks ``<= u_max`` for one replication.

    The process is sampled on the window enlarged by the buffer radius, so
    every qualifying pair is observed. The process is drawn once on a box
    with four times that buffer and restricted, so ``rho_scale`` in
    ``(0, 4]`` changes the observed region but not the underlying sample.
    """
    if not 0 < rho_scale <= 4:
        raise ValueError("rho_scale must lie in (0, 4]")
    rho = buffer_radius(cfg) * rho_scale
    rng = make_rng(cfg.seed.child("interpoint", replication))
    eta = sample_poisson(buffered_box(cfg.window, 4.0 * buffer_radius(cfg)), cfg.t, rng)
    keep = buffered_box(cfg.window, rho).contains(eta.points)
    return pair_marks(eta.points[keep], cfg.t, cfg.window, cfg.u_max)


def simulate_all(cfg: InterpointConfig, mapper=None) -> list[np.ndarray]:
    return replicate(partial(simulate_marks, cfg), cfg.reps, mapper)


@dataclass(frozen=True)
class SurvivalCurve:
    """Empirical ``u -> P(Y_t > u)`` from per-replication minima."""

    minima: np.ndarray

    def __call__(self, u) -> np.ndarray | float:
        u_arr = np.asarray(u, dtype=float)
        srt = np.sort(self.minima)
        out = 1.0 - np.searchsorted(srt, u_arr, side="right") / srt.size
        return float(out) if np.ndim(out) == 0 else out

    def stderr(self, u) -> np.ndarray | float:
        p = np.asarray(self(u))
        out = np.sqrt(p * (1 - p) / self.minima.size)
        return float(out) if np.ndim(out) == 0 else out


def survival_curve(cfg: InterpointConfig, marks: Sequence[np.ndarray] | None = None,
                   mapper=None) -> SurvivalCurve:
    if cfg.reps < 100:
        raise ValueError("need at least 100 replications for a survival curve")
    if marks is None:
        marks = simulate_all(cfg, mapper)
    minima = np.array([m[0] if m.size else np.inf for m in marks])
    return SurvivalCurve(minima)


@dataclass(frozen=True)
class InterpointResult:
    rows: tuple[CheckRow, ...]
    curve: SurvivalCurve
    sup_gap: float
    sup_bound: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def check_interpoint_bounds(cfg: InterpointConfig, marks: Sequence[np.ndarray] | None = None,
                            mapper=None) -> InterpointResult:
    """All verdicts on the configured u-grid.

    Rows (each allowing three Monte Carlo standard errors):

    * ``intensity``: mean count in ``[0, u]`` equals ``u``.
    * ``survival``: ``|P(Y_t > u) - exp(-u)| <= 81 / t``.
    * ``one_sided``: ``P(Y_t > u) - exp(-u) >= 0``.
    * ``tv``: total variation of the count to Poisson(``u``) at most
      ``min(1, u) 8 u / t``; its error scale is half the summed per-bin
      standard errors.
    """
    if marks is None:
        marks = simulate_all(cfg, mapper)
    curve = survival_curve(cfg, marks)
    reps = len(marks)
    rows: list[CheckRow] = []
    sup_gap, sup_bound = 0.0, 81.0 / cfg.t
    for u in cfg.u_grid:
        counts = np.array([np.searchsorted(m, u, side="right") for m in marks])
        mean = counts.mean()
        se = counts.std(ddof=1) / math.sqrt(reps)
        rows.append(two_sided("intensity", u, mean, u, 0.0, se))
        p_hat = curve(u)
        p_se = curve.stderr(u)
        target = math.exp(-u)
        rows.append(two_sided("survival", u, p_hat, target, 81.0 / cfg.t, p_se))
        rows.append(lower_only("one_sided", u, p_hat, target, 0.0, p_se))
        sup_gap = max(sup_gap, abs(p_hat - target))
        law = empirical_pmf(counts)
        tv = tv_distance(law, PoissonLaw(u))
        tv_se = 0.5 * float(law.stderr().sum())
        rows.append(upper_only("tv", u, tv, 0.0, min(1.0, u) * 8.0 * u / cfg.t, tv_se))
    return InterpointResult(tuple(rows), curve, sup_gap, sup_bound)
