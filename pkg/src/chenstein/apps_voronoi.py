"""Extremes of Poisson-Voronoi cells: circumscribed radii and inradii.

Circumscribed radius: the smallest ``R`` with ``N(x, nu) subset B(x, R)``.
Marks ``s_t C(x, eta_t)^d`` with ``s_t = alpha_2 k_d t^{(d+2)/(d+1)}`` over
nuclei in ``W`` form a point process whose first arrival ``T_t`` is close to
a Weibull variable with shape ``d + 1`` and scale one.

Inradius: ``h_t(x) = t k_d NN(x)^d - log t`` with ``NN`` the nearest
neighbour distance (twice the inradius). The maximum over nuclei in ``W``
is close to a standard Gumbel variable.

The constant ``p_{d+1}`` is the probability that the Voronoi cell of the
origin among ``d + 1`` uniform points in ``B(0, 2)`` lies inside
``B(0, 1)``. It has a closed form only for ``d = 1`` (one half) and is
otherwise estimated by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .apps_interpoint import unit_ball_volume
from .discrete_dist import empirical_pmf, tv_distance
from .poisson_stein import PoissonLaw
from .pointproc import Box, PointPattern, SeedSpec, buffered_box, make_rng, sample_poisson
from .report import CheckRow, N_SIGMA, replicate, two_sided, upper_only

__all__ = [
    "UnsupportedDimensionError",
    "UndefinedStatisticError",
    "GridIndex",
    "inradius_stat",
    "PEstimate",
    "estimate_p",
    "alpha2",
    "VoronoiConstants",
    "voronoi_constants",
    "gumbel_constant",
    "circumradius_1d",
    "circumradius_2d",
    "mhat_theta",
    "VoronoiConfig",
    "CircumReplication",
    "VoronoiResult",
    "circum_buffer",
    "circum_replication",
    "inradius_tv_bound",
    "inradius_replication",
    "simulate_circum",
    "simulate_inradius",
    "weibull_cdf",
    "gumbel_cdf",
]

BUFFER_FRACTION_CAP = 0.2
CIRCUM_BUFFER_FACTOR = 6.0
N_KS_GRID = 60


class UnsupportedDimensionError(ValueError):
    """Raised for a dimension the requested computation does not handle."""


class UndefinedStatisticError(ValueError):
    """Raised when a statistic is undefined, e.g. a nucleus without neighbours."""


def weibull_cdf(u, d: int):
    """CDF of the Weibull law with shape ``d + 1`` and scale one."""
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    return -np.expm1(-(u ** (d + 1)))


def gumbel_cdf(u):
    """CDF ``exp(-exp(-u))`` of the standard Gumbel law."""
    return np.exp(-np.exp(-np.asarray(u, dtype=float)))


# ---------------------------------------------------------------- inradius


class GridIndex:
    """Uniform-grid spatial index for nearest-neighbour queries.

    ``cell`` defaults to ``vol^{1/d} / n^{1/d}``, the mean spacing of the
    indexed points.
    """

    def __init__(self, points: np.ndarray, cell: float | None = None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("need a non-empty (n, d) array of points")
        self.points = pts
        self.d = pts.shape[1]
        self.origin = pts.min(axis=0)
        extent = np.maximum(pts.max(axis=0) - self.origin, 1e-12)
        if cell is None:
            cell = float(np.prod(extent) / pts.shape[0]) ** (1.0 / self.d)
        if not cell > 0:
            raise ValueError("cell size must be positive")
        self.cell = float(cell)
        self.shape = np.floor(extent / self.cell).astype(np.int64) + 1
        keys = self._keys(pts)
        order = np.argsort(keys, kind="stable")
        sk = keys[order]
        uniq, start = np.unique(sk, return_index=True)
        stop = np.append(start[1:], sk.size)
        self._order = order
        self._cells = {int(k): (int(a), int(b)) for k, a, b in zip(uniq, start, stop)}

    def _coords(self, pts: np.ndarray) -> np.ndarray:
        return np.floor((pts - self.origin) / self.cell).astype(np.int64)

    def _keys(self, pts: np.ndarray) -> np.ndarray:
        c = np.clip(self._coords(pts), 0, self.shape - 1)
        return np.ravel_multi_index(tuple(c.T), tuple(self.shape))

    def _ring(self, center: np.ndarray, k: int) -> list[int]:
        if k == 0:
            offs = [np.zeros(self.d, dtype=np.int64)]
        else:
            rng = np.arange(-k, k + 1)
            grid = np.stack(np.meshgrid(*([rng] * self.d), indexing="ij"), -1).reshape(-1, self.d)
            offs = grid[np.abs(grid).max(axis=1) == k]
        cells = np.atleast_2d(center + np.asarray(offs))
        ok = np.all((cells >= 0) & (cells < self.shape), axis=1)
        if not ok.any():
            return []
        return [int(v) for v in np.ravel_multi_index(tuple(cells[ok].T), tuple(self.shape))]

    def nearest(self, x, exclude_coincident: bool = True) -> tuple[float, int]:
        """Distance to and index of the nearest indexed point.

        Points equal to ``x`` are skipped when ``exclude_coincident``.
        Returns ``(inf, -1)`` if there is no candidate.
        """
        x = np.asarray(x, dtype=float).reshape(self.d)
        center = np.floor((x - self.origin) / self.cell).astype(np.int64)
        best, arg = math.inf, -1
        # Cells beyond ring k are at least k * cell away from x.
        kmax = int(np.max(np.abs(center)) + np.max(self.shape)) + 1
        for k in range(kmax + 1):
            for key in self._ring(center, k):
                span = self._cells.get(key)
                if span is None:
                    continue
                idx = self._order[span[0]:span[1]]
                dist = np.linalg.norm(self.points[idx] - x, axis=1)
                if exclude_coincident:
                    dist = np.where(dist == 0.0, math.inf, dist)
                j = int(np.argmin(dist))
                if dist[j] < best:
                    best, arg = float(dist[j]), int(idx[j])
            if best <= k * self.cell:
                break
        return best, arg


def inradius_stat(x, pattern: PointPattern | np.ndarray, t: float) -> float:
    """``t k_d NN(x)^d - log t`` with ``NN`` the distance to the closest other point.

    Examples
    --------
    >>> from chenstein.pointproc import Box, PointPattern
    >>> pp = PointPattern(np.array([[0.5], [0.6]]), Box.unit(1), "poisson(10)")
    >>> round(inradius_stat([0.5], pp, 10.0), 7)
    -0.3025851
    """
    pts = pattern.points if isinstance(pattern, PointPattern) else np.asarray(pattern, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if pts.ndim == 1:
        pts = pts.reshape(-1, x.size)
    if pts.shape[0] == 0:
        raise UndefinedStatisticError("nearest neighbour undefined: empty pattern")
    nn, _ = GridIndex(pts).nearest(x)
    if not math.isfinite(nn):
        raise UndefinedStatisticError("nearest neighbour undefined: no other point")
    d = x.size
    return t * unit_ball_volume(d) * nn**d - math.log(t)


def gumbel_constant(d: int) -> int:
    """``2^{d+2} (4^d + 2^d + 2) + 1``."""
    return 2 ** (d + 2) * (4**d + 2**d + 2) + 1


# ------------------------------------------------------- circumscribed radius


def circumradius_1d(x: float, neighbors: Sequence[float]) -> float:
    """Larger half gap to the closest neighbour on each side (``inf`` if a side is empty)."""
    y = np.asarray(neighbors, dtype=float).ravel() - float(x)
    left, right = y[y < 0], y[y > 0]
    if left.size == 0 or right.size == 0:
        return math.inf
    return 0.5 * max(-left.max(), right.min())


def _cone_covers_plane(rel: np.ndarray) -> bool:
    """True iff the directions of ``rel`` leave no angular gap of ``pi`` or more."""
    if rel.shape[0] < 3:
        return False
    ang = np.sort(np.arctan2(rel[:, 1], rel[:, 0]))
    gaps = np.diff(np.append(ang, ang[0] + 2 * math.pi))
    return bool(gaps.max() < math.pi - 1e-12)


def _clip(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to ``{z : z . normal <= offset}``."""
    if poly.shape[0] == 0:
        return poly
    s = poly @ normal - offset
    out = []
    n = poly.shape[0]
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        sa, sb = s[i], s[(i + 1) % n]
        if sa <= 0:
            out.append(a)
        if (sa < 0 < sb) or (sb < 0 < sa):
            out.append(a + (sa / (sa - sb)) * (b - a))
    return np.asarray(out).reshape(-1, 2)


def circumradius_2d(x, neighbors) -> float:
    """Circumscribed radius of the planar Voronoi cell of ``x``.

    The cell is bounded iff the neighbour directions leave no angular gap
    of ``pi`` or more; then the bisector half-planes clip a bounding square
    that is doubled until no cell vertex touches it.

    Examples
    --------
    >>> round(circumradius_2d([0, 0], [[2, 0], [-2, 0], [0, 2], [0, -2]]), 12)
    1.414213562373
    >>> circumradius_2d([0, 0], [[1, 0]])
    inf
    """
    x = np.asarray(x, dtype=float).reshape(2)
    rel = np.asarray(neighbors, dtype=float).reshape(-1, 2) - x
    if rel.shape[0] == 0:
        return math.inf
    if np.any(np.all(rel == 0.0, axis=1)):
        raise ValueError("neighbours must differ from x")
    if not _cone_covers_plane(rel):
        return math.inf
    half = 0.5 * np.einsum("ij,ij->i", rel, rel)
    L = 2.0 * float(np.sqrt(2.0 * half.max()))
    for _ in range(200):
        poly = np.array([[-L, -L], [L, -L], [L, L], [-L, L]])
        for r, h in zip(rel, half):
            poly = _clip(poly, r, h)
        if np.max(np.abs(poly)) < L * (1 - 1e-9):
            return float(np.sqrt(np.einsum("ij,ij->i", poly, poly).max()))
        L *= 2.0
    raise RuntimeError("cell did not close; directions nearly degenerate")


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class PEstimate:
    """Monte Carlo estimate of ``p_{d+1}``; ``ci_halfwidth`` is three standard errors."""

    d: int
    estimate: float
    stderr: float
    reps: int

    @property
    def ci_halfwidth(self) -> float:
        return N_SIGMA * self.stderr

    def __iter__(self):
        return iter((self.estimate, self.ci_halfwidth))


def _uniform_ball(rng, m: int, d: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(m) ** (1.0 / d)
    return g * r[:, None]


def _p_trials_2d(y: np.ndarray) -> np.ndarray:
    """Success indicators for ``y`` of shape ``(m, 3, 2)``."""
    a, b, c = y[:, 0], y[:, 1], y[:, 2]

    def cross(u, v):
        return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]

    s1, s2, s3 = cross(a, b), cross(b, c), cross(c, a)
    inside = ((s1 > 0) & (s2 > 0) & (s3 > 0)) | ((s1 < 0) & (s2 < 0) & (s3 < 0))
    ok = inside.copy()
    for u, v, D in ((a, b, s1), (b, c, s2), (c, a, s3)):
        uu = np.einsum("ij,ij->i", u, u)
        vv = np.einsum("ij,ij->i", v, v)
        with np.errstate(divide="ignore", invalid="ignore"):
            cx = (v[:, 1] * uu - u[:, 1] * vv) / (2 * D)
            cy = (u[:, 0] * vv - v[:, 0] * uu) / (2 * D)
        ok &= (cx * cx + cy * cy) < 1.0
    return ok


def estimate_p(d: int, reps: int, seed) -> PEstimate:
    """Estimate ``p_{d+1}`` from ``reps`` independent trials.

    ``d = 1``: the cell is bounded iff the two points straddle the origin,
    and a bounded cell always lies in ``B(0, 1)``. ``d = 2``: the cell is
    bounded iff the origin is interior to the triangle of the three points,
    and its vertices are then the circumcentres of the origin with each pair.
    """
    if d not in (1, 2):
        raise UnsupportedDimensionError(f"p_(d+1) estimation supports d in {{1, 2}}, got {d}")
    if reps < 10_000:
        raise ValueError("need at least 1e4 trials")
    rng = make_rng(seed.child("p_estimate", d) if isinstance(seed, SeedSpec) else seed)
    hits = 0
    chunk = 1 << 17
    for start in range(0, reps, chunk):
        m = min(chunk, reps - start)
        y = _uniform_ball(rng, m * (d + 1), d, 2.0).reshape(m, d + 1, d)
        if d == 1:
            ok = (y[:, 0, 0] * y[:, 1, 0]) < 0
        else:
            ok = _p_trials_2d(y)
        hits += int(ok.sum())
    est = hits / reps
    return PEstimate(d, est, math.sqrt(max(est * (1 - est), 1e-300) / reps), reps)


def alpha2(d: int, p_succ: float) -> float:
    """``(2^{d(d+1)} p / (d+1)!)^{1/(d+1)}``, in log space only for huge ``d``.

    Examples
    --------
    >>> alpha2(1, 0.5)
    1.0
    """
    if not 0 < p_succ <= 1:
        raise ValueError("p must lie in (0, 1]")
    if d * (d + 1) < 1000:
        # Direct powers keep exact cases exact, e.g. d = 1, p = 1/2.
        return (2.0 ** (d * (d + 1)) * p_succ / math.factorial(d + 1)) ** (1.0 / (d + 1))
    log_a = (d * (d + 1) * math.log(2) + math.log(p_succ) - math.lgamma(d + 2)) / (d + 1)
    return math.exp(log_a)


def _c_tv(d, a2, p):
    return 3.0 * 2.0 ** (d * (d + 3)) / (a2 * p)


def _c_k(d, a2, p):
    return 1.0 + 2.0 ** (d * (d + 3) + 4) / (a2 * p) + 2.0 ** (2 * d + 3) / a2 + 16.0**d / a2**2


@dataclass(frozen=True)
class VoronoiConstants:
    """Constants derived from ``p_{d+1}``.

    ``alpha2`` comes from the point estimate. ``c_tv`` and ``c_k`` are
    decreasing in ``p`` and are evaluated at ``p_lo = p - ci``, the
    pessimistic end of the interval.
    """

    d: int
    p_succ: float
    p_ci: float = 0.0
    alpha2: float = field(init=False)
    p_lo: float = field(init=False)
    p_hi: float = field(init=False)
    c_tv: float = field(init=False)
    c_k: float = field(init=False)
    c_gumbel: int = field(init=False)

    def __post_init__(self):
        if not 0 < self.p_succ <= 1:
            raise ValueError("p must lie in (0, 1]")
        if not 0 <= self.p_ci < self.p_succ:
            raise ValueError("need 0 <= ci < p")
        lo, hi = self.p_succ - self.p_ci, min(1.0, self.p_succ + self.p_ci)
        a_lo = alpha2(self.d, lo)
        object.__setattr__(self, "alpha2", alpha2(self.d, self.p_succ))
        object.__setattr__(self, "p_lo", lo)
        object.__setattr__(self, "p_hi", hi)
        object.__setattr__(self, "c_tv", _c_tv(self.d, a_lo, lo))
        object.__setattr__(self, "c_k", _c_k(self.d, a_lo, lo))
        object.__setattr__(self, "c_gumbel", gumbel_constant(self.d))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("d", "p_succ", "p_ci", "p_lo", "p_hi", "alpha2", "c_tv", "c_k", "c_gumbel")}


def voronoi_constants(d: int, estimate: PEstimate | None = None) -> VoronoiConstants:
    """Constants for dimension ``d``; ``d = 1`` uses the exact value ``p_2 = 1/2``."""
    if estimate is None:
        if d != 1:
            raise ValueError("an estimate of p_(d+1) is required for d != 1")
        return VoronoiConstants(1, 0.5, 0.0)
    return VoronoiConstants(d, estimate.estimate, estimate.ci_halfwidth)


def mhat_theta(d: int, t: float, u: float, constants: VoronoiConstants) -> tuple[float, float, float]:
    """``(M_hat([0,u]), bound on theta([0,u]), bound on M([0,u]))``.

    Examples
    --------
    >>> c = VoronoiConstants(1, 0.5)
    >>> [round(v, 7) for v in mhat_theta(1, 1.0, 1.0, c)]
    [0.0183156, 32.0, 2.0]
    """
    if not t >= 1 or not u > 0:
        raise ValueError("need t >= 1 and u > 0")
    a2, p = constants.alpha2, constants.p_succ
    root = t ** (1.0 / (d + 1))
    mhat = u ** (d + 1) * math.exp(-(4.0**d) * u / (a2 * root))
    theta = 2.0 ** (d * (d + 3)) / (a2 * p) * u ** (d + 2) / root
    return mhat, theta, u ** (d + 1) / p


# --------------------------------------------------------------- simulation


@dataclass(frozen=True)
class VoronoiConfig:
    """One Voronoi experiment.

    ``kind`` is ``"circumradius"`` (``d`` in ``{1, 2}``, ``t >= 1``) or
    ``"inradius"`` (``d <= 3``, ``t > e^2``). The check grid defaults to ten
    target quantiles and the Kolmogorov grid to ``N_KS_GRID`` points where
    the target CDF lies in ``[0.001, 0.999]``.
    """

    kind: str
    d: int
    t: float
    reps: int
    seed: SeedSpec
    window: Box | None = None
    u_grid: tuple[float, ...] | None = None
    ks_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind == "circumradius":
            if self.d not in (1, 2):
                raise UnsupportedDimensionError("circumradius experiments need d in {1, 2}")
            if not self.t >= 1:
                raise ValueError("circumradius experiments need t >= 1")
        elif self.kind == "inradius":
            if not 1 <= self.d <= 3:
                raise UnsupportedDimensionError("inradius experiments need 1 <= d <= 3")
            if not self.t > math.e**2:
                raise ValueError("inradius experiments need t > e^2")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        w = self.window if self.window is not None else Box.unit(self.d)
        if w.d != self.d or abs(w.volume - 1.0) > 1e-12:
            raise ValueError("window must have dimension d and volume 1")
        object.__setattr__(self, "window", w)
        lo, hi = self._quantile(0.001), self._quantile(0.999)
        ks = self.ks_grid if self.ks_grid is not None else tuple(np.linspace(lo, hi, N_KS_GRID))
        grid = self.u_grid
        if grid is None:
            grid = tuple(float(self._quantile(q)) for q in np.linspace(0.05, 0.95, 10))
        grid = tuple(sorted(float(u) for u in grid))
        ks = tuple(sorted(float(u) for u in ks))
        if self.kind == "inradius" and min(grid[0], ks[0]) <= -math.log(self.t):
            raise ValueError("inradius grid points must exceed -log t")
        if self.kind == "circumradius" and min(grid[0], ks[0]) <= 0:
            raise ValueError("circumradius grid points must be positive")
        object.__setattr__(self, "u_grid", grid)
        object.__setattr__(self, "ks_grid", ks)
        if self.kind == "inradius":
            _check_buffer(self, self.buffer)

    def _quantile(self, q: float) -> float:
        if self.kind == "circumradius":
            return float((-math.log1p(-q)) ** (1.0 / (self.d + 1)))
        return float(-math.log(-math.log(q)))

    @property
    def u_cap(self) -> float:
        return max(self.u_grid[-1], self.ks_grid[-1])

    @property
    def kd(self) -> float:
        return unit_ball_volume(self.d)

    def s_t(self, constants: VoronoiConstants) -> float:
        return constants.alpha2 * self.kd * self.t ** ((self.d + 2) / (self.d + 1))

    @property
    def buffer(self) -> float:
        """Inradius buffer ``v_t(u_cap)``; circumradius buffers depend on the
        constants, see :func:`circum_buffer`."""
        if self.kind != "inradius":
            raise ValueError("use circum_buffer for circumradius experiments")
        return ((self.u_cap + math.log(self.t)) / (self.t * self.kd)) ** (1.0 / self.d)


def circum_buffer(cfg: VoronoiConfig, constants: VoronoiConstants) -> float:
    """``6 (u_cap / s_t)^{1/d}``: covers ``B(x, 4 (u/s_t)^{1/d})`` and the
    locality radius ``2 (u/s_t)^{1/d}`` of every nucleus in ``W``."""
    return CIRCUM_BUFFER_FACTOR * (cfg.u_cap / cfg.s_t(constants)) ** (1.0 / cfg.d)


def _check_buffer(cfg: VoronoiConfig, buf: float) -> None:
    if buf > BUFFER_FRACTION_CAP * float(cfg.window.sides.min()):
        raise ValueError(f"buffer {buf:.3g} exceeds {BUFFER_FRACTION_CAP:g} of the window side;"
                         " raise t or lower the grid cap")


@dataclass(frozen=True)
class CircumReplication:
    """Marks ``<= u_cap`` of one replication and, per mark, sorted distances to
    the other points within ``4 (u_cap / s_t)^{1/d}``."""

    marks: np.ndarray
    near: tuple[np.ndarray, ...]


_PREFILTER_K = 16
_PREFILTER_DIRS = np.stack([np.cos(np.linspace(0, 2 * np.pi, 32, endpoint=False)),
                            np.sin(np.linspace(0, 2 * np.pi, 32, endpoint=False))], axis=1)


def _circum_candidates_2d(pts: np.ndarray, inside: np.ndarray, r_max: float):
    """Nuclei in ``inside`` with ``C <= r_max`` and their radii.

    By locality only points within ``2 r_max`` matter. A vectorized
    prefilter bounds the cell's extent along 32 directions: the ray from
    ``x`` along ``e`` leaves the cell within ``min |y|^2 / (2 y.e)``, so if
    that exceeds ``r_max`` in any direction then ``C > r_max``. The filter
    only rejects when all neighbours within ``2 r_max`` were seen.
    """
    tree = cKDTree(pts)
    pairs = tree.query_pairs(2.0 * r_max, output_type="ndarray")
    deg = np.bincount(pairs.ravel(), minlength=pts.shape[0])
    inside = inside[deg[inside] >= 3]
    if inside.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    dist, idx = tree.query(pts[inside], k=_PREFILTER_K + 1, distance_upper_bound=2.0 * r_max)
    dist, idx = dist[:, 1:], idx[:, 1:]
    finite = np.isfinite(dist)
    keep = np.ones(inside.size, dtype=bool)
    truncated = finite[:, -1]
    rel = np.where(finite[..., None], pts[np.minimum(idx, pts.shape[0] - 1)] - pts[inside][:, None, :], 0.0)
    proj = rel @ _PREFILTER_DIRS.T
    sq = np.einsum("ijk,ijk->ij", rel, rel)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        reach = np.where(finite[..., None] & (proj > 0), sq / (2.0 * proj), np.inf)
    exit_dist = reach.min(axis=1).max(axis=1)
    keep &= truncated | (exit_dist <= r_max)
    cand, radius = [], []
    for i in inside[keep]:
        nb = [k for k in tree.query_ball_point(pts[i], 2.0 * r_max) if k != i]
        c = circumradius_2d(pts[i], pts[nb])
        if c <= r_max:
            cand.append(i)
            radius.append(c)
    return np.asarray(cand, dtype=np.int64), np.asarray(radius, dtype=float)


def circum_replication(cfg: VoronoiConfig, constants: VoronoiConstants, replication: int) -> CircumReplication:
    s_t = cfg.s_t(constants)
    r_max = (cfg.u_cap / s_t) ** (1.0 / cfg.d)
    rng = make_rng(cfg.seed.child("voronoi_circ", cfg.d, replication))
    buf = circum_buffer(cfg, constants)
    pts = sample_poisson(buffered_box(cfg.window, buf), cfg.t, rng).points
    inside = np.nonzero(cfg.window.contains(pts))[0]
    if pts.shape[0] < 2 or inside.size == 0:
        return CircumReplication(np.empty(0), ())
    if cfg.d == 1:
        order = np.argsort(pts[:, 0])
        xs = pts[order, 0]
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        j = rank[inside]
        left = np.where(j > 0, xs[j] - xs[np.maximum(j - 1, 0)], np.inf)
        right = np.where(j < xs.size - 1, xs[np.minimum(j + 1, xs.size - 1)] - xs[j], np.inf)
        radius = 0.5 * np.maximum(left, right)
        cand = inside[radius <= r_max]
        radius = radius[radius <= r_max]
    else:
        cand, radius = _circum_candidates_2d(pts, inside, r_max)
    marks = s_t * radius**cfg.d
    order = np.argsort(marks, kind="stable")
    marks, cand = marks[order], cand[order]
    near = []
    if cand.size:
        tree = cKDTree(pts)
        for i in cand:
            nb = tree.query_ball_point(pts[i], 4.0 * r_max)
            dist = np.sort(np.linalg.norm(pts[nb] - pts[i], axis=1))
            near.append(dist[dist > 0])
    return CircumReplication(marks, tuple(near))


def inradius_replication(cfg: VoronoiConfig, replication: int) -> np.ndarray:
    """Sorted values of ``h_t(x)`` over nuclei in ``W`` that exceed the
    smallest grid point; values above ``u_cap`` are reported as ``inf``."""
    rng = make_rng(cfg.seed.child("voronoi_inradius", cfg.d, replication))
    v = cfg.buffer
    pts = sample_poisson(buffered_box(cfg.window, v), cfg.t, rng).points
    inside = cfg.window.contains(pts)
    if not inside.any():
        return np.empty(0)
    if pts.shape[0] < 2:
        return np.full(int(inside.sum()), np.inf)
    dist, _ = cKDTree(pts).query(pts[inside], k=2, distance_upper_bound=v)
    nn = dist[:, 1]
    h = np.where(np.isfinite(nn), cfg.t * cfg.kd * nn**cfg.d - math.log(cfg.t), np.inf)
    h = np.where(h > cfg.u_cap, np.inf, h)
    lo = min(cfg.u_grid[0], cfg.ks_grid[0])
    return np.sort(h[h > lo])


@dataclass(frozen=True)
class VoronoiResult:
    """Verdict rows, the grid Kolmogorov distance and its bound."""

    rows: tuple[CheckRow, ...]
    ks_distance: float
    ks_bound: float
    extremes: np.ndarray
    constants: VoronoiConstants | None = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _ks_rows(name, grid, empirical_cdf, target_cdf, reps, bound):
    diff = np.abs(empirical_cdf - target_cdf)
    j = int(np.argmax(diff))
    se = math.sqrt(max(empirical_cdf[j] * (1 - empirical_cdf[j]), 1.0 / reps) / reps)
    return upper_only(name, grid[j], diff[j], 0.0, bound, se), float(diff[j])


def simulate_circum(cfg: VoronoiConfig, constants: VoronoiConstants, mapper=None,
                    data: Sequence[CircumReplication] | None = None) -> VoronoiResult:
    """Circumradius checks on ``cfg.u_grid`` plus the grid Kolmogorov distance.

    The marks are scaled with the point estimate of ``p_{d+1}``. If the true
    value is ``p*``, the mark process at ``u`` equals the exactly scaled one
    at ``u (p*/p)^{1/(d+1)}``, so every target is taken at the pessimistic
    end of the interval for ``p*``:

    * ``one_sided``: ``P(T > u) <= exp(-(p_hi/p) M_hat(u))``.
    * ``mean_cap``: ``E xi([0,u]) <= u^{d+1} / p`` (free of ``p*``).
    * ``mhat``: the mean number of marks ``<= u`` with exactly ``d + 1``
      points in ``B(x, 4 (u/s_t)^{1/d})`` equals ``(p*/p) M_hat(u)``.
    * ``tv``: ``d_TV(xi([0,u]), Poisson(u^{d+1}))`` against
      ``C_TV u'^{d+2} / t^{1/(d+1)} + u^{d+1} ci/p`` with ``u' = u (p_hi/p)^{1/(d+1)}``.
    * ``kolmogorov``: grid distance to the Weibull law against
      ``C_K / t^{1/(d+1)}`` plus the shift ``ci / (e (p - ci))``.
    """
    if cfg.kind != "circumradius":
        raise ValueError("config is not a circumradius experiment")
    if constants.d != cfg.d:
        raise ValueError("constants dimension differs from config")
    _check_buffer(cfg, circum_buffer(cfg, constants))
    if data is None:
        data = replicate(partial(circum_replication, cfg, constants), cfg.reps, mapper)
    reps = len(data)
    d, t = cfg.d, cfg.t
    p, ci = constants.p_succ, constants.p_ci
    root = t ** (1.0 / (d + 1))
    s_t = cfg.s_t(constants)
    minima = np.array([r.marks[0] if r.marks.size else np.inf for r in data])
    rows: list[CheckRow] = []
    for u in cfg.u_grid:
        mhat, _, m_cap = mhat_theta(d, t, u, constants)
        surv = float(np.mean(minima > u))
        surv_se = math.sqrt(max(surv * (1 - surv), 1.0 / reps) / reps)
        rows.append(upper_only("one_sided", u, surv, math.exp(-(constants.p_hi / p) * mhat), 0.0, surv_se))
        counts = np.array([np.searchsorted(r.marks, u, side="right") for r in data])
        c_se = max(counts.std(ddof=1), 1.0 / reps) / math.sqrt(reps) if reps > 1 else math.inf
        rows.append(upper_only("mean_cap", u, counts.mean(), m_cap, 0.0, c_se))
        radius4 = 4.0 * (u / s_t) ** (1.0 / d)
        exact = np.array([
            sum(1 for m, nd in zip(r.marks, r.near) if m <= u and np.sum(nd < radius4) == d + 1)
            for r in data])
        e_se = max(exact.std(ddof=1), 1.0 / reps) / math.sqrt(reps) if reps > 1 else math.inf
        rows.append(two_sided("mhat", u, exact.mean(), mhat, mhat * ci / p, e_se))
        law = empirical_pmf(counts)
        tv = tv_distance(law, PoissonLaw(u ** (d + 1)))
        u_pess = u * (constants.p_hi / p) ** (1.0 / (d + 1))
        tv_bound = constants.c_tv * u_pess ** (d + 2) / root + u ** (d + 1) * ci / p
        rows.append(upper_only("tv", u, tv, 0.0, tv_bound, 0.5 * float(law.stderr().sum())))
    grid = np.asarray(cfg.ks_grid)
    emp = np.searchsorted(np.sort(minima), grid, side="right") / reps
    ks_bound = constants.c_k / root + ci / (math.e * (p - ci))
    ks_row, ks = _ks_rows("kolmogorov", grid, emp, weibull_cdf(grid, d), reps, ks_bound)
    rows.append(ks_row)
    return VoronoiResult(tuple(rows), ks, ks_bound, minima, constants)


def inradius_tv_bound(d: int, t: float, u: float) -> float:
    """``2^d (u + log t) / (e^{u/2} sqrt t) + (u + log t) / (e^u t)``."""
    a = u + math.log(t)
    return 2.0**d * a / (math.exp(u / 2) * math.sqrt(t)) + a / (math.exp(u) * t)


def simulate_inradius(cfg: VoronoiConfig, mapper=None,
                      data: Sequence[np.ndarray] | None = None) -> VoronoiResult:
    """Inradius checks on ``cfg.u_grid`` plus the grid Kolmogorov distance.

    * ``intensity``: mean of ``xi((u, inf))`` equals ``e^{-u}``.
    * ``tv``: ``d_TV(xi((u, inf)), Poisson(e^{-u}))`` against the per-u bound.
    * ``kolmogorov``: grid distance of ``T_t`` to the Gumbel law against
      ``(2^{d+2}(4^d + 2^d + 2) + 1) log t / sqrt t``.
    """
    if cfg.kind != "inradius":
        raise ValueError("config is not an inradius experiment")
    if data is None:
        data = replicate(partial(inradius_replication, cfg), cfg.reps, mapper)
    reps = len(data)
    rows: list[CheckRow] = []
    for u in cfg.u_grid:
        counts = np.array([h.size - np.searchsorted(h, u, side="right") for h in data])
        se = max(counts.std(ddof=1), 1.0 / reps) / math.sqrt(reps) if reps > 1 else math.inf
        rows.append(two_sided("intensity", u, counts.mean(), math.exp(-u), 0.0, se))
        law = empirical_pmf(counts)
        tv = tv_distance(law, PoissonLaw(math.exp(-u)))
        rows.append(upper_only("tv", u, tv, 0.0, inradius_tv_bound(cfg.d, cfg.t, u),
                               0.5 * float(law.stderr().sum())))
    lo = min(cfg.u_grid[0], cfg.ks_grid[0])
    maxima = np.array([h[-1] if h.size else lo for h in data])
    grid = np.asarray(cfg.ks_grid)
    emp = np.searchsorted(np.sort(maxima), grid, side="right") / reps
    bound = gumbel_constant(cfg.d) * math.log(cfg.t) / math.sqrt(cfg.t)
    ks_row, ks = _ks_rows("kolmogorov", grid, emp, gumbel_cdf(grid), reps, bound)
    rows.append(ks_row)
    return VoronoiResult(tuple(rows), ks, bound, maxima)
