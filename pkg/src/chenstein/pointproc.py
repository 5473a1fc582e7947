"""Seeded Poisson and binomial point processes on axis-aligned boxes.

Random streams are counter based (Philox) and keyed by a master seed and a
64-bit stream id, so replication ``r`` of an experiment draws the same
numbers no matter which worker runs it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

__all__ = [
    "BoxError",
    "Box",
    "PointPattern",
    "SeedSpec",
    "stream_id",
    "make_rng",
    "sample_poisson",
    "sample_binomial",
    "buffered_box",
]

_MASK64 = (1 << 64) - 1


class BoxError(ValueError):
    """Raised for degenerate or inconsistent boxes."""


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``prod_j [lower_j, upper_j]``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(a) for a in np.atleast_1d(self.lower))
        hi = tuple(float(b) for b in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise BoxError("lower and upper must have the same positive length")
        if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(lo, hi)):
            raise BoxError(f"degenerate box {lo} x {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        return np.all((pts >= np.asarray(self.lower)) & (pts <= np.asarray(self.upper)), axis=1)


def buffered_box(w: Box, rho: float) -> Box:
    """``w`` enlarged by ``rho`` in every coordinate direction.

    Examples
    --------
    >>> buffered_box(Box.unit(2), 0.5)
    Box(lower=(-0.5, -0.5), upper=(1.5, 1.5))
    """
    if not rho >= 0:
        raise BoxError("buffer radius must be non-negative")
    if rho == 0:
        return w
    return Box(tuple(a - rho for a in w.lower), tuple(b + rho for b in w.upper))


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus stream id, both 64-bit unsigned integers."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            val = int(getattr(self, name))
            if not 0 <= val <= _MASK64:
                raise ValueError(f"{name} must fit in 64 unsigned bits")
            object.__setattr__(self, name, val)

    def child(self, *keys) -> "SeedSpec":
        """Seed for a named sub-stream, e.g. ``spec.child("interpoint", r)``."""
        return SeedSpec(self.master_seed, stream_id(self.stream_id, *keys))


def stream_id(*keys) -> int:
    """Stable 64-bit id from a tuple of keys (strings and integers)."""
    h = hashlib.blake2b(digest_size=8)
    for k in keys:
        h.update(repr(k).encode())
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


def make_rng(seed: Union[SeedSpec, np.random.Generator]) -> np.random.Generator:
    """Philox generator for a :class:`SeedSpec` (generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, SeedSpec):
        raise TypeError("seed must be a SeedSpec or numpy Generator")
    ss = np.random.SeedSequence(entropy=seed.master_seed, spawn_key=(seed.stream_id,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Finite point set in ``R^d`` with the box and process that produced it."""

    points: np.ndarray
    box: Box
    intensity_tag: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.box.d)
        if pts.size and not np.all(self.box.contains(pts)):
            raise BoxError("pattern has points outside its generating box")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def d(self) -> int:
        return self.box.d

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(self.d)])
        for row in self.points:
            w.writerow([f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _uniform(rng: np.random.Generator, box: Box, n: int) -> np.ndarray:
    lo = np.asarray(box.lower)
    pts = lo + box.sides * rng.random((n, box.d))
    # Guard against rounding past the upper face.
    return np.minimum(pts, np.asarray(box.upper))


def sample_poisson(box: Box, t: float, seed) -> PointPattern:
    """Homogeneous Poisson process with intensity ``t`` on ``box``.

    The count is Poisson with mean ``t * vol(box)``; points are i.i.d.
    uniform given the count.
    """
    if not t >= 0:
        raise ValueError("intensity must be non-negative")
    rng = make_rng(seed)
    n = int(rng.poisson(t * box.volume)) if t > 0 else 0
    return PointPattern(_uniform(rng, box, n), box, ("poisson", float(t)))


def sample_binomial(n: int, box: Box, seed) -> PointPattern:
    """Exactly ``n`` i.i.d. uniform points on ``box``."""
    if int(n) != n or n < 0:
        raise ValueError("n must be a non-negative integer")
    rng = make_rng(seed)
    return PointPattern(_uniform(rng, box, int(n)), box, ("binomial", int(n)))
