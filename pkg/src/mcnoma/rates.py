"""Scalar rate primitives and two-dimensional Pareto frontier machinery.

Rates are in bits per channel use. The default convention keeps the
real-channel factor, ``C(x) = 0.5 * log2(1 + x)``; the ``"full"`` convention
uses ``log2(1 + x)``. Noise power is normalised to one everywhere, so an SNR
is simply a received power.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "RATE_CONVENTIONS",
    "shannon_rate",
    "bits_per_hz",
    "RatePoint",
    "ParetoFrontier",
    "pareto_frontier",
    "region_dominates",
]

#: multiplier in front of log2(1 + x) for each convention
RATE_CONVENTIONS = {"half": 0.5, "full": 1.0}

DEFAULT_TOL = 1e-9
HULL_RTOL = 1e-12


def _factor(convention: str) -> float:
    try:
        return RATE_CONVENTIONS[convention]
    except KeyError:
        raise ValueError(
            f"unknown rate convention {convention!r}; expected one of {sorted(RATE_CONVENTIONS)}"
        ) from None


def shannon_rate(snr, convention: str = "half"):
    """Gaussian channel rate ``C(snr)``.

    Accepts a scalar or an array. Negative or non-finite SNRs raise
    ``ValueError``.
    """
    x = np.asarray(snr, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("SNR must be finite")
    if np.any(x < 0):
        raise ValueError("SNR must be non-negative")
    r = _factor(convention) * np.log2(1.0 + x)
    return float(r) if r.ndim == 0 else r


def bits_per_hz(rate, convention: str = "half"):
    """Convert a rate in the given convention to bits/s/Hz, i.e. ``log2(1 + x)``."""
    out = np.asarray(rate, dtype=float) / _factor(convention)
    return float(out) if out.ndim == 0 else out


class RatePoint(NamedTuple):
    """An achievable rate tuple. ``r_edge`` is only used by three-user schemes."""

    r1: float
    r2: float
    r_edge: Optional[float] = None

    def pair(self) -> tuple[float, float]:
        return (self.r1, self.r2)


@dataclass(frozen=True)
class ParetoFrontier:
    """Upper-right boundary of a two-dimensional rate region.

    ``points`` is an ``(n, 2)`` array sorted by ``r1`` ascending with ``r2``
    non-increasing. When ``convex`` is true the region is the comprehensive
    hull of the piecewise-linear curve through the points (time-sharing is
    allowed between neighbours); otherwise it is the union of the boxes
    below each point.
    """

    points: np.ndarray
    convex: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if pts.shape[0] == 0:
            raise ValueError("a frontier needs at least one point")
        if not np.all(np.isfinite(pts)) or np.any(pts < 0):
            raise ValueError("frontier points must be finite and non-negative")
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ValueError("frontier r1 must be strictly increasing")
        if np.any(np.diff(pts[:, 1]) > 0):
            raise ValueError("frontier r2 must be non-increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def r1(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def r2(self) -> np.ndarray:
        return self.points[:, 1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        for a, b in self.points:
            yield RatePoint(float(a), float(b))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParetoFrontier):
            return NotImplemented
        return self.convex == other.convex and np.array_equal(self.points, other.points)

    def max_r2_at(self, r1) -> np.ndarray:
        """Largest ``r2`` inside the region for each requested ``r1``.

        Returns ``-inf`` where ``r1`` exceeds the region.
        """
        x = np.asarray(r1, dtype=float)
        p1, p2 = self.r1, self.r2
        if self.convex:
            out = np.interp(x, p1, p2)
        else:
            # staircase: best r2 among points with r1_i >= x
            idx = np.searchsorted(p1, x, side="left")
            out = p2[np.minimum(idx, len(p1) - 1)]
        return np.where(x > p1[-1], -np.inf, out)


def _as_array(points) -> np.ndarray:
    if isinstance(points, ParetoFrontier):
        return np.array(points.points)
    pts = np.array([tuple(p)[:2] for p in points], dtype=float) if not isinstance(points, np.ndarray) else points
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def _nondominated(pts: np.ndarray) -> np.ndarray:
    # sort by r1 descending then r2 descending; a point survives if its r2
    # strictly beats every point with larger-or-equal r1 seen so far
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    s = pts[order]
    keep = []
    best = -np.inf
    for i, (_, b) in enumerate(s):
        if b > best:
            keep.append(i)
            best = b
    return s[keep][::-1]


def _upper_hull(pts: np.ndarray) -> np.ndarray:
    # monotone chain over points sorted by r1 ascending
    hull: list[np.ndarray] = []
    for p in pts:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])
            # collinear within rounding counts as not strictly above the chord
            if cross >= -HULL_RTOL * np.hypot(*(a - o)) * np.hypot(*(p - o)):
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def pareto_frontier(points: Iterable, convexify: bool = False) -> ParetoFrontier:
    """Non-dominated subset of ``points``, sorted by ``r1``.

    With ``convexify`` the result is the upper concave envelope of that
    subset, i.e. the boundary reachable by time-sharing between operating
    points.
    """
    pts = _as_array(points)
    if pts.shape[0] == 0:
        raise ValueError("pareto_frontier needs at least one point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("rate points must be finite")
    front = _nondominated(pts)
    if convexify and len(front) > 2:
        front = _upper_hull(front)
    return ParetoFrontier(front, convex=convexify)


def region_dominates(a: ParetoFrontier, b: ParetoFrontier, tolerance: float = DEFAULT_TOL) -> bool:
    """True if every point of ``b`` lies inside region ``a`` up to ``tolerance``.

    A point ``q`` is covered when ``a`` reaches ``r1 >= q.r1 - tol`` and
    ``r2 >= q.r2 - tol`` at a frontier point, or on a hull segment when ``a``
    is convex.
    """
    return bool(np.all(a.max_r2_at(b.r1 - tolerance) >= b.r2 - tolerance))


def sweep(fn, grid: Sequence[float]) -> np.ndarray:
    """Evaluate a point-valued ``fn`` on each grid value, returning an ``(n, 2)`` array."""
    return np.array([tuple(fn(x))[:2] for x in grid], dtype=float)


def unit_grid(size: int = 1001) -> np.ndarray:
    """Uniform parameter grid on [0, 1]."""
    if size < 2:
        raise ValueError("grid size must be at least 2")
    return np.linspace(0.0, 1.0, size)
