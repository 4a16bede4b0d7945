"""Rate regions of the two-user Gaussian interference channel.

Three schemes are compared:

* OMA: TDMA with per-slot power control, no cross interference.
* basic Han-Kobayashi (HK): each transmitter splits its power into a private
  part (fraction ``lambda``) and a common part; each receiver jointly decodes
  its own private and common messages and the other user's common message.
* HK with time-sharing: convex hull of the basic HK points and the
  single-user slots. Power is constrained on average, so a single-user slot
  may boost its power; TDMA with power control is then one of the
  time-sharing options and lies inside this region.

For a fixed split the HK region is a polytope in ``(Rp1, Rc1, Rp2, Rc2)``.
Its constraint matrix does not depend on the channel, so every basis of four
constraints is inverted once and weighted sum-rate optima are found by
enumerating vertices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .rates import ParetoFrontier, RatePoint, pareto_frontier, shannon_rate, unit_grid

__all__ = [
    "IcChannel",
    "HkSplit",
    "ic_oma_point",
    "ic_oma_frontier",
    "hk_constraints",
    "hk_lp_solution",
    "hk_basic_rate_bound",
    "hk_basic_points",
    "hk_basic_frontier",
    "hk_timeshare_frontier",
    "DEFAULT_SPLIT_GRID",
    "DEFAULT_WEIGHT_GRID",
]

DEFAULT_SPLIT_GRID = 41
DEFAULT_WEIGHT_GRID = 25
WEIGHT_RANGE = (2.0 ** -6, 2.0 ** 6)
FEAS_TOL = 1e-12

# variable order
RP1, RC1, RP2, RC2 = range(4)


@dataclass(frozen=True)
class IcChannel:
    """Direct-link SNRs ``a1, a2`` and cross-link INRs ``b1`` (tx2 -> rx1), ``b2`` (tx1 -> rx2)."""

    a1: float
    a2: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a finite non-negative gain, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class HkSplit:
    """Fraction of each transmitter's power carried by its private message."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)


def ic_oma_point(ch: IcChannel, alpha: float) -> RatePoint:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    r1 = alpha * shannon_rate(ch.a1 / alpha) if alpha > 1e-12 else 0.0
    ab = 1.0 - alpha
    r2 = ab * shannon_rate(ch.a2 / ab) if ab > 1e-12 else 0.0
    return RatePoint(r1, r2)


def ic_oma_frontier(ch: IcChannel, grid_size: int = 1001) -> ParetoFrontier:
    """TDMA with per-slot power control; slots are orthogonal so the cross links do not matter."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    return pareto_frontier([ic_oma_point(ch, a) for a in unit_grid(grid_size)], convexify=True)


def _subsets(members):
    return [s for r in range(1, len(members) + 1) for s in itertools.combinations(members, r)]


# receiver 1 decodes (p1, c1, c2); receiver 2 decodes (p2, c2, c1)
_RX1 = (RP1, RC1, RC2)
_RX2 = (RP2, RC2, RC1)
_SUBSETS = [(0, s) for s in _subsets(_RX1)] + [(1, s) for s in _subsets(_RX2)]


@lru_cache(maxsize=1)
def _constraint_matrix() -> np.ndarray:
    rows = []
    for _, members in _SUBSETS:
        row = np.zeros(4)
        row[list(members)] = 1.0
        rows.append(row)
    rows.extend(-np.eye(4))
    return np.array(rows)


@lru_cache(maxsize=1)
def _bases() -> tuple[np.ndarray, np.ndarray]:
    """Row indices and inverses of every non-singular 4x4 basis of the constraint matrix."""
    A = _constraint_matrix()
    idx, inv = [], []
    for combo in itertools.combinations(range(A.shape[0]), 4):
        sub = A[list(combo)]
        if abs(np.linalg.det(sub)) > 0.5:  # integer matrix: det is 0 or |det| >= 1
            idx.append(combo)
            inv.append(np.linalg.inv(sub))
    return np.array(idx), np.array(inv)


def hk_constraints(ch: IcChannel, split: HkSplit) -> tuple[np.ndarray, np.ndarray]:
    """``(A, b)`` with the HK polytope ``{x : A x <= b}`` for ``x = (Rp1, Rc1, Rp2, Rc2)``."""
    return _constraint_matrix(), _rhs(ch, np.array([split.lambda1]), np.array([split.lambda2]))[0]


def _rhs(ch: IcChannel, lam1: np.ndarray, lam2: np.ndarray) -> np.ndarray:
    """Right-hand sides for a batch of splits, shape ``(n, 18)``."""
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    # per receiver: power of each decoded virtual user and the private interference floor
    power = {
        0: {RP1: ch.a1 * lam1, RC1: ch.a1 * (1 - lam1), RC2: ch.b1 * (1 - lam2)},
        1: {RP2: ch.a2 * lam2, RC2: ch.a2 * (1 - lam2), RC1: ch.b2 * (1 - lam1)},
    }
    floor = {0: 1.0 + ch.b1 * lam2, 1: 1.0 + ch.b2 * lam1}
    cols = []
    for rx, members in _SUBSETS:
        total = sum(power[rx][m] for m in members)
        cols.append(shannon_rate(np.maximum(total / floor[rx], 0.0)))
    cols.extend([np.zeros_like(lam1)] * 4)
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _vertices(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Candidate vertices ``(n, m, 4)`` and their feasibility mask ``(n, m)``."""
    A = _constraint_matrix()
    idx, inv = _bases()
    v = np.einsum("mij,nmj->nmi", inv, b[:, idx])
    slack = b[:, None, :] - np.einsum("kj,nmj->nmk", A, v)
    tol = FEAS_TOL * (1.0 + np.abs(b[:, None, :]))
    return v, np.all(slack >= -tol, axis=-1)


def _best_vertices(b: np.ndarray, weights: np.ndarray, chunk: int = 32) -> np.ndarray:
    """Weighted-sum optimal ``x`` for every split and weight, shape ``(n, w, 4)``."""
    out = np.empty((b.shape[0], len(weights), 4))
    for s in range(0, b.shape[0], chunk):
        v, ok = _vertices(b[s:s + chunk])
        r1 = v[..., RP1] + v[..., RC1]
        r2 = v[..., RP2] + v[..., RC2]
        obj = weights[None, :, None] * r1[:, None, :] + r2[:, None, :]
        obj = np.where(ok[:, None, :], obj, -np.inf)
        best = np.argmax(obj, axis=-1)  # (n, w)
        out[s:s + chunk] = np.take_along_axis(v[:, None, :, :], best[..., None, None], axis=2)[:, :, 0, :]
    return out


def hk_lp_solution(ch: IcChannel, split: HkSplit, weight: float) -> np.ndarray:
    """Optimal ``(Rp1, Rc1, Rp2, Rc2)`` for ``weight * R1 + R2`` at a fixed split."""
    if weight < 0:
        raise ValueError("weight must be non-negative")
    b = _rhs(ch, np.array([split.lambda1]), np.array([split.lambda2]))
    return _best_vertices(b, np.array([float(weight)]))[0, 0]


def hk_basic_rate_bound(ch: IcChannel, split: HkSplit, weight: float) -> RatePoint:
    x = hk_lp_solution(ch, split, weight)
    return RatePoint(float(x[RP1] + x[RC1]), float(x[RP2] + x[RC2]))


def _weights(weight_grid: int) -> np.ndarray:
    return np.geomspace(*WEIGHT_RANGE, weight_grid)


def hk_basic_points(ch: IcChannel, split_grid: int = DEFAULT_SPLIT_GRID,
                    weight_grid: int = DEFAULT_WEIGHT_GRID) -> np.ndarray:
    """All HK operating points over the split lattice and weight grid, shape ``(n, 2)``."""
    if split_grid < 2 or weight_grid < 2:
        raise ValueError("split_grid and weight_grid must be at least 2")
    pts = _hk_points_cached(ch, int(split_grid), int(weight_grid)).copy()
    return pts


@lru_cache(maxsize=64)
def _hk_points_cached(ch: IcChannel, split_grid: int, weight_grid: int) -> np.ndarray:
    lam = unit_grid(split_grid)
    l1, l2 = np.meshgrid(lam, lam, indexing="ij")
    b = _rhs(ch, l1.ravel(), l2.ravel())
    x = _best_vertices(b, _weights(weight_grid)).reshape(-1, 4)
    pts = np.column_stack([x[:, RP1] + x[:, RC1], x[:, RP2] + x[:, RC2]])
    # vertex solves leave ~1e-16 noise; without rounding, ulp-level near-ties survive the Pareto filter
    pts = np.round(pts, 12)
    pts.setflags(write=False)
    return pts


def hk_basic_frontier(ch: IcChannel, split_grid: int = DEFAULT_SPLIT_GRID,
                      weight_grid: int = DEFAULT_WEIGHT_GRID) -> ParetoFrontier:
    """Basic HK boundary; no time-sharing, so the frontier is not convexified."""
    pts = np.clip(hk_basic_points(ch, split_grid, weight_grid), 0.0, None)
    return pareto_frontier(pts, convexify=False)


def hk_timeshare_frontier(ch: IcChannel, split_grid: int = DEFAULT_SPLIT_GRID,
                          weight_grid: int = DEFAULT_WEIGHT_GRID,
                          oma_grid: int = 1001) -> ParetoFrontier:
    """Time-sharing between basic HK points and single-user slots.

    The single-user slots include the power-boosted TDMA operating points,
    so the result contains both the basic HK and the OMA regions.
    """
    pts = np.clip(hk_basic_points(ch, split_grid, weight_grid), 0.0, None)
    singles = np.array([[shannon_rate(ch.a1), 0.0], [0.0, shannon_rate(ch.a2)]])
    oma = ic_oma_frontier(ch, oma_grid).points
    return pareto_frontier(np.vstack([pts, singles, oma]), convexify=True)
