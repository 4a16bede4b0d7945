"""Two-user (and K-user) uplink MAC and downlink BC operating points.

User 1 and user 2 receive SNRs ``gamma1`` and ``gamma2``. OMA is time
division with a fraction ``alpha`` of time given to user 1. NOMA is SIC at
the base station in the uplink and superposition coding with a power split
``beta`` (fraction of power on user 1) in the downlink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rates import ParetoFrontier, RatePoint, pareto_frontier, shannon_rate, unit_grid

__all__ = [
    "TwoUserGains",
    "mac_oma_point",
    "mac_oma_frontier",
    "mac_noma_corners",
    "mac_noma_frontier",
    "bc_oma_point",
    "bc_oma_frontier",
    "bc_noma_point",
    "bc_noma_frontier",
    "bc_weighted_objective",
    "bc_optimal_split",
    "k_user_mac_sic_rates",
    "k_user_bc_sc_rates",
    "golden_section_max",
]

# below this time share, alpha * C(gamma / alpha) is taken at its limit 0
ALPHA_EPS = 1e-12


class UserOrderError(ValueError):
    """Raised when a SIC-based formula is called with users in the wrong order."""


def _check_snr(x: float, name: str) -> float:
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"{name} must be a finite non-negative SNR, got {x}")
    return x


def _check_unit(x: float, name: str) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")
    return x


@dataclass(frozen=True)
class TwoUserGains:
    gamma1: float
    gamma2: float

    def __post_init__(self):
        object.__setattr__(self, "gamma1", _check_snr(self.gamma1, "gamma1"))
        object.__setattr__(self, "gamma2", _check_snr(self.gamma2, "gamma2"))


def _timeshared_rate(share: float, snr: float, boost: bool) -> float:
    if not boost:
        return share * shannon_rate(snr)
    if share < ALPHA_EPS:
        return 0.0
    return share * shannon_rate(snr / share)


def mac_oma_point(g: TwoUserGains, alpha: float, power_control: bool = False) -> RatePoint:
    """TDMA uplink point; with power control each user boosts power by ``1/share``."""
    a = _check_unit(alpha, "alpha")
    return RatePoint(
        _timeshared_rate(a, g.gamma1, power_control),
        _timeshared_rate(1.0 - a, g.gamma2, power_control),
    )


def _timeshared_rates(share: np.ndarray, snr: float, boost: bool) -> np.ndarray:
    # vector form of _timeshared_rate over a grid of shares
    if not boost:
        return share * shannon_rate(snr)
    out = np.zeros_like(share)
    on = share >= ALPHA_EPS
    out[on] = share[on] * shannon_rate(snr / share[on])
    return out


def mac_oma_frontier(g: TwoUserGains, power_control: bool = False, grid_size: int = 1001) -> ParetoFrontier:
    a = unit_grid(grid_size)
    pts = np.column_stack([_timeshared_rates(a, g.gamma1, power_control),
                           _timeshared_rates(1.0 - a, g.gamma2, power_control)])
    return pareto_frontier(pts, convexify=True)


def mac_noma_corners(g: TwoUserGains) -> tuple[RatePoint, RatePoint]:
    """The two SIC corner points of the MAC pentagon.

    Corner A decodes user 2 first (treating user 1 as noise), then user 1
    interference-free. Corner B uses the opposite order.
    """
    g1, g2 = g.gamma1, g.gamma2
    a = RatePoint(shannon_rate(g1), shannon_rate(g2 / (g1 + 1.0)))
    b = RatePoint(shannon_rate(g1 / (g2 + 1.0)), shannon_rate(g2))
    return a, b


def mac_noma_frontier(g: TwoUserGains) -> ParetoFrontier:
    """Capacity region boundary: axis extension, corner B, sum-rate face, corner A, axis extension."""
    a, b = mac_noma_corners(g)
    candidates = [(0.0, b.r2), (b.r1, b.r2), (a.r1, a.r2), (a.r1, 0.0)]
    pts: list[tuple[float, float]] = []
    for p in candidates:
        if pts and p[0] <= pts[-1][0]:
            # degenerate corner (a silent user): keep the larger r2
            if p[1] > pts[-1][1]:
                pts[-1] = p
            continue
        pts.append(p)
    return ParetoFrontier(np.array(pts), convex=True)


def bc_oma_point(g: TwoUserGains, alpha: float) -> RatePoint:
    a = _check_unit(alpha, "alpha")
    return RatePoint(a * shannon_rate(g.gamma1), (1.0 - a) * shannon_rate(g.gamma2))


def bc_oma_frontier(g: TwoUserGains, grid_size: int = 1001) -> ParetoFrontier:
    a = unit_grid(grid_size)
    pts = np.column_stack([a * shannon_rate(g.gamma1), (1.0 - a) * shannon_rate(g.gamma2)])
    return pareto_frontier(pts, convexify=True)


def bc_noma_point(g: TwoUserGains, beta: float) -> RatePoint:
    """Superposition coding point; user 1 must be the stronger (SIC) user."""
    b = _check_unit(beta, "beta")
    if g.gamma1 < g.gamma2:
        raise UserOrderError(
            f"bc_noma_point needs gamma1 >= gamma2 (got {g.gamma1} < {g.gamma2}); order the users first"
        )
    g1, g2 = g.gamma1, g.gamma2
    return RatePoint(shannon_rate(b * g1), shannon_rate((1.0 - b) * g2 / (b * g2 + 1.0)))


def bc_noma_frontier(g: TwoUserGains, grid_size: int = 1001) -> ParetoFrontier:
    bc_noma_point(g, 0.0)  # ordering check
    b = unit_grid(grid_size)
    g1, g2 = g.gamma1, g.gamma2
    pts = np.column_stack([shannon_rate(b * g1), shannon_rate((1.0 - b) * g2 / (b * g2 + 1.0))])
    return pareto_frontier(pts, convexify=True)


def bc_weighted_objective(g: TwoUserGains, beta: float, mu: float) -> float:
    p = bc_noma_point(g, beta)
    return mu * p.r1 + p.r2


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Maximiser of a unimodal ``f`` on ``[lo, hi]`` by golden-section search."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def bc_optimal_split(g: TwoUserGains, mu: float, tol: float = 1e-10) -> tuple[float, RatePoint]:
    """Power split maximising ``mu * R1 + R2`` and the point it achieves.

    The objective is unimodal in ``beta``. The end points are checked
    explicitly so that a boundary optimum is returned exactly.
    """
    mu = float(mu)
    if not math.isfinite(mu) or mu < 0:
        raise ValueError(f"mu must be a finite non-negative weight, got {mu}")
    if g.gamma1 < g.gamma2:
        raise UserOrderError("bc_optimal_split needs gamma1 >= gamma2")

    def obj(b: float) -> float:
        return bc_weighted_objective(g, b, mu)

    best = golden_section_max(obj, 0.0, 1.0, tol)
    for edge in (0.0, 1.0):
        if obj(edge) >= obj(best):
            best = edge
    return best, bc_noma_point(g, best)


def k_user_mac_sic_rates(gains: Sequence[float], decode_order: Sequence[int]) -> list[float]:
    """Uplink SIC rates. ``decode_order[j]`` is the (0-based) user decoded j-th.

    The j-th decoded user sees every later-decoded user as noise.
    """
    g = [_check_snr(x, "gain") for x in gains]
    order = list(decode_order)
    if sorted(order) != list(range(len(g))):
        raise ValueError(f"decode_order {order} is not a permutation of 0..{len(g) - 1}")
    rates = [0.0] * len(g)
    for j, u in enumerate(order):
        rest = sum(g[v] for v in order[j + 1:])
        rates[u] = shannon_rate(g[u] / (1.0 + rest))
    return rates


def k_user_bc_sc_rates(gains: Sequence[float], splits: Sequence[float]) -> list[float]:
    """Downlink superposition coding rates for users sorted strongest first.

    User k removes the messages of the weaker users k+1..K and treats the
    stronger users' messages as noise.
    """
    g = [_check_snr(x, "gain") for x in gains]
    b = [float(x) for x in splits]
    if len(b) != len(g):
        raise ValueError("need one power split per user")
    if any(x < 0 for x in b) or abs(sum(b) - 1.0) > 1e-12:
        raise ValueError(f"power splits must be non-negative and sum to 1, got {b}")
    if any(g[i] < g[i + 1] for i in range(len(g) - 1)):
        raise UserOrderError("gains must be sorted in descending order")
    out = []
    stronger = 0.0
    for gk, bk in zip(g, b):
        out.append(shannon_rate(bk * gk / (1.0 + gk * stronger)))
        stronger += bk
    return out
