"""Achievable rates of the two-cell transmission schemes for given channels.

Scheme identifiers:

=========  ==============================================================
OMA        single-cell zero-forcing, the two users of a cluster share it
           in time, inter-cell interference treated as noise
OMA-FFR    as OMA with fractional frequency reuse
NOMA       single-cell zero-forcing with two-user superposition per cluster
NOMA-TDM   the two cells take turns; NOMA without inter-cell interference
NOMA-JT    both base stations send the edge user's message
NOMA-DCS   the stronger base station alone serves the edge user
NOMA-CB    beams designed jointly to null inter-cell interference
NOMA-CS    per-cluster choice between NOMA and serving the center user only
=========  ==============================================================

Within a superposed cluster the roles are fixed: the center user gets the
``center_share`` of the beam power and removes the edge message by SIC; the
edge user decodes its own message treating the center message as noise. The
edge message must be decodable at both users, so its rate is limited by the
weaker of the two.

Every evaluator accepts leading batch axes (one per drop) on its channel
arrays and is vectorised over them.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from .beamforming import BeamSet, coordinated_beamformer, effective_gains
from .channel import MimoNetworkChannel, TwoCellScalarChannels
from .rates import shannon_rate

__all__ = [
    "SCHEMES",
    "SchemeResult",
    "SupportBound",
    "noma_pair_rates",
    "noma_jt_rates",
    "noma_dcs_rates",
    "noma_cb_rates",
    "noma_cs_schedule",
    "single_cell_sinr",
    "single_cell_oma_rates",
    "single_cell_noma_rates",
    "noma_tdm_rates",
    "oma_ffr_rates",
    "supported_users",
]

log = logging.getLogger(__name__)

SCHEMES = ("OMA", "OMA-FFR", "NOMA", "NOMA-TDM", "NOMA-JT", "NOMA-CB", "NOMA-DCS", "NOMA-CS")

DEFAULT_CENTER_SHARE = 0.2


@dataclass(frozen=True)
class SchemeResult:
    """Rates of one scheme; the last axis of ``rates`` runs over ``user_ids``.

    ``is_edge`` flags the cell-edge users along that axis. ``normalization``
    is the time or band fraction already applied to the rates.
    """

    scheme: str
    rates: np.ndarray
    user_ids: tuple
    is_edge: np.ndarray
    normalization: float = 1.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.shape[-1] != len(self.user_ids) or len(self.is_edge) != len(self.user_ids):
            raise ValueError("rates, user_ids and is_edge disagree on the number of users")
        if not 0 < self.normalization <= 1:
            raise ValueError("normalization must lie in (0, 1]")
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "is_edge", np.asarray(self.is_edge, dtype=bool))

    def per_user(self) -> list[tuple[Any, float]]:
        if self.rates.ndim != 1:
            raise ValueError("per_user needs a single drop")
        return [(u, float(r)) for u, r in zip(self.user_ids, self.rates)]

    def center_rates(self) -> np.ndarray:
        return self.rates[..., ~self.is_edge]

    def edge_rates(self) -> np.ndarray:
        return self.rates[..., self.is_edge]


def _mimo_users(n: int) -> tuple[tuple, np.ndarray]:
    ids = tuple((c, k, r) for c in range(2) for k in range(n) for r in range(2))
    return ids, np.array([r == 1 for _, _, r in ids])


def _mimo_result(scheme: str, rates: np.ndarray, normalization: float = 1.0, **info) -> SchemeResult:
    n = rates.shape[-2]
    ids, edge = _mimo_users(n)
    flat = rates.reshape(rates.shape[:-3] + (len(ids),))
    return SchemeResult(scheme, flat, ids, edge, normalization, dict(info))


def noma_pair_rates(gc, ge, center_share: float = DEFAULT_CENTER_SHARE, convention: str = "half"):
    """Center and edge rates of one superposed cluster from their effective SNRs.

    ``gc`` and ``ge`` are the SINRs each user would have with the whole beam
    power. Equals the two-user broadcast point whenever ``gc >= ge``.
    """
    b = float(center_share)
    if not 0 <= b <= 1:
        raise ValueError("center_share must lie in [0, 1]")
    gc = np.asarray(gc, dtype=float)
    m = np.minimum(gc, ge)
    rc = shannon_rate(b * gc, convention)
    re = shannon_rate((1.0 - b) * m / (b * m + 1.0), convention)
    return rc, re


# ---------------------------------------------------------------- JT / DCS

_SCALAR_IDS = ("center1", "center2", "edge")
_SCALAR_EDGE = np.array([False, False, True])


def noma_jt_rates(ch: TwoCellScalarChannels, convention: str = "half") -> SchemeResult:
    """Joint transmission: both base stations send the edge message with power ``p_edge``."""
    P, Pc = ch.p_center, ch.p_edge
    C = lambda x: shannon_rate(x, convention)  # noqa: E731
    r1 = C(ch.g11 * P / (ch.g12 * P + 1.0))
    r2 = C(ch.g22 * P / (ch.g21 * P + 1.0))
    s1, s2, se = ch.g11 + ch.g12, ch.g21 + ch.g22, ch.ge1 + ch.ge2
    terms = np.stack(np.broadcast_arrays(
        C(s1 * Pc / (s1 * P + 1.0)),
        C(s2 * Pc / (s2 * P + 1.0)),
        C(se * Pc / (se * P + 1.0)),
    ), axis=-1)
    rc = terms.min(axis=-1)
    rates = np.stack(np.broadcast_arrays(r1, r2, rc), axis=-1)
    return SchemeResult("NOMA-JT", rates, _SCALAR_IDS, _SCALAR_EDGE, info={"edge_terms": terms})


def noma_dcs_rates(ch: TwoCellScalarChannels, convention: str = "half") -> SchemeResult:
    """Dynamic cell selection: the BS with the larger edge gain serves the edge user alone.

    The other BS sends only its center message, with power ``p_center``.
    """
    P, Pc = ch.p_center, ch.p_edge
    C = lambda x: shannon_rate(x, convention)  # noqa: E731
    serve2 = ch.ge2 > ch.ge1  # ties go to BS 1

    # BS 2 serves the edge user
    a1 = C(ch.g11 * P / (ch.g12 * (P + Pc) + 1.0))
    a2 = C(ch.g22 * P / (ch.g21 * P + 1.0))
    ae = np.minimum(C(ch.g22 * Pc / (ch.g22 * P + ch.g21 * P + 1.0)),
                    C(ch.ge2 * Pc / (ch.ge2 * P + ch.ge1 * P + 1.0)))
    # BS 1 serves the edge user
    b1 = C(ch.g11 * P / (ch.g12 * P + 1.0))
    b2 = C(ch.g22 * P / (ch.g21 * (P + Pc) + 1.0))
    be = np.minimum(C(ch.g11 * Pc / (ch.g11 * P + ch.g12 * P + 1.0)),
                    C(ch.ge1 * Pc / (ch.ge1 * P + ch.ge2 * P + 1.0)))

    rates = np.stack(np.broadcast_arrays(np.where(serve2, a1, b1), np.where(serve2, a2, b2),
                                         np.where(serve2, ae, be)), axis=-1)
    return SchemeResult("NOMA-DCS", rates, _SCALAR_IDS, _SCALAR_EDGE,
                        info={"serving_bs": np.where(serve2, 2, 1)})


# ------------------------------------------------------- single-cell MIMO

def _zf_beams(ch: MimoNetworkChannel) -> tuple[np.ndarray, np.ndarray]:
    """Identity precoder and receive zero-forcing against the own cell's other beams."""
    n, K = ch.clusters, ch.antennas
    if n > K:
        raise ValueError(f"{n} clusters per cell need at least {n} antennas")
    batch = ch.batch_shape
    w = np.broadcast_to(np.eye(K, dtype=complex)[:n], batch + (2, n, K))
    # combiner: d minus its projection onto the other beams of the own cell
    H = ch.H
    own = np.stack([H[..., b, b, :, :, :, :] for b in range(2)], axis=-5)  # (..., cell, k, r, K, K)
    cols = own[..., :n]  # column j is beam j of the own BS
    d = np.einsum("...krxk->...krx", cols)  # own beam column
    mask = 1.0 - np.eye(n)[:, None, None, :]  # exclude own beam, (k, 1, 1, j)
    O = cols * mask  # (..., cell, k, r, K, j); the own column is zeroed
    OH = np.conj(np.swapaxes(O, -1, -2))
    gram = OH @ O
    scale = np.trace(gram, axis1=-2, axis2=-1).real + np.sum(np.abs(d) ** 2, axis=-1)
    # the n x n Gram system stays well conditioned, unlike (Q + rho I)^-1 d in K dimensions
    gram = gram + (1e-12 * scale + 1e-300)[..., None, None] * np.eye(n)
    coef = np.linalg.solve(gram, (OH @ d[..., None]))
    v = d - (O @ coef)[..., 0]
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return w, v


def _sinr_from_gains(g: np.ndarray, power: Optional[np.ndarray] = None, ici: bool = True):
    """Desired and interference terms from ``effective_gains`` output.

    ``power[..., bs, cluster]`` scales each beam's power (default one).
    """
    n = g.shape[-1]
    if power is not None:
        g = g * power[..., None, None, None, :, :]
    k = np.arange(n)
    own_mask = np.zeros((2, n, 1, 2, n), dtype=bool)
    for c in range(2):
        own_mask[c, k, 0, c, k] = True
    cross_mask = np.zeros((2, 1, 1, 2, 1), dtype=bool)
    cross_mask[0, 0, 0, 1, 0] = cross_mask[1, 0, 0, 0, 0] = True
    s = np.where(own_mask, g, 0.0).sum(axis=(-2, -1))
    intra = np.where(~own_mask & ~cross_mask, g, 0.0).sum(axis=(-2, -1))
    inter = np.where(cross_mask, g, 0.0).sum(axis=(-2, -1))
    return s, intra + (inter if ici else 0.0)


def single_cell_sinr(ch: MimoNetworkChannel, ici: bool = True) -> np.ndarray:
    """Per-user SINR with the whole beam power, shape ``(..., cell, cluster, role)``."""
    w, v = _zf_beams(ch)
    s, i = _sinr_from_gains(effective_gains(ch, w, v), ici=ici)
    return s / (1.0 + i)


def single_cell_oma_rates(ch: MimoNetworkChannel, convention: str = "half") -> SchemeResult:
    """Each cluster beam serves its two users in alternate halves of the time."""
    return _mimo_result("OMA", 0.5 * shannon_rate(single_cell_sinr(ch), convention))


def _noma_grid(sinr: np.ndarray, center_share: float, convention: str) -> np.ndarray:
    rc, re = noma_pair_rates(sinr[..., 0], sinr[..., 1], center_share, convention)
    return np.stack([rc, re], axis=-1)


def single_cell_noma_rates(ch: MimoNetworkChannel, center_share: float = DEFAULT_CENTER_SHARE,
                           convention: str = "half") -> SchemeResult:
    return _mimo_result("NOMA", _noma_grid(single_cell_sinr(ch), center_share, convention))


def noma_tdm_rates(ch: MimoNetworkChannel, center_share: float = DEFAULT_CENTER_SHARE,
                   convention: str = "half") -> SchemeResult:
    """Cells alternate in time; the active cell sees no inter-cell interference."""
    rates = 0.5 * _noma_grid(single_cell_sinr(ch, ici=False), center_share, convention)
    return _mimo_result("NOMA-TDM", rates, normalization=0.5)


def oma_ffr_rates(ch: MimoNetworkChannel, center_band: float = 0.5, convention: str = "half") -> SchemeResult:
    """Center users share a band fraction ``center_band`` with the other cell.

    Edge users get orthogonal halves of the remainder, free of inter-cell
    interference.
    """
    if not 0 < center_band <= 1:
        raise ValueError("center_band must lie in (0, 1]")
    with_ici = single_cell_sinr(ch, ici=True)
    no_ici = single_cell_sinr(ch, ici=False)
    rates = np.stack([
        center_band * shannon_rate(with_ici[..., 0], convention),
        0.5 * (1.0 - center_band) * shannon_rate(no_ici[..., 1], convention),
    ], axis=-1)
    return _mimo_result("OMA-FFR", rates, normalization=center_band, center_band=center_band)


# ----------------------------------------------------------------- CB / CS

def noma_cb_rates(ch: MimoNetworkChannel, beams: Optional[BeamSet] = None,
                  center_share: float = DEFAULT_CENTER_SHARE, convention: str = "half",
                  **beam_kwargs) -> SchemeResult:
    """Coordinated beamforming; any interference the beams leave over is treated as noise."""
    if beams is None:
        beam_kwargs.setdefault("noise", 1.0)
        beams = coordinated_beamformer(ch, **beam_kwargs)
    s, i = _sinr_from_gains(effective_gains(ch, beams.w, beams.v))
    rates = _noma_grid(s / (1.0 + i), center_share, convention)
    return _mimo_result("NOMA-CB", rates, leakage=beams.leakage, converged=beams.converged)


def _cs_rates(g, action, center_share, convention):
    # action[..., bs, cluster]: True = superposed pair, False = center message only
    power = np.where(action, 1.0, center_share)
    s, i = _sinr_from_gains(g, power)
    # s already carries the beam power; undo it to get full-beam-power SINRs
    own_power = power[..., :, :, None]
    gamma = s / own_power / (1.0 + i)
    rc, re = noma_pair_rates(gamma[..., 0], gamma[..., 1], center_share, convention)
    re = np.where(action, re, 0.0)
    return np.stack([rc, re], axis=-1)


def _cs_objective(rates, action, qos):
    edge = rates[..., 1]
    feasible = np.all(np.where(action, edge >= qos, True), axis=(-2, -1))
    return feasible, rates.sum(axis=(-3, -2, -1))


def noma_cs_schedule(ch: MimoNetworkChannel, qos_min_edge_rate: float = 0.0,
                     center_share: float = DEFAULT_CENTER_SHARE, convention: str = "half",
                     max_sweeps: int = 50) -> SchemeResult:
    """Coordinated scheduling over single-cell zero-forcing beams.

    For every cluster index the two base stations pick one of four joint
    actions (each: superposed pair or center user only). Clusters are
    revisited until no joint action improves the network objective, which
    ranks QoS-feasible schedules first and then network sum rate. If no
    feasible schedule is found the best sum-rate one is returned and
    ``info["qos_infeasible"]`` is set.
    """
    w, v = _zf_beams(ch)
    g = effective_gains(ch, w, v)
    n = ch.clusters
    batch = ch.batch_shape
    action = np.ones(batch + (2, n), dtype=bool)
    rates = _cs_rates(g, action, center_share, convention)
    feas, total = _cs_objective(rates, action, qos_min_edge_rate)
    combos = [(a, b) for a in (True, False) for b in (True, False)]
    for _ in range(max_sweeps):
        changed = np.zeros(batch, dtype=bool)
        for k in range(n):
            for a1, a2 in combos:
                trial = action.copy()
                trial[..., 0, k] = a1
                trial[..., 1, k] = a2
                r = _cs_rates(g, trial, center_share, convention)
                f, t = _cs_objective(r, trial, qos_min_edge_rate)
                better = (f & ~feas) | ((f == feas) & (t > total + 1e-12))
                if np.any(better):
                    action = np.where(better[..., None, None], trial, action)
                    rates = np.where(better[..., None, None, None], r, rates)
                    feas = np.where(better, f, feas)
                    total = np.where(better, t, total)
                    changed |= better
        if not changed.any():
            break
    else:
        log.warning("coordinated scheduling stopped after %d sweeps without settling", max_sweeps)
    return _mimo_result("NOMA-CS", rates, action=action, qos_infeasible=~feas)


# ------------------------------------------------------------ user counts

@dataclass(frozen=True)
class SupportBound:
    """A supported-user count known only as a strict upper bound."""

    limit: int
    text: str

    def __str__(self) -> str:
        return f"<<{self.limit} ({self.text})"


def supported_users(scheme: str, K: int, jt_four_k: bool = False) -> Union[int, SupportBound]:
    """Number of users a scheme can serve with ``K`` antennas per base station.

    Single-cell schemes are counted per cell, the coordinated ones over both
    cells.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if scheme == "NOMA-CB":
        if K == 1:
            warnings.warn("coordinated beamforming cannot null any interference with one antenna", stacklevel=2)
        return 4 * (K - 1)
    if scheme == "NOMA-DCS":
        return 3 * K
    if scheme == "NOMA-JT":
        return 4 * K if jt_four_k else 3 * K
    if scheme == "NOMA-CS":
        return SupportBound(4 * K, "4K")
    if scheme in ("NOMA", "NOMA-TDM"):
        return 2 * K
    if scheme in ("OMA", "OMA-FFR"):
        return K
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
