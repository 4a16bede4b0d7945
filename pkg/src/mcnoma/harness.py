"""Monte Carlo evaluation of the two-cell schemes.

Trials are cut into fixed-size chunks. Each chunk regenerates its channels from
``(seed, trial)`` alone and evaluates every scheme on the same draws, so the
output depends only on the configuration and never on the number of workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .channel import LinkBudget, MimoNetworkChannel, Topology, TwoCellScalarChannels, sample_network
from .rates import RATE_CONVENTIONS, bits_per_hz
from .schemes import (
    DEFAULT_CENTER_SHARE,
    SCHEMES,
    noma_cb_rates,
    noma_cs_schedule,
    noma_dcs_rates,
    noma_jt_rates,
    noma_tdm_rates,
    oma_ffr_rates,
    single_cell_noma_rates,
    single_cell_oma_rates,
)

__all__ = [
    "SimConfig",
    "TrialResults",
    "CdfSummary",
    "SweepRow",
    "run_trials",
    "sweep_edge_location",
    "summarize_cdf",
    "DEFAULT_LOCATIONS",
]

log = logging.getLogger(__name__)

DEFAULT_LOCATIONS = tuple(round(0.025 * i, 3) for i in range(1, 11))


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a simulation run. Rates are reported in bits/s/Hz."""

    schemes: tuple = SCHEMES
    trials: int = 2000
    seed: int = 42
    topology: Topology = field(default_factory=Topology)
    link_budget: LinkBudget = field(default_factory=LinkBudget)
    antennas: int = 4
    center_share: float = DEFAULT_CENTER_SHARE
    ffr_center_band: float = 0.5
    qos_min_edge_rate: float = 0.5
    cb_max_iter: int = 20
    cb_tol: float = 1e-6
    locations: tuple = DEFAULT_LOCATIONS
    rate_convention: str = "half"
    chunk_size: int = 100

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "locations", tuple(float(x) for x in self.locations))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"unknown scheme(s) {unknown}; expected some of {', '.join(SCHEMES)}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ValueError("duplicate scheme ids")
        if self.rate_convention not in RATE_CONVENTIONS:
            raise ValueError(f"unknown rate convention {self.rate_convention!r}")
        if not 0 <= self.center_share <= 1:
            raise ValueError("center_share must lie in [0, 1]")
        if not 0 < self.ffr_center_band <= 1:
            raise ValueError("ffr_center_band must lie in (0, 1]")
        if self.antennas < self.topology.clusters:
            raise ValueError("need at least as many antennas as clusters per cell")
        if self.chunk_size < 1 or self.cb_max_iter < 1:
            raise ValueError("chunk_size and cb_max_iter must be positive")


@dataclass
class TrialResults:
    """Per-scheme rate samples in bits/s/Hz.

    ``rates[s]`` has one row per kept trial (in trial order) and one column
    per user; ``is_edge[s]`` flags the edge-user columns.
    """

    rates: dict
    is_edge: dict
    trials: np.ndarray
    skipped: list
    channel_hashes: list

    def center(self, scheme: str) -> np.ndarray:
        return self.rates[scheme][:, ~self.is_edge[scheme]].ravel()

    def edge(self, scheme: str) -> np.ndarray:
        return self.rates[scheme][:, self.is_edge[scheme]].ravel()

    def all_users(self, scheme: str) -> np.ndarray:
        return self.rates[scheme].ravel()


def _scalar_flat(result):
    # (t, n, 3) -> (t, 3n), cluster-major
    r = result.rates
    return r.reshape(r.shape[0], -1), np.tile(result.is_edge, r.shape[1])


def _evaluate(cfg: SimConfig, mimo: MimoNetworkChannel, scalar: TwoCellScalarChannels) -> dict:
    conv = cfg.rate_convention
    out = {}
    for s in cfg.schemes:
        if s == "OMA":
            res = single_cell_oma_rates(mimo, conv)
        elif s == "OMA-FFR":
            res = oma_ffr_rates(mimo, cfg.ffr_center_band, conv)
        elif s == "NOMA":
            res = single_cell_noma_rates(mimo, cfg.center_share, conv)
        elif s == "NOMA-TDM":
            res = noma_tdm_rates(mimo, cfg.center_share, conv)
        elif s == "NOMA-CB":
            res = noma_cb_rates(mimo, center_share=cfg.center_share, convention=conv,
                                tol=cfg.cb_tol, max_iter=cfg.cb_max_iter, noise=1.0)
        elif s == "NOMA-CS":
            qos = cfg.qos_min_edge_rate * RATE_CONVENTIONS[conv]
            res = noma_cs_schedule(mimo, qos, cfg.center_share, conv)
        elif s in ("NOMA-JT", "NOMA-DCS"):
            fn = noma_jt_rates if s == "NOMA-JT" else noma_dcs_rates
            rates, edge = _scalar_flat(fn(scalar, conv))
            out[s] = (bits_per_hz(rates, conv), edge)
            continue
        else:  # pragma: no cover - guarded by SimConfig
            raise ValueError(s)
        out[s] = (bits_per_hz(res.rates.reshape(res.rates.shape[0], -1), conv), res.is_edge)
    for s, (r, _) in out.items():
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise FloatingPointError(f"{s} produced invalid rates")
    return out


def _sample_batch(cfg: SimConfig, trials: Sequence[int], edge_distance: Optional[float]):
    samples = [sample_network(cfg.seed, cfg.topology, cfg.link_budget, cfg.antennas, t, edge_distance,
                              cfg.center_share) for t in trials]
    mimo = MimoNetworkChannel(np.stack([s.mimo.H for s in samples]))
    sc = samples[0].scalar
    scalar = TwoCellScalarChannels(
        *(np.stack([getattr(s.scalar, f) for s in samples]) for f in ("g11", "g12", "g21", "g22", "ge1", "ge2")),
        p_center=sc.p_center, p_edge=sc.p_edge,
    )
    hashes = [s.mimo.digest() for s in samples]
    return mimo, scalar, hashes


def _take(scalar: TwoCellScalarChannels, i: int) -> TwoCellScalarChannels:
    return TwoCellScalarChannels(scalar.g11[i:i + 1], scalar.g12[i:i + 1], scalar.g21[i:i + 1],
                                 scalar.g22[i:i + 1], scalar.ge1[i:i + 1], scalar.ge2[i:i + 1],
                                 scalar.p_center, scalar.p_edge)


def _run_chunk(args):
    cfg, start, stop, edge_distance = args
    trials = list(range(start, stop))
    mimo, scalar, hashes = _sample_batch(cfg, trials, edge_distance)
    try:
        res = _evaluate(cfg, mimo, scalar)
        return trials, [], hashes, res
    except Exception as exc:  # fall back to one trial at a time to isolate the failure
        log.warning("chunk %d-%d failed (%s); retrying trial by trial", start, stop - 1, exc)
    kept, skipped, parts = [], [], []
    for i, t in enumerate(trials):
        try:
            parts.append(_evaluate(cfg, MimoNetworkChannel(mimo.H[i:i + 1]), _take(scalar, i)))
            kept.append(i)
        except Exception as exc:
            log.warning("trial %d skipped for all schemes: %s", t, exc)
            skipped.append(t)
    res = {}
    for s in cfg.schemes:
        if parts:
            res[s] = (np.concatenate([p[s][0] for p in parts]), parts[0][s][1])
    return [trials[i] for i in kept], skipped, [hashes[i] for i in kept], res


def _chunks(cfg: SimConfig, edge_distance):
    return [(cfg, s, min(s + cfg.chunk_size, cfg.trials), edge_distance)
            for s in range(0, cfg.trials, cfg.chunk_size)]


def run_trials(cfg: SimConfig, workers: int = 1, edge_distance: Optional[float] = None) -> TrialResults:
    """Evaluate every configured scheme on ``cfg.trials`` paired channel draws.

    A trial whose evaluation fails for any scheme is dropped for all of them
    and listed in ``skipped``.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if edge_distance is not None and not 0 < edge_distance <= cfg.topology.cell_radius:
        raise ValueError(f"edge location {edge_distance} km outside (0, {cfg.topology.cell_radius}]")
    jobs = _chunks(cfg, edge_distance)
    if workers == 1 or len(jobs) == 1:
        outs = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(_run_chunk, jobs))

    rates = {s: [] for s in cfg.schemes}
    is_edge = {}
    kept, skipped, hashes = [], [], []
    for trials, skip, hsh, res in outs:
        kept += trials
        skipped += skip
        hashes += hsh
        for s, (r, e) in res.items():
            rates[s].append(r)
            is_edge[s] = e
    if not kept:
        raise RuntimeError("every trial failed")
    if skipped:
        log.warning("%d of %d trials skipped", len(skipped), cfg.trials)
    return TrialResults(
        rates={s: np.concatenate(v) for s, v in rates.items()},
        is_edge=is_edge,
        trials=np.array(kept),
        skipped=skipped,
        channel_hashes=hashes,
    )


@dataclass(frozen=True)
class CdfSummary:
    """Empirical distribution of a set of samples."""

    samples: np.ndarray
    mean: float

    def percentile(self, p: float) -> float:
        if not 0 <= p <= 100:
            raise ValueError("percentile must lie in [0, 100]")
        return float(np.percentile(self.samples, p, method="linear"))

    def cdf(self, x) -> np.ndarray:
        return np.searchsorted(self.samples, x, side="right") / self.samples.size


def summarize_cdf(samples) -> CdfSummary:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("need at least one sample")
    x.setflags(write=False)
    return CdfSummary(x, float(np.mean(x)))


@dataclass(frozen=True)
class SweepRow:
    location_km: float
    scheme: str
    center_rate: float
    edge_rate: float


def sweep_edge_location(cfg: SimConfig, locations: Optional[Sequence[float]] = None,
                        workers: int = 1) -> list[SweepRow]:
    """Mean center and edge spectral efficiency with the edge users pinned at each location."""
    locs = cfg.locations if locations is None else tuple(float(x) for x in locations)
    if not locs:
        raise ValueError("no sweep locations")
    for d in locs:
        if not 0 < d <= cfg.topology.cell_radius:
            raise ValueError(f"edge location {d} km outside (0, {cfg.topology.cell_radius}]")
    rows = []
    for d in locs:
        res = run_trials(cfg, workers, edge_distance=d)
        for s in cfg.schemes:
            rows.append(SweepRow(d, s, float(res.center(s).mean()), float(res.edge(s).mean())))
    return rows


def with_overrides(cfg: SimConfig, **kw) -> SimConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
