"""INI-style experiment configuration.

Sections: ``topology``, ``link_budget``, ``schemes``, ``harness``, ``rates``
and one ``region.<id>`` section per rate-region channel. Missing keys fall
back to the shipped defaults, so an empty file is a valid configuration.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields
from typing import Optional

from .channel import LinkBudget, Topology
from .harness import SimConfig
from .rates import RATE_CONVENTIONS

__all__ = ["RegionChannel", "ExperimentConfig", "load_config", "parse_config", "dump_config"]

REGION_KINDS = {"mac": 2, "bc": 2, "ic": 4}


@dataclass(frozen=True)
class RegionChannel:
    """A channel for the rate-region command: ``mac``/``bc`` take two SNRs, ``ic`` takes ``a1, a2, b1, b2``."""

    channel_id: str
    kind: str
    gains: tuple

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {sorted(REGION_KINDS)}")
        g = tuple(float(x) for x in self.gains)
        if len(g) != REGION_KINDS[self.kind]:
            raise ValueError(f"{self.kind} channel {self.channel_id!r} needs {REGION_KINDS[self.kind]} gains")
        object.__setattr__(self, "gains", g)


DEFAULT_REGIONS = (
    RegionChannel("mac", "mac", (1.0, 1.0)),
    RegionChannel("bc", "bc", (3.0, 1.0)),
    RegionChannel("ic", "ic", (10.0, 10.0, 3.0, 3.0)),
)


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    regions: tuple = DEFAULT_REGIONS
    region_grid: int = 1001
    split_grid: int = 41
    weight_grid: int = 25
    jt_four_k: bool = False


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _names(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _points(text: str) -> tuple:
    pts = tuple(_floats(p) for p in text.split(";") if p.strip())
    if any(len(p) != 2 for p in pts):
        raise ValueError(f"expected 'x, y; x, y', got {text!r}")
    return pts


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    known = {"topology", "link_budget", "schemes", "harness", "rates", "region"}
    for name in cp.sections():
        if name.split(".")[0] not in known:
            raise ValueError(f"unknown config section [{name}]")

    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    def check_keys(name, allowed):
        extra = set(sec(name)) - set(allowed)
        if extra:
            raise ValueError(f"unknown key(s) {sorted(extra)} in [{name}]")

    t, d = sec("topology"), Topology()
    check_keys("topology", ["bs_positions", "cell_radius", "center_radius", "pathloss_exponent", "clusters"])
    topo = Topology(
        bs_positions=_points(t["bs_positions"]) if "bs_positions" in t else d.bs_positions,
        cell_radius=float(t.get("cell_radius", d.cell_radius)),
        center_radius=float(t.get("center_radius", d.center_radius)),
        pathloss_exponent=float(t.get("pathloss_exponent", d.pathloss_exponent)),
        clusters=int(t.get("clusters", d.clusters)),
    )
    check_keys("link_budget", [f.name for f in fields(LinkBudget)])
    lb = LinkBudget(**{k: float(v) for k, v in sec("link_budget").items()})

    s, h, r = sec("schemes"), sec("harness"), sec("rates")
    check_keys("schemes", ["enabled", "center_share", "ffr_center_band", "qos_min_edge_rate",
                           "cb_max_iter", "cb_tol", "jt_four_k"])
    check_keys("harness", ["trials", "seed", "antennas", "chunk_size", "locations"])
    check_keys("rates", ["convention"])
    base = SimConfig()
    conv = r.get("convention", base.rate_convention)
    if conv not in RATE_CONVENTIONS:
        raise ValueError(f"unknown rate convention {conv!r}")
    sim = SimConfig(
        schemes=_names(s["enabled"]) if "enabled" in s else base.schemes,
        trials=int(h.get("trials", base.trials)),
        seed=int(h.get("seed", base.seed)),
        topology=topo,
        link_budget=lb,
        antennas=int(h.get("antennas", base.antennas)),
        center_share=float(s.get("center_share", base.center_share)),
        ffr_center_band=float(s.get("ffr_center_band", base.ffr_center_band)),
        qos_min_edge_rate=float(s.get("qos_min_edge_rate", base.qos_min_edge_rate)),
        cb_max_iter=int(s.get("cb_max_iter", base.cb_max_iter)),
        cb_tol=float(s.get("cb_tol", base.cb_tol)),
        locations=_floats(h["locations"]) if "locations" in h else base.locations,
        rate_convention=conv,
        chunk_size=int(h.get("chunk_size", base.chunk_size)),
    )
    jt4 = cp.getboolean("schemes", "jt_four_k", fallback=False)

    regions = []
    reg_base = sec("region")
    check_keys("region", ["grid", "split_grid", "weight_grid"])
    for name in cp.sections():
        if name.startswith("region."):
            body = cp[name]
            extra = set(body) - {"kind", "gains"}
            if extra:
                raise ValueError(f"unknown key(s) {sorted(extra)} in [{name}]")
            if "kind" not in body or "gains" not in body:
                raise ValueError(f"[{name}] needs 'kind' and 'gains'")
            regions.append(RegionChannel(name[len("region."):], body["kind"].strip(), _floats(body["gains"])))
    e = ExperimentConfig()
    return ExperimentConfig(
        sim=sim,
        regions=tuple(regions) if regions else e.regions,
        region_grid=int(reg_base.get("grid", e.region_grid)),
        split_grid=int(reg_base.get("split_grid", e.split_grid)),
        weight_grid=int(reg_base.get("weight_grid", e.weight_grid)),
        jt_four_k=jt4,
    )


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialise ``cfg`` so that ``parse_config(dump_config(cfg)) == cfg``."""
    s, t, lb = cfg.sim, cfg.sim.topology, cfg.sim.link_budget
    cp = configparser.ConfigParser(interpolation=None)
    cp["topology"] = {
        "bs_positions": "; ".join(f"{_fmt(x)}, {_fmt(y)}" for x, y in t.bs_positions),
        "cell_radius": _fmt(t.cell_radius),
        "center_radius": _fmt(t.center_radius),
        "pathloss_exponent": _fmt(t.pathloss_exponent),
        "clusters": _fmt(t.clusters),
    }
    cp["link_budget"] = {f.name: _fmt(float(getattr(lb, f.name))) for f in fields(LinkBudget)}
    cp["schemes"] = {
        "enabled": ", ".join(s.schemes),
        "center_share": _fmt(s.center_share),
        "ffr_center_band": _fmt(s.ffr_center_band),
        "qos_min_edge_rate": _fmt(s.qos_min_edge_rate),
        "cb_max_iter": _fmt(s.cb_max_iter),
        "cb_tol": _fmt(s.cb_tol),
        "jt_four_k": _fmt(cfg.jt_four_k),
    }
    cp["harness"] = {
        "trials": _fmt(s.trials),
        "seed": _fmt(s.seed),
        "antennas": _fmt(s.antennas),
        "chunk_size": _fmt(s.chunk_size),
        "locations": ", ".join(_fmt(x) for x in s.locations),
    }
    cp["rates"] = {"convention": s.rate_convention}
    cp["region"] = {"grid": _fmt(cfg.region_grid), "split_grid": _fmt(cfg.split_grid),
                    "weight_grid": _fmt(cfg.weight_grid)}
    for ch in cfg.regions:
        cp[f"region.{ch.channel_id}"] = {"kind": ch.kind, "gains": ", ".join(_fmt(g) for g in ch.gains)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
