"""Command-line interface: ``mcnoma region|simulate|sweep|users``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import warnings
from contextlib import contextmanager
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, RegionChannel, load_config
from .harness import run_trials, summarize_cdf, sweep_edge_location
from .interference import IcChannel, hk_basic_frontier, hk_timeshare_frontier, ic_oma_frontier
from .schemes import SCHEMES, supported_users
from .single_cell import TwoUserGains, bc_noma_frontier, bc_oma_frontier, mac_noma_frontier, mac_oma_frontier

log = logging.getLogger("mcnoma")

REGION_SCHEMES = {
    "mac": ("OMA", "OMA-PC", "NOMA"),
    "bc": ("OMA", "NOMA"),
    "ic": ("OMA", "NOMA", "TS"),
}

# per-cell counts for single-cell schemes, network-wide for the coordinated ones
_USER_SCOPE = {"OMA": "per cell", "OMA-FFR": "per cell", "NOMA": "per cell", "NOMA-TDM": "per cell"}


def fmt(x: float) -> str:
    return "%.9g" % x


@contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _filter(requested: Optional[str], allowed: Sequence[str], default: Sequence[str]) -> tuple:
    if requested is None or not requested.strip():
        return tuple(default)
    names = tuple(x.strip() for x in requested.split(",") if x.strip())
    bad = [x for x in names if x not in allowed]
    if bad:
        raise ValueError(f"unknown scheme(s) {bad}; expected some of {', '.join(allowed)}")
    return names


def region_frontiers(ch: RegionChannel, cfg: ExperimentConfig):
    """Yield ``(scheme, frontier)`` for every curve of one region channel."""
    if ch.kind == "mac":
        g = TwoUserGains(*ch.gains)
        yield "OMA", mac_oma_frontier(g, False, cfg.region_grid)
        yield "OMA-PC", mac_oma_frontier(g, True, cfg.region_grid)
        yield "NOMA", mac_noma_frontier(g)
    elif ch.kind == "bc":
        g = TwoUserGains(*ch.gains)
        yield "OMA", bc_oma_frontier(g, cfg.region_grid)
        yield "NOMA", bc_noma_frontier(g, cfg.region_grid)
    else:
        ic = IcChannel(*ch.gains)
        yield "OMA", ic_oma_frontier(ic, cfg.region_grid)
        yield "NOMA", hk_basic_frontier(ic, cfg.split_grid, cfg.weight_grid)
        yield "TS", hk_timeshare_frontier(ic, cfg.split_grid, cfg.weight_grid, cfg.region_grid)


def cmd_region(args, cfg: ExperimentConfig) -> None:
    allowed = sorted({s for v in REGION_SCHEMES.values() for s in v})
    wanted = set(_filter(args.schemes, allowed, allowed))
    rows = []
    for ch in cfg.regions:
        for scheme, front in region_frontiers(ch, cfg):
            if scheme in wanted:
                rows.extend((ch.channel_id, scheme, fmt(a), fmt(b)) for a, b in front.points)
    with _open_out(args.out) as fh:
        w = _writer(fh)
        w.writerow(["channel_id", "scheme", "r1", "r2"])
        w.writerows(rows)


def _sim_config(args, cfg: ExperimentConfig):
    sim = cfg.sim
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.trials is not None:
        kw["trials"] = args.trials
    kw["schemes"] = _filter(args.schemes, SCHEMES, sim.schemes)
    return replace(sim, **kw)


def cmd_simulate(args, cfg: ExperimentConfig) -> None:
    sim = _sim_config(args, cfg)
    res = run_trials(sim, workers=args.workers)
    with _open_out(args.out) as fh:
        w = _writer(fh)
        w.writerow(["scheme", "user_class", "rate_bps_hz"])
        for s in sim.schemes:
            r, edge = res.rates[s], res.is_edge[s]
            cls = np.where(edge, "edge", "center")
            for row in r:
                w.writerows((s, c, fmt(x)) for c, x in zip(cls, row))
        fh.write("\n")
        w.writerow(["scheme", "mean", "p05"])
        for s in sim.schemes:
            c = summarize_cdf(res.all_users(s))
            w.writerow([s, fmt(c.mean), fmt(c.percentile(5))])
    if res.skipped:
        print(f"warning: {len(res.skipped)} trial(s) skipped", file=sys.stderr)


def cmd_sweep(args, cfg: ExperimentConfig) -> None:
    sim = _sim_config(args, cfg)
    rows = sweep_edge_location(sim, workers=args.workers)
    with _open_out(args.out) as fh:
        w = _writer(fh)
        w.writerow(["location_km", "scheme", "center_rate", "edge_rate"])
        for r in rows:
            w.writerow([fmt(r.location_km), r.scheme, fmt(r.center_rate), fmt(r.edge_rate)])


def cmd_users(args, cfg: ExperimentConfig) -> None:
    K = args.antennas if args.antennas is not None else cfg.sim.antennas
    schemes = _filter(args.schemes, SCHEMES, SCHEMES)
    jt4 = cfg.jt_four_k or args.jt_four_k
    rows = []
    for s in schemes:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            n = supported_users(s, K, jt_four_k=jt4)
        for wmsg in caught:
            print(f"warning: {s}: {wmsg.message}", file=sys.stderr)
        rows.append((s, str(K), str(n), _USER_SCOPE.get(s, "network")))
    with _open_out(args.out) as fh:
        w = _writer(fh)
        w.writerow(["scheme", "K", "supported_users", "scope"])
        w.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcnoma", description="Multi-cell NOMA rate regions and system simulation")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI configuration file (defaults built in)")
        sp.add_argument("--out", help="output CSV path; '-' or omitted for stdout")
        sp.add_argument("--schemes", help="comma-separated scheme filter; empty means all")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("region", help="rate-region frontiers for mac, bc and ic channels")
    common(sp)
    sp.set_defaults(func=cmd_region)

    for name, func, helptext in (("simulate", cmd_simulate, "per-user throughput samples and summary"),
                                 ("sweep", cmd_sweep, "mean rates versus edge-user location")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--workers", type=int, default=1)
        sp.set_defaults(func=func)

    sp = sub.add_parser("users", help="number of supported users per scheme")
    common(sp)
    sp.add_argument("--antennas", type=int, help="antennas per base station, K")
    sp.add_argument("--jt-four-k", action="store_true", help="count the 4K joint-transmission variant")
    sp.set_defaults(func=cmd_users)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # configparser errors and anything unexpected
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
