"""Two-cell topology, user drops and Rayleigh-faded MIMO channels.

Every random draw comes from a counter-based generator keyed by
``(seed, trial, stream)``, so a trial can be regenerated in isolation and
results do not depend on how trials are distributed over workers.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

__all__ = [
    "Topology",
    "LinkBudget",
    "UserDrop",
    "MimoNetworkChannel",
    "TwoCellScalarChannels",
    "trial_rng",
    "drop_users",
    "link_gain",
    "rayleigh",
    "sample_network",
    "MIN_DISTANCE_KM",
]

log = logging.getLogger(__name__)

MIN_DISTANCE_KM = 0.001

# substream ids within one trial
STREAM_DROP = 0
STREAM_FADING = 1

CENTER, EDGE = 0, 1


@dataclass(frozen=True)
class Topology:
    bs_positions: tuple = ((0.0, 0.0), (0.5, 0.0))
    cell_radius: float = 0.25
    center_radius: float = 0.125
    pathloss_exponent: float = 4.0
    clusters: int = 4

    def __post_init__(self):
        if len(self.bs_positions) != 2:
            raise ValueError("exactly two base stations are modelled")
        object.__setattr__(self, "bs_positions", tuple(tuple(map(float, p)) for p in self.bs_positions))
        if not self.cell_radius > self.center_radius > 0:
            raise ValueError("need cell_radius > center_radius > 0")
        if not self.pathloss_exponent > 2:
            raise ValueError("path-loss exponent must exceed 2")
        if self.clusters < 1:
            raise ValueError("need at least one cluster per cell")

    @property
    def bs_array(self) -> np.ndarray:
        return np.array(self.bs_positions)


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power and noise. ``intercept_db`` is an extra path loss applied to every link."""

    tx_power: float = 10.0
    noise_psd: float = 1e-10
    bandwidth: float = 10e6
    intercept_db: float = 50.0

    def __post_init__(self):
        for name in ("tx_power", "noise_psd", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not np.isfinite(self.intercept_db):
            raise ValueError("intercept_db must be finite")

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth

    def snr(self, large_scale_gain):
        """Mean received SNR for a given large-scale gain."""
        return self.tx_power * np.asarray(large_scale_gain) * 10.0 ** (-self.intercept_db / 10.0) / self.noise_power


@dataclass(frozen=True)
class UserDrop:
    """User positions in km, shape ``(2, clusters, 2, 2)`` indexed ``[cell, cluster, role, xy]``.

    ``role`` 0 is the cell-center user, 1 the cell-edge user.
    """

    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 4 or pos.shape[0] != 2 or pos.shape[2:] != (2, 2):
            raise ValueError(f"positions must have shape (2, n, 2, 2), got {pos.shape}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def clusters(self) -> int:
        return self.positions.shape[1]

    def distances(self, topo: Topology) -> np.ndarray:
        """Distance from every BS to every user, shape ``(2, 2, n, 2)`` indexed ``[bs, cell, cluster, role]``."""
        bs = topo.bs_array[:, None, None, None, :]
        return np.linalg.norm(self.positions[None] - bs, axis=-1)


@dataclass(frozen=True)
class MimoNetworkChannel:
    """Noise-normalised channel matrices.

    ``H[..., b, c, k, r]`` is the ``K x K`` matrix from BS ``b`` to the user of
    cell ``c``, cluster ``k``, role ``r`` (0 center, 1 edge). Leading axes, if
    any, index independent drops. Each matrix already includes the transmit
    power of one cluster beam, i.e. total power divided by the cluster count.
    """

    H: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim < 6 or H.shape[-6:-4] != (2, 2) or H.shape[-3] != 2 or H.shape[-1] != H.shape[-2]:
            raise ValueError(f"H must have shape (..., 2, 2, n, 2, K, K), got {H.shape}")
        object.__setattr__(self, "H", H)

    @property
    def antennas(self) -> int:
        return self.H.shape[-1]

    @property
    def clusters(self) -> int:
        return self.H.shape[-4]

    @property
    def batch_shape(self) -> tuple:
        return self.H.shape[:-6]

    def without_ici(self) -> "MimoNetworkChannel":
        """Copy with every cross-cell link set to zero."""
        H = self.H.copy()
        H[..., 0, 1, :, :, :, :] = 0
        H[..., 1, 0, :, :, :, :] = 0
        return MimoNetworkChannel(H)

    def scaled(self, c: complex) -> "MimoNetworkChannel":
        return MimoNetworkChannel(self.H * c)

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.H).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class TwoCellScalarChannels:
    """Single-antenna view used by joint transmission and dynamic cell selection.

    ``g11`` is the gain from BS 1 to center user 1, ``g12`` from BS 2 to center
    user 1, ``g21``/``g22`` likewise for center user 2, ``ge1``/``ge2`` from BS 1
    and BS 2 to the shared edge user. Fields may be arrays of equal shape.
    """

    g11: np.ndarray
    g12: np.ndarray
    g21: np.ndarray
    g22: np.ndarray
    ge1: np.ndarray
    ge2: np.ndarray
    p_center: float = 1.0
    p_edge: float = 1.0

    def __post_init__(self):
        for name in ("g11", "g12", "g21", "g22", "ge1", "ge2"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ValueError(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, v)
        if not (self.p_center >= 0 and self.p_edge >= 0):
            raise ValueError("powers must be non-negative")

    def swapped(self) -> "TwoCellScalarChannels":
        """Relabel the two base stations (and with them the two center users)."""
        return TwoCellScalarChannels(self.g22, self.g21, self.g12, self.g11, self.ge2, self.ge1,
                                     self.p_center, self.p_edge)


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def _uniform_annulus(rng: np.random.Generator, r_in: float, r_out: float, size) -> np.ndarray:
    # area-uniform: radius via inverse CDF of r^2
    u = rng.random(size)
    r = np.sqrt(r_in ** 2 + (r_out ** 2 - r_in ** 2) * u)
    theta = 2.0 * np.pi * rng.random(size)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def drop_users(seed: int, topo: Topology, trial: int = 0,
               edge_distance: Optional[float] = None) -> UserDrop:
    """Area-uniform drop of one center and one edge user per cluster in each cell.

    With ``edge_distance`` every edge user is placed on the line joining the
    two base stations, at that distance from its own BS towards the other.
    """
    rng = trial_rng(seed, trial, STREAM_DROP)
    n = topo.clusters
    bs = topo.bs_array
    center = _uniform_annulus(rng, 0.0, topo.center_radius, (2, n))
    edge = _uniform_annulus(rng, topo.center_radius, topo.cell_radius, (2, n))
    if edge_distance is not None:
        if not 0 < edge_distance <= topo.cell_radius:
            raise ValueError(f"edge distance must lie in (0, {topo.cell_radius}] km")
        axis = bs[1] - bs[0]
        axis = axis / np.linalg.norm(axis)
        edge = np.empty((2, n, 2))
        edge[0] = edge_distance * axis
        edge[1] = -edge_distance * axis
    pos = np.stack([center, edge], axis=2) + bs[:, None, None, :]
    return UserDrop(pos)


def link_gain(distance_km, topo: Topology):
    """Large-scale gain ``d^-exponent`` with distances in km."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d < MIN_DISTANCE_KM):
        log.info("clamping %d distance(s) below %g km", int(np.sum(d < MIN_DISTANCE_KM)), MIN_DISTANCE_KM)
        d = np.maximum(d, MIN_DISTANCE_KM)
    out = d ** (-topo.pathloss_exponent)
    return float(out) if out.ndim == 0 else out


def rayleigh(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. unit-variance circularly-symmetric complex Gaussian entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


class NetworkSample(NamedTuple):
    drop: UserDrop
    mimo: MimoNetworkChannel
    scalar: TwoCellScalarChannels


def sample_network(seed: int, topo: Topology, lb: LinkBudget, antennas: int = 4, trial: int = 0,
                   edge_distance: Optional[float] = None, center_share: float = 0.2) -> NetworkSample:
    """Drop users and draw every BS-to-user channel for one trial.

    The scalar view groups, for cluster index ``k``, the two center users of
    cluster ``k`` with the edge user of cell ``k mod 2``. Its gains are the
    Frobenius-normalised MIMO gains ``snr * ||G||_F^2 / K^2``, and the message
    powers are the center/edge shares of one cluster beam.
    """
    if antennas < 1:
        raise ValueError("need at least one antenna")
    drop = drop_users(seed, topo, trial, edge_distance)
    n, K = topo.clusters, antennas
    snr = lb.snr(link_gain(drop.distances(topo), topo))  # (bs, cell, k, role)
    g = rayleigh(trial_rng(seed, trial, STREAM_FADING), (2, 2, n, 2, K, K))
    H = np.sqrt(snr / n)[..., None, None] * g
    mimo = MimoNetworkChannel(H)

    gain = snr * np.sum(np.abs(g) ** 2, axis=(-2, -1)) / K ** 2  # (bs, cell, k, role)
    k = np.arange(n)
    ec = k % 2
    scalar = TwoCellScalarChannels(
        g11=gain[0, 0, :, CENTER], g12=gain[1, 0, :, CENTER],
        g21=gain[0, 1, :, CENTER], g22=gain[1, 1, :, CENTER],
        ge1=gain[0, ec, k, EDGE], ge2=gain[1, ec, k, EDGE],
        p_center=center_share / n, p_edge=(1.0 - center_share) / n,
    )
    return NetworkSample(drop, mimo, scalar)
