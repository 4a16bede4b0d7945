"""Coordinated two-cell beamforming for clustered NOMA.

Each cell serves ``n`` clusters with one transmit beam per cluster; both users
of a cluster share that beam. A beam must not reach

* the users of the other clusters in its own cell (inter-cluster interference),
* the edge users of the other cell (inter-cell interference).

Cell-center users are assumed to be shielded from the other cell by path
loss, so only edge users count as inter-cell victims.

The design alternates between receive combiners and transmit beams. With the
beams fixed, every combiner is ``(Q + rho I)^-1 d`` where ``Q`` is the
interference covariance and ``d`` the desired effective channel; with the
combiners fixed, every beam is the top generalized eigenvector of the
desired-signal matrix against the leakage matrix it causes. When a zero-forcing
solution exists these converge to its null-space projections; ``rho`` is only
a tiny regulariser unless ``noise`` is given.

All arrays may carry leading batch axes, one per independent drop.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import MimoNetworkChannel

__all__ = ["BeamSet", "coordinated_beamformer", "interference_mask", "leakage", "effective_gains"]

REL_REG = 1e-12


@lru_cache(maxsize=None)
def interference_mask(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(interf, own)`` masks of shape ``(users, beams)``.

    Users are flattened from ``(cell, cluster, role)``, beams from
    ``(bs, cluster)``.
    """
    U, B = 4 * n, 2 * n
    interf = np.zeros((U, B))
    own = np.zeros((U, B))
    for c in range(2):
        for k in range(n):
            for r in range(2):
                u = (c * n + k) * 2 + r
                for b in range(2):
                    for j in range(n):
                        beam = b * n + j
                        if (b, j) == (c, k):
                            own[u, beam] = 1.0
                        elif b == c or r == 1:
                            interf[u, beam] = 1.0
    interf.setflags(write=False)
    own.setflags(write=False)
    return interf, own


@dataclass(frozen=True)
class BeamSet:
    """Unit-norm beams ``w[..., bs, cluster, :]`` and combiners ``v[..., cell, cluster, role, :]``.

    ``converged`` is false where the iteration stopped before the leakage
    reached the requested tolerance; ``leakage`` is then the best-effort value.
    """

    w: np.ndarray
    v: np.ndarray
    leakage: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray


def _flat(H: np.ndarray) -> tuple[np.ndarray, tuple]:
    batch = H.shape[:-6]
    n, K = H.shape[-4], H.shape[-1]
    return H.reshape((-1, 2, 4 * n, K, K)), batch


def _effective(Hf: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``G[t, u, beam, :] = H[bs(beam), u] @ w[beam]``."""
    T, _, U, K, _ = Hf.shape
    n = w.shape[2]
    HW = Hf @ np.swapaxes(w, -1, -2)[:, :, None]  # (T, 2, U, K, n)
    return np.ascontiguousarray(np.moveaxis(HW, 1, 2).swapaxes(-1, -2)).reshape(T, U, 2 * n, K)


def _amplitudes(G: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (G @ v.conj()[..., None])[..., 0]


def _leakage(G: np.ndarray, v: np.ndarray, interf: np.ndarray) -> np.ndarray:
    return (np.abs(_amplitudes(G, v)) ** 2 * interf).sum(axis=(-2, -1))


def _normalize(x: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.where(nrm > 0, nrm, 1.0)


def _own_beam(n: int) -> np.ndarray:
    # flattened user (c, k, r) is served by beam (c, k)
    return np.repeat(np.arange(2 * n), 2)


def _update_combiners(G, interf, own, noise):
    T, U, B, K = G.shape
    Gm = G * interf[..., None]
    Q = np.swapaxes(Gm, -1, -2) @ Gm.conj()
    d = G[:, np.arange(U), _own_beam(B // 2)]
    scale = np.trace(Q, axis1=-2, axis2=-1).real + np.sum(np.abs(d) ** 2, axis=-1)
    rho = noise + REL_REG * scale + 1e-300
    A = Q + rho[..., None, None] * np.eye(K)
    return _normalize(np.linalg.solve(A, d[..., None])[..., 0])


def _update_beams(Hf, v, interf, own, n):
    T, _, U, K, _ = Hf.shape
    r = (v.conj()[:, None, :, None, :] @ Hf)[..., 0, :]  # rows v^H H[b, u], (T, 2, U, K)
    im = np.moveaxis(interf.reshape(U, 2, n), 0, -1)  # (2, n, U)
    X = im[None, :, :, :, None] * r[:, :, None]  # (T, 2, n, U, K)
    Qw = np.swapaxes(X.conj(), -1, -2) @ X
    mine = r.reshape(T, 2, 2, n, 2, K)[:, [0, 1], [0, 1]]  # own-cell rows, (T, 2, n, 2, K)
    D = np.swapaxes(mine.conj(), -1, -2) @ mine
    scale = np.trace(Qw, axis1=-2, axis2=-1).real + np.trace(D, axis1=-2, axis2=-1).real
    Bm = Qw + (REL_REG * scale + 1e-300)[..., None, None] * np.eye(K)
    L = np.linalg.cholesky(Bm)
    Linv = np.linalg.inv(L)
    LinvH = np.conj(np.swapaxes(Linv, -1, -2))
    M = Linv @ D @ LinvH
    M = 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))
    _, vec = np.linalg.eigh(M)
    w = (LinvH @ vec[..., -1:])[..., 0]
    return _normalize(w)


def _initial_beams(Hf: np.ndarray, n: int) -> np.ndarray:
    # dominant right singular vector of each cluster's edge-user channel
    T, _, U, K, _ = Hf.shape
    H = Hf.reshape(T, 2, 2, n, 2, K, K)
    own_edge = np.stack([H[:, b, b, :, 1] for b in range(2)], axis=1)  # (T, 2, n, K, K)
    _, _, vh = np.linalg.svd(own_edge)
    return vh[..., 0, :].conj()


def coordinated_beamformer(ch: MimoNetworkChannel, tol: float = 1e-6, max_iter: int = 500,
                           noise: float = 0.0, stall_tol: float = 1e-10) -> BeamSet:
    """Alternating design of zero-interference beams and combiners.

    Stops per drop once the leakage is at most ``tol`` (converged) or its
    relative change falls below ``stall_tol`` or ``max_iter`` is reached (not
    converged). ``noise`` > 0 turns the combiner into an MMSE-style receiver.

    Raises ``ValueError`` when more clusters than antennas are requested,
    since the beams of one cell then cannot be separated at all.
    """
    n, K = ch.clusters, ch.antennas
    if n > K:
        raise ValueError(f"{n} clusters per cell cannot be separated with {K} antennas")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    interf, own = interference_mask(n)
    Hf, batch = _flat(ch.H)
    T = Hf.shape[0]

    w = _initial_beams(Hf, n)
    v = _update_combiners(_effective(Hf, w), interf, own, noise)
    L = _leakage(_effective(Hf, w), v, interf)
    iters = np.zeros(T, dtype=int)
    done = L <= tol
    converged = done.copy()
    for it in range(1, max_iter + 1):
        act = ~done
        if not act.any():
            break
        Ha = Hf[act]
        wa = _update_beams(Ha, v[act], interf, own, n)
        Ga = _effective(Ha, wa)
        va = _update_combiners(Ga, interf, own, noise)
        La = _leakage(Ga, va, interf)
        w[act], v[act] = wa, va
        prev = L[act]
        L[act] = La
        iters[act] = it
        ok = La <= tol
        stall = np.abs(prev - La) <= stall_tol * np.maximum(prev, 1e-300)
        idx = np.flatnonzero(act)
        converged[idx[ok]] = True
        done[idx[ok | stall]] = True
    return BeamSet(
        w=w.reshape(batch + (2, n, K)),
        v=v.reshape(batch + (2, n, 2, K)),
        leakage=L.reshape(batch),
        iterations=iters.reshape(batch),
        converged=converged.reshape(batch),
    )


def leakage(ch: MimoNetworkChannel, beams: BeamSet) -> np.ndarray:
    """Total leakage power of a beam set on a channel."""
    n, K = ch.clusters, ch.antennas
    Hf, batch = _flat(ch.H)
    interf, _ = interference_mask(n)
    w = beams.w.reshape(-1, 2, n, K)
    v = beams.v.reshape(-1, 4 * n, K)
    return _leakage(_effective(Hf, w), v, interf).reshape(batch)


def effective_gains(ch: MimoNetworkChannel, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``|v_u^H H[b, u] w_beam|^2`` with shape ``(..., cell, cluster, role, bs, cluster)``."""
    n, K = ch.clusters, ch.antennas
    Hf, batch = _flat(ch.H)
    wf = np.broadcast_to(w, batch + (2, n, K)).reshape(-1, 2, n, K)
    vf = np.broadcast_to(v, batch + (2, n, 2, K)).reshape(-1, 4 * n, K)
    amp = _amplitudes(_effective(Hf, wf), vf)
    return (np.abs(amp) ** 2).reshape(batch + (2, n, 2, 2, n))
