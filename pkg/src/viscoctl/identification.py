"""Adaptive observer and gradient estimator for theta = (eps, a1, a2, lam).

Each probe point (channel) runs

    psi_t     = -L' psi + Psi,                 Psi = [lap(phi), f, f_t, phi]
    phi_hat_t = Psi . theta_hat + L (phi - phi_hat),   L = L' + psi^T K psi
    theta_hat_t = K sum_channels psi (phi - phi_hat)

With channels stacked, psi is 4 x m and L is an m x m matrix, so the
psi^T K psi term couples channels.  It makes the auxiliary error
eta = (phi - phi_hat) - psi . (theta - theta_hat) obey eta_t = -L' eta, and
only the plus sign on the theta update closes that identity.

Recorded channel histories can be replayed as extra virtual channels to
complete the rank of the regressor Gram matrix when live excitation is poor.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .field import ScalarField, laplacian_padded

log = logging.getLogger(__name__)

N_PARAMS = 4


@dataclass
class Channel:
    location: tuple[int, int, int] | None
    psi: np.ndarray = dc_field(default_factory=lambda: np.zeros(N_PARAMS))
    phi_hat: float = 0.0
    Psi: np.ndarray = dc_field(default_factory=lambda: np.zeros(N_PARAMS))


def regressor_step(channel: Channel, L_prime: float, dt: float) -> Channel:
    psi = channel.psi + dt * (-L_prime * channel.psi + channel.Psi)
    return Channel(channel.location, psi, channel.phi_hat, channel.Psi.copy())


def _gain_matrix(K) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.ndim == 0:
        if not K > 0:
            raise ValueError("K must be positive")
        return K * np.ones(N_PARAMS)
    if K.shape != (N_PARAMS,) or np.any(K <= 0):
        raise ValueError("K must be a positive scalar or a positive 4-vector (diagonal gain)")
    return K


def observer_gain(psi: np.ndarray, K, L_prime: float) -> float:
    return L_prime + float(psi @ (_gain_matrix(K) * psi))


def observer_step(channel: Channel, theta_hat, K, L_prime: float, phi_measured: float,
                  dt: float) -> Channel:
    L = observer_gain(channel.psi, K, L_prime)
    err = phi_measured - channel.phi_hat
    phi_hat = channel.phi_hat + dt * (float(channel.Psi @ theta_hat) + L * err)
    return Channel(channel.location, channel.psi.copy(), phi_hat, channel.Psi.copy())


@dataclass
class PEWindow:
    """Sliding-window Gram matrix of psi, summed over channels.

    Contributions accumulate into blocks of ``block`` seconds; the window is
    the sum of the last ``tau / block`` completed blocks plus the open one.
    """

    tau: float = 2.0
    block: float = 0.1
    _blocks: deque = dc_field(default=None, repr=False)
    _open: np.ndarray = dc_field(default=None, repr=False)
    _open_time: float = 0.0
    _filled: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        self._blocks = deque(maxlen=max(1, int(round(self.tau / self.block))))
        self._open = np.zeros((N_PARAMS, N_PARAMS))

    def add(self, psis: np.ndarray, dt: float) -> None:
        psis = np.atleast_2d(psis)
        self._open += dt * psis.T @ psis
        self._open_time += dt
        self._filled += dt
        if self._open_time >= self.block - 1e-12:
            self._blocks.append(self._open)
            self._open = np.zeros((N_PARAMS, N_PARAMS))
            self._open_time = 0.0

    @property
    def M(self) -> np.ndarray:
        return sum(self._blocks, self._open.copy())

    @property
    def populated(self) -> bool:
        return self._filled > 0

    @property
    def min_eig(self) -> float:
        return pe_metric(self)


def pe_metric(window: PEWindow) -> float:
    if not window.populated:
        raise ValueError("PE window is empty")
    M = window.M
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


@dataclass
class Recording:
    """A replayable channel history: Psi rows (n, 4) and measured phi (n,)."""

    Psi: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.Psi = np.asarray(self.Psi, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.Psi.ndim != 2 or self.Psi.shape[1] != N_PARAMS or len(self.Psi) != len(self.phi):
            raise ValueError("recording needs Psi of shape (n, 4) and phi of length n")
        if len(self.phi) == 0:
            raise ValueError("empty recording")


@dataclass
class ReplayChannel:
    recording: Recording
    channel: Channel
    cursor: int = 0

    def measurement(self) -> tuple[np.ndarray, float]:
        return self.recording.Psi[self.cursor], self.recording.phi[self.cursor]

    def advance(self) -> None:
        self.cursor += 1
        if self.cursor == len(self.recording.phi):
            # restart the history with a zero auxiliary error
            self.cursor = 0
            self.channel.psi = np.zeros(N_PARAMS)
            self.channel.phi_hat = float(self.recording.phi[0])


@dataclass
class EstimatorState:
    theta_hat: np.ndarray
    channels: list[Channel]
    K: float | np.ndarray = 1.0
    L_prime: float = 1.0
    replay_capacity: int = 8
    replay: deque = dc_field(default=None)
    window: PEWindow = dc_field(default_factory=PEWindow)
    t: float = 0.0

    def __post_init__(self):
        self.theta_hat = np.asarray(self.theta_hat, dtype=float).copy()
        _gain_matrix(self.K)
        if not self.L_prime > 0:
            raise ValueError("L_prime must be positive")
        if self.replay is None:
            self.replay = deque(maxlen=self.replay_capacity)

    def all_channels(self) -> list[Channel]:
        return list(self.channels) + [r.channel for r in self.replay]


def estimator_step(state: EstimatorState, measurements: Sequence[tuple[np.ndarray, float]],
                   dt: float) -> EstimatorState:
    """Advance observer, regressor filters and theta_hat by one Euler step.

    ``measurements[i]`` is ``(Psi_i, phi_i)`` for live channel i.  Replay
    channels draw theirs from the recordings.  All right-hand sides use the
    values at the start of the step.
    """
    if not state.channels and not state.replay:
        raise ValueError("estimator needs at least one channel")
    if len(measurements) != len(state.channels):
        raise ValueError(f"{len(measurements)} measurements for {len(state.channels)} channels")
    meas = list(measurements) + [r.measurement() for r in state.replay]
    chans = state.all_channels()
    Kd = _gain_matrix(state.K)
    Lp = state.L_prime
    theta = state.theta_hat
    psi = np.array([ch.psi for ch in chans])
    Psi = np.array([m[0] for m in meas], dtype=float)
    phi = np.array([m[1] for m in meas], dtype=float)
    phi_hat = np.array([ch.phi_hat for ch in chans])
    err = phi - phi_hat
    d_theta = dt * Kd * (psi.T @ err)
    psi_next = psi + dt * (-Lp * psi + Psi)
    # L = L' + psi^T K psi acting on the stacked error; the psi^T K psi part
    # is psi_next . d_theta, which keeps eta_{k+1} = (1 - dt L') eta_k exact.
    phi_hat_next = phi_hat + dt * (Psi @ theta + Lp * err) + psi_next @ d_theta
    state.window.add(psi, dt)
    state.theta_hat = theta + d_theta
    for i, ch in enumerate(chans):
        ch.Psi = Psi[i]
        ch.psi = psi_next[i]
        ch.phi_hat = float(phi_hat_next[i])
    for r in state.replay:
        r.advance()
    state.t += dt
    return state


def replay_extend(state: EstimatorState, recordings: Sequence[Recording]) -> EstimatorState:
    """Append recorded histories as virtual channels (oldest evicted when full)."""
    for rec in recordings:
        if len(state.replay) == state.replay.maxlen:
            log.warning("replay buffer full (%d); evicting oldest recording", state.replay.maxlen)
        ch = Channel(None, np.zeros(N_PARAMS), float(rec.phi[0]), np.zeros(N_PARAMS))
        state.replay.append(ReplayChannel(rec, ch))
    return state


def measure(phi: ScalarField, f: np.ndarray, f_dot: np.ndarray,
            probes: Sequence[tuple[int, int, int]]) -> list[tuple[np.ndarray, float]]:
    """Psi = [lap(phi), f, f_t, phi] and phi at each probe, from full fields."""
    s = phi.spec
    lap = laplacian_padded(phi.padded(), s.hx, s.hy, s.hz, s.transverse)
    out = []
    for p in probes:
        v = float(phi.values[p])
        out.append((np.array([lap[p], f[p], f_dot[p], v]), v))
    return out


def default_probes(spec, count: int = 8) -> list[tuple[int, int, int]]:
    """``count`` interior points spread over the grid (quarter/three-quarter lattice)."""
    def pick(n, frac):
        return min(n - 1, max(0, int(round(frac * (n + 1))) - 1))

    fracs = [(a, b, c) for a in (0.3, 0.8) for b in (0.3, 0.7) for c in (0.35, 0.65)]
    pts = []
    for fx, fy, fz in fracs[:count]:
        p = (pick(spec.nx, fx), pick(spec.ny, fy), pick(spec.nz, fz))
        if p not in pts:
            pts.append(p)
    return pts
