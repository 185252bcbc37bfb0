"""Deployment geometry, user association and channel generation.

Everything here is a pure function of a seed and parameters. Channels are
stored as a dense array ``h`` of shape ``(N, K, M)``: ``h[i, u]`` is the MISO
channel from the ``M`` antennas of RRH ``i`` to user ``u``; the received
signal for a precoder ``v`` is ``h[i, u].conj() @ v``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

FADING_MODES = ("iid", "iid_pathloss")


@dataclass(frozen=True)
class Deployment:
    area_side: float
    rrh_positions: np.ndarray  # (N, 2)
    user_positions: np.ndarray  # (K, 2)
    antennas_per_rrh: int
    users_per_rrh: int
    association: np.ndarray  # (K,) serving RRH per user

    @property
    def n_rrh(self) -> int:
        return self.rrh_positions.shape[0]

    @property
    def n_users(self) -> int:
        return self.user_positions.shape[0]

    def served_users(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.association == i)

    def to_dict(self) -> dict:
        return {
            "area_side": self.area_side,
            "rrh_positions": self.rrh_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
            "antennas_per_rrh": self.antennas_per_rrh,
            "users_per_rrh": self.users_per_rrh,
            "association": self.association.tolist(),
        }


@dataclass(frozen=True)
class ChannelSet:
    h: np.ndarray  # (N, K, M) complex
    noise_power: float
    realization_index: int = 0

    def __post_init__(self):
        if self.h.ndim != 3:
            raise ConfigError(f"channel array must be (N, K, M), got shape {self.h.shape}")
        if not np.all(np.isfinite(self.h)):
            raise ConfigError("channel array contains non-finite entries")

    @property
    def energy(self) -> np.ndarray:
        """Per-link energy ``||h[i, u]||^2`` as an (N, K) array."""
        return np.sum(np.abs(self.h) ** 2, axis=-1)

    def to_dict(self) -> dict:
        return {
            "h_real": self.h.real.tolist(),
            "h_imag": self.h.imag.tolist(),
            "noise_power": self.noise_power,
            "realization_index": self.realization_index,
        }


@dataclass(frozen=True)
class PathlossSet:
    g: np.ndarray  # (N, K), strictly positive


def dump(obj) -> str:
    """Structured text dump of a Deployment or ChannelSet for debugging."""
    return json.dumps({type(obj).__name__: obj.to_dict()}, indent=1)


def associate_users(energy, users_per_rrh: int) -> np.ndarray:
    """Greedy quota-constrained association on an (N, K) energy table.

    Users are visited in order of their best energy (descending, ties to the
    lower user index) and attached to the strongest RRH that still has a free
    slot (ties to the lower RRH index).
    """
    energy = np.asarray(energy, dtype=float)
    n_rrh, n_users = energy.shape
    if n_rrh * users_per_rrh < n_users:
        raise ConfigError(
            f"{n_rrh} RRHs x {users_per_rrh} slots cannot serve {n_users} users")
    best = energy.max(axis=0)
    # lexsort: last key is primary
    order = np.lexsort((np.arange(n_users), -best))
    load = np.zeros(n_rrh, dtype=int)
    association = np.empty(n_users, dtype=int)
    for u in order:
        open_ = load < users_per_rrh
        cand = np.where(open_, energy[:, u], -np.inf)
        i = int(np.argmax(cand))  # first max -> lowest index
        association[u] = i
        load[i] += 1
    return association


def compute_pathloss(deployment: Deployment, exponent: float = 3.5,
                     reference_gain: float = 1.0, d_min: float = 1.0) -> PathlossSet:
    """Log-distance gain ``reference_gain * max(d, d_min) ** -exponent``."""
    if exponent <= 0:
        raise ConfigError(f"pathloss exponent must be positive, got {exponent}")
    if reference_gain <= 0 or d_min <= 0:
        raise ConfigError("reference_gain and d_min must be positive")
    diff = deployment.rrh_positions[:, None, :] - deployment.user_positions[None, :, :]
    d = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), d_min)
    return PathlossSet(reference_gain * d ** (-exponent))


def drop_deployment(seed: int, N: int, K: int, M: int, J: int,
                    area_side: float = 100.0, exponent: float = 3.5) -> Deployment:
    """Drop N RRHs and K users uniformly in a square and associate them.

    Association uses the distance-based gains, which rank RRHs the same way
    for any reference gain.
    """
    if min(N, K, M, J) < 1:
        raise ConfigError("N, K, M and J must all be positive")
    if N * J != K:
        raise ConfigError(f"quota association needs K = N*J, got K={K}, N*J={N * J}")
    if area_side <= 0:
        raise ConfigError("area_side must be positive")
    rng = np.random.default_rng(seed)
    rrh = rng.uniform(0.0, area_side, size=(N, 2))
    users = rng.uniform(0.0, area_side, size=(K, 2))
    dep = Deployment(area_side, rrh, users, M, J, np.zeros(K, dtype=int))
    gains = compute_pathloss(dep, exponent).g
    return Deployment(area_side, rrh, users, M, J, associate_users(gains, J))


def draw_channels(seed: int, deployment: Deployment, fading_mode: str = "iid",
                  realization_index: int = 0, pathloss: PathlossSet | None = None,
                  noise_power: float = 1.0) -> ChannelSet:
    """Draw one small-scale fading realization (unit-variance CN entries)."""
    if fading_mode not in FADING_MODES:
        raise ConfigError(f"unknown fading mode {fading_mode!r}")
    rng = np.random.default_rng([seed, realization_index])
    shape = (deployment.n_rrh, deployment.n_users, deployment.antennas_per_rrh)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    if fading_mode == "iid_pathloss":
        if pathloss is None:
            pathloss = compute_pathloss(deployment)
        h = h * np.sqrt(pathloss.g)[:, :, None]
    return ChannelSet(h, float(noise_power), realization_index)
