"""SINR, sum-rate and leakage metrics for a fully beamformed network.

Precoders carry absolute transmit power, so no separate ``P_t`` factor is
applied here. Every stream in the network, in or out of the user's cluster or
AD, counts as interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import adf
from .errors import EvaluationError


@dataclass(frozen=True)
class MetricsReport:
    per_user_sinr: np.ndarray
    sum_rate: float
    leakage_f: float
    scheme_label: str
    snr_db: float
    realization_index: int = 0


def _network_gains(precoders, channels, association):
    association = np.asarray(association)
    n_users = association.size
    users = np.asarray(precoders.users)
    if users.size != n_users or not np.array_equal(users, np.arange(n_users)):
        missing = np.setdiff1d(np.arange(n_users), users)
        raise EvaluationError(f"missing precoders for users {missing.tolist()}")
    v = np.asarray(precoders.v)
    if not np.all(np.isfinite(v)):
        raise EvaluationError("precoders contain non-finite entries")
    # G[u, s] = h(serving RRH of s -> u)^H v_s
    Hs = channels.h[association]  # (S, U, M)
    return np.abs(np.einsum("sum,sm->us", Hs.conj(), v)) ** 2


def _noise(channels, n_users):
    noise = np.broadcast_to(np.asarray(channels.noise_power, dtype=float), (n_users,))
    if np.any(noise <= 0):
        raise ValueError("SINR needs strictly positive noise power")
    return noise


def compute_sinrs(precoders, channels, association) -> np.ndarray:
    """Linear SINR of every user, shape (K,)."""
    p = _network_gains(precoders, channels, association)
    noise = _noise(channels, p.shape[0])
    signal = np.diag(p).copy()
    np.fill_diagonal(p, 0.0)
    return signal / (p.sum(axis=1) + noise)


def compute_sinr(u: int, precoders, channels, association) -> float:
    return float(compute_sinrs(precoders, channels, association)[u])


def sum_rate(sinrs) -> float:
    """Sum of ``log2(1 + SINR)``; interference is treated as noise."""
    sinrs = np.asarray(sinrs, dtype=float)
    return float(np.sum(np.log2(1.0 + sinrs))) if sinrs.size else 0.0


def leakage_report(psi, assignment) -> float:
    return adf.objective(psi, assignment)


def evaluate(precoders, channels, association, psi, assignment, scheme_label: str,
             snr_db: float) -> MetricsReport:
    sinrs = compute_sinrs(precoders, channels, association)
    return MetricsReport(sinrs, sum_rate(sinrs), leakage_report(psi, assignment),
                         scheme_label, snr_db, channels.realization_index)
