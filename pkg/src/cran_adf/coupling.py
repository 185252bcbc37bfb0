"""Pairwise interference coupling between RRHs.

All three builders share one shape: with ``alpha[i, j]`` the leakage of RRH
``i`` into the users served by RRH ``j``, the coupling is
``psi = alpha + alpha.T`` with a zeroed diagonal.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

MODES = ("instantaneous", "statistical", "precoder_aware")


@dataclass(frozen=True)
class CouplingMatrix:
    psi: np.ndarray
    mode: str = "instantaneous"

    def __post_init__(self):
        psi = self.psi
        if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
            raise DimensionError(f"coupling matrix must be square, got {psi.shape}")
        if self.mode not in MODES:
            raise ValueError(f"unknown coupling mode {self.mode!r}")
        if np.any(np.diag(psi) != 0):
            raise ValueError("coupling matrix must have a zero diagonal")
        if np.any(psi < 0) or not np.all(np.isfinite(psi)):
            raise ValueError("coupling entries must be finite and nonnegative")
        if not np.array_equal(psi, psi.T):
            raise ValueError("coupling matrix must be symmetric")

    @property
    def n(self) -> int:
        return self.psi.shape[0]


def _symmetrize(alpha: np.ndarray, mode: str) -> CouplingMatrix:
    psi = alpha + alpha.T
    np.fill_diagonal(psi, 0.0)
    return CouplingMatrix(psi, mode)


def _serving_onehot(association, n_rrh: int) -> np.ndarray:
    association = np.asarray(association)
    onehot = np.zeros((association.size, n_rrh))
    onehot[np.arange(association.size), association] = 1.0
    return onehot


def coupling_instantaneous(channels, association) -> CouplingMatrix:
    """psi[i, j] = ||H_ij||_F^2 + ||H_ji||_F^2 from one fading realization.

    ``H_ij`` stacks the channels from RRH i to the users of RRH j; an RRH with
    no users contributes nothing.
    """
    energy = channels.energy  # (N, K)
    if energy.shape[1] != np.asarray(association).size:
        raise DimensionError("association does not cover every user of the channel set")
    alpha = energy @ _serving_onehot(association, energy.shape[0])
    return _symmetrize(alpha, "instantaneous")


def coupling_statistical(pathloss, association, M: int) -> CouplingMatrix:
    """Coupling from large-scale gains only.

    Each gain is used as an amplitude factor replicated over the M antenna
    columns, so ``||H~_ij||_F^2 = M * sum_{u in U_j} g[i, u]^2``.
    """
    g = np.asarray(pathloss.g, dtype=float)
    alpha = (M * g ** 2) @ _serving_onehot(association, g.shape[0])
    return _symmetrize(alpha, "statistical")


def coupling_precoder_aware(channels, precoders, association) -> CouplingMatrix:
    """psi[i, j] = ||H_ij W_j||_F^2 + ||H_ji W_i||_F^2.

    ``precoders`` is a (K, M) array (or object with a ``v`` attribute) whose
    row ``s`` is the beam of user ``s`` on its serving RRH, so ``W_j`` is the
    set of rows of RRH j's users.
    """
    h = channels.h
    v = np.asarray(getattr(precoders, "v", precoders))
    n_rrh, n_users, m = h.shape
    if v.shape != (n_users, m):
        raise DimensionError(f"precoders must have shape {(n_users, m)}, got {v.shape}")
    association = np.asarray(association)
    # gain[i, u, s] = |h[i, u]^H v_s|^2
    gain = np.abs(np.einsum("ium,sm->ius", h.conj(), v)) ** 2
    onehot = _serving_onehot(association, n_rrh)  # (K, N)
    # alpha[i, j] = sum over users u of j and streams s of j of gain[i, u, s]
    alpha = np.einsum("ius,uj,sj->ij", gain, onehot, onehot)
    return _symmetrize(alpha, "precoder_aware")


def write_psi_csv(psi, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    for row in np.asarray(getattr(psi, "psi", psi)):
        writer.writerow([repr(float(x)) for x in row])


def read_psi_csv(stream, mode: str = "instantaneous") -> CouplingMatrix:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = [[float(x) for x in row] for row in csv.reader(stream) if row]
    if not rows:
        raise DimensionError("empty coupling CSV")
    if any(len(r) != len(rows) for r in rows):
        raise DimensionError("coupling CSV must hold N rows of N values")
    return CouplingMatrix(np.array(rows), mode)
