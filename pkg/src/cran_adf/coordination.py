"""Intra-AD coordination: geographic clustering and WMMSE beamforming.

Each user is served by exactly one stream from its serving RRH. Precoders are
stored per user as rows of a ``(U, M)`` array and carry absolute power, so the
per-RRH budget reads ``sum_{u served by i} ||v_u||^2 <= P_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

POWER_SLACK = 1e-6


@dataclass(frozen=True)
class ClusterPlan:
    clusters: list  # per AD: list of RRH index arrays
    centroids: list  # per AD: (C, 2) array
    inertia: list = field(default_factory=list)  # per AD: SSE after each Lloyd step


@dataclass(frozen=True)
class PrecoderSet:
    users: np.ndarray  # (U,) user indices, ascending
    v: np.ndarray  # (U, M) complex
    power_budget: float

    def __post_init__(self):
        if self.v.ndim != 2 or self.v.shape[0] != self.users.size:
            raise DimensionError("precoder rows must align with the user list")

    def rrh_power(self, association) -> dict:
        """Transmit power per serving RRH present in this set."""
        serving = np.asarray(association)[self.users]
        power = np.sum(np.abs(self.v) ** 2, axis=1)
        return {int(i): float(power[serving == i].sum()) for i in np.unique(serving)}

    def within_budget(self, association) -> bool:
        limit = self.power_budget * (1 + POWER_SLACK)
        return all(p <= limit for p in self.rrh_power(association).values())


def merge_precoders(sets, n_users: int) -> PrecoderSet:
    """Stack cluster-level precoder sets into one network-wide set."""
    sets = [s for s in sets if s.users.size]
    if not sets:
        raise ValueError("nothing to merge")
    users = np.concatenate([s.users for s in sets])
    if np.unique(users).size != users.size:
        raise ValueError("a user appears in more than one precoder set")
    order = np.argsort(users)
    v = np.concatenate([s.v for s in sets])[order]
    budgets = {s.power_budget for s in sets}
    if len(budgets) != 1:
        raise ValueError("precoder sets use different power budgets")
    merged = PrecoderSet(users[order], v, budgets.pop())
    if merged.users.size != n_users:
        missing = np.setdiff1d(np.arange(n_users), merged.users)
        raise ValueError(f"no precoder for users {missing.tolist()}")
    return merged


def _sse(points, labels, centroids):
    return float(np.sum((points - centroids[labels]) ** 2))


def _lloyd(points, C, rng, max_iters=100):
    n = points.shape[0]
    centroids = points[rng.choice(n, size=C, replace=False)].copy()
    labels = None
    history = []
    for _ in range(max_iters):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=-1)
        new = np.argmin(d2, axis=1)
        # empty-cluster repair: move the point farthest from its centroid
        # out of the currently largest cluster
        for c in range(C):
            if np.any(new == c):
                continue
            sizes = np.bincount(new, minlength=C)
            big = int(np.argmax(sizes))
            idx = np.flatnonzero(new == big)
            far = idx[np.argmax(d2[idx, big])]
            new[far] = c
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centroids = np.array([points[labels == c].mean(axis=0) for c in range(C)])
        history.append(_sse(points, labels, centroids))
    return labels, centroids, history


def kmeans_clusters(assignment, rrh_positions, C: int, seed: int = 0) -> ClusterPlan:
    """Split the RRHs of every AD into C geographic clusters with Lloyd's method.

    Centroids start at C distinct member positions drawn from a per-AD stream
    of ``seed``; iteration stops when no membership changes (at most 100
    steps).
    """
    rrh_positions = np.asarray(rrh_positions, dtype=float)
    X = getattr(assignment, "x", assignment)
    clusters, centroids, inertia = [], [], []
    for k in range(X.shape[0]):
        members = np.flatnonzero(X[k])
        if members.size == 0:
            clusters.append([])
            centroids.append(np.empty((0, 2)))
            inertia.append([])
            continue
        if C < 1 or C > members.size:
            raise ConfigError(f"AD {k} has {members.size} RRHs, cannot form {C} clusters")
        pts = rrh_positions[members]
        labels, cent, hist = _lloyd(pts, C, np.random.default_rng([seed, k]))
        clusters.append([members[labels == c] for c in range(C)])
        centroids.append(cent)
        inertia.append(hist)
    return ClusterPlan(clusters, centroids, inertia)


def _cluster_users(cluster, association):
    return np.flatnonzero(np.isin(np.asarray(association), np.asarray(cluster)))


def initialize_precoders(cluster, channels, association, P_t: float) -> PrecoderSet:
    """Matched-filter beams with the RRH budget split evenly over its users.

    Users with an all-zero channel get a zero beam and their share goes to the
    other users of the same RRH.
    """
    association = np.asarray(association)
    users = _cluster_users(cluster, association)
    h_own = channels.h[association[users], users]  # (U, M)
    norms = np.linalg.norm(h_own, axis=1)
    v = np.zeros_like(h_own)
    for i in np.unique(association[users]):
        mine = np.flatnonzero((association[users] == i) & (norms > 0))
        if mine.size:
            v[mine] = math.sqrt(P_t / mine.size) * h_own[mine] / norms[mine, None]
    return PrecoderSet(users, v, float(P_t))


def _gains_and_utility(Hs_conj, V, noise):
    """Cross gains, their powers and the sum-rate for a batch of beam sets.

    ``Hs_conj`` is the (S, U, M) conjugated channel stack of the streams'
    RRHs and ``V`` is (T, S, M); ``G[t, u, s] = h(RRH of s -> u)^H v_ts``.
    """
    G = np.einsum("sum,tsm->tus", Hs_conj, V)
    p = G.real ** 2 + G.imag ** 2
    sig = np.diagonal(p, axis1=1, axis2=2)
    interference = p.sum(axis=2) - sig
    rate = np.log2(1.0 + sig / (interference + noise)).sum(axis=1)
    return G, p, rate


def _multipliers(lam, D2, P_t, max_iters=60):
    """Per-row mu >= 0 with sum_m D2 / (lam + mu)^2 = P_t when mu = 0 overshoots.

    Newton on ``power(mu)^(-1/2)``, which is concave and increasing, so iterates
    approach the root from below without overshoot. ``P_t`` may be a scalar or
    one budget per row.
    """
    mu = np.zeros(lam.shape[0])
    P_t = np.broadcast_to(np.asarray(P_t, dtype=float), mu.shape)
    lam = np.where(D2 > 0, lam, 1.0)  # directions with no demand never bind
    active = ((D2 / lam ** 2).sum(axis=1) > P_t) & (P_t > 0)
    if not active.any():
        return mu
    L, D = lam[active], D2[active]
    m = np.zeros(L.shape[0])
    target = P_t[active] ** -0.5
    for _ in range(max_iters):
        den = L + m[:, None]
        t2 = D / den ** 2
        p = t2.sum(axis=1)
        g = p ** -0.5 - target
        m = m + np.maximum(-g * p ** 1.5 / (t2 / den).sum(axis=1), 0.0)
        if np.all(np.abs(g) <= 1e-13 * target):
            break
    mu[active] = m
    return mu


def _wmmse_batch(cluster, channels, association, powers, max_iters, tol):
    """WMMSE for one cluster at several power budgets at once (leading axis T)."""
    association = np.asarray(association)
    cluster = np.unique(np.asarray(cluster))
    powers = np.asarray(powers, dtype=float)
    noise = np.broadcast_to(np.asarray(channels.noise_power, dtype=float), (association.size,))
    if np.any(noise <= 0):
        raise ValueError("WMMSE requires strictly positive noise power")
    if np.any(powers < 0):
        raise ConfigError("power budget must be nonnegative")
    users = _cluster_users(cluster, association)
    T = powers.size
    M = channels.h.shape[2]
    if users.size == 0:
        return [(PrecoderSet(users, np.zeros((0, M), complex), float(pt)), [0.0]) for pt in powers]

    serving = association[users]
    bi = np.searchsorted(cluster, serving)  # stream -> position of its RRH in cluster
    onehot = (bi[None, :] == np.arange(cluster.size)[:, None]).astype(float)  # (B, S)
    nz = noise[users]
    Hb = channels.h[cluster][:, users, :]  # (B, U, M)
    HbT = Hb.transpose(0, 2, 1)
    Hb_conj = Hb.conj()
    h_own = channels.h[serving, users]  # (U, M)
    Hs_conj = channels.h[serving][:, users, :].conj()  # (S, U, M)
    V = np.stack([initialize_precoders(cluster, channels, association, pt).v for pt in powers])
    budget = powers[:, None]  # (T, 1) per RRH
    G, p, rate = _gains_and_utility(Hs_conj, V, nz)
    traces = [[float(r)] for r in rate]
    active = powers > 0
    for _ in range(max_iters):
        if not active.any():
            break
        sig = np.diagonal(p, axis1=1, axis2=2)
        off = p.sum(axis=2) - sig
        den = off + sig + nz
        a = np.diagonal(G, axis1=1, axis2=2) / den  # MMSE receive coefficients
        w = den / (off + nz)  # inverse MSE
        c = w * np.abs(a) ** 2  # (T, U)
        A = (HbT[None] * c[:, None, None, :]) @ Hb_conj[None]  # (T, B, M, M)
        lam, Q = np.linalg.eigh(A)
        lam = np.maximum(lam, 0.0)
        keep = lam > 1e-12 * np.maximum(lam.max(axis=2, keepdims=True), np.finfo(float).tiny)
        Qs = Q[:, bi]  # (T, S, M, M)
        rhs = (w * a)[:, :, None] * h_own[None]
        d = (Qs.conj().swapaxes(-1, -2) @ rhs[..., None])[..., 0]
        d = np.where(keep[:, bi], d, 0.0)
        D2 = onehot @ (np.abs(d) ** 2)  # (T, B, M)
        mu = _multipliers(lam.reshape(-1, M), D2.reshape(-1, M),
                          np.repeat(powers, cluster.size)).reshape(T, -1)
        inv = np.where(keep, 1.0 / np.where(keep, lam + mu[..., None], 1.0), 0.0)
        V_new = (Qs @ (inv[:, bi] * d)[..., None])[..., 0]
        power = np.sum(np.abs(V_new) ** 2, axis=2) @ onehot.T  # (T, B)
        scale = np.sqrt(np.divide(budget, power, out=np.ones_like(power), where=power > budget))
        V_new = V_new * scale[:, bi, None]

        G_new, p_new, rate_new = _gains_and_utility(Hs_conj, V_new, nz)
        stepped = active.copy()
        for t in np.flatnonzero(stepped):
            prev = traces[t][-1]
            if rate_new[t] < prev - 1e-9 * max(1.0, abs(prev)):
                raise RuntimeError(f"WMMSE utility decreased: {prev} -> {rate_new[t]}")
            active[t] = rate_new[t] - prev >= tol
            if rate_new[t] < prev:
                stepped[t] = False  # round-off at a fixed point: keep the previous beams
                continue
            traces[t].append(float(rate_new[t]))
        m = stepped[:, None, None]
        V = np.where(m, V_new, V)
        G = np.where(m, G_new, G)
        p = np.where(m, p_new, p)
    V[powers == 0] = 0.0
    return [(PrecoderSet(users, V[t], float(powers[t])), traces[t]) for t in range(T)]


def wmmse_beamform(cluster, channels, association, P_t: float, max_iters: int = 100,
                   tol: float = 1e-4):
    """Weighted-MMSE coordinated beamforming inside one cluster.

    Only the users served by ``cluster`` and the streams of those users are
    visible; interference from outside the cluster is ignored here. Starting
    from matched-filter beams, each iteration computes the scalar MMSE
    receivers, the MSE weights, then the regularized least-squares beams per
    RRH, with the multiplier chosen so the RRH meets its budget. Stops when
    the cluster sum-rate improves by less than ``tol`` or after ``max_iters``
    iterations.

    Returns ``(PrecoderSet, utility_trace)`` where the trace holds the cluster
    sum-rate (bits/s/Hz, intra-cluster interference only) at the start and
    after each iteration; it is checked to be non-decreasing.
    """
    return _wmmse_batch(cluster, channels, association, [P_t], max_iters, tol)[0]


def coordinate_network_sweep(deployment, channels, assignment, C: int, powers, seed: int = 0,
                             max_iters: int = 100, tol: float = 1e-4):
    """Cluster every AD and run WMMSE per cluster, once per power budget.

    RRHs that belong to no AD beamform on their own (a singleton cluster).
    Returns ``(list of network PrecoderSets, ClusterPlan)``.
    """
    plan = kmeans_clusters(assignment, deployment.rrh_positions, C, seed)
    groups = [c for ad in plan.clusters for c in ad]
    X = getattr(assignment, "x", assignment)
    groups += [np.array([i]) for i in np.flatnonzero(X.sum(axis=0) == 0)]
    per_group = [_wmmse_batch(g, channels, deployment.association, powers, max_iters, tol)
                 for g in groups]
    nets = [merge_precoders([res[t][0] for res in per_group], deployment.n_users)
            for t in range(len(powers))]
    return nets, plan


def coordinate_network(deployment, channels, assignment, C: int, P_t: float, seed: int = 0,
                       max_iters: int = 100, tol: float = 1e-4):
    """Single-budget form of :func:`coordinate_network_sweep`."""
    nets, plan = coordinate_network_sweep(deployment, channels, assignment, C, [P_t], seed,
                                          max_iters, tol)
    return nets[0], plan
