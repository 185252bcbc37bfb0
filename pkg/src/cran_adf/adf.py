"""Antenna-domain formation: assigning RRHs to ADs.

Assignments are ``(A, N)`` 0/1 arrays, row ``k`` being the indicator vector of
AD ``k``. The objective is the total coupling between distinct ADs,
``f = sum_k sum_{l != k} x_k^T psi x_l``. With every other block fixed, ``f`` is
linear in block ``k`` with cost vector ``r_k = psi @ (sum of other blocks)``,
which is what the block-coordinate descent exploits.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, InfeasibleError

log = logging.getLogger(__name__)

_LOAD_TOL = 1e-9


@dataclass(frozen=True)
class LoadingSpec:
    beta: np.ndarray  # (A, N) nonnegative load weights
    gamma: np.ndarray  # (A,) target loads

    def __post_init__(self):
        if self.beta.ndim != 2 or self.gamma.shape != (self.beta.shape[0],):
            raise DimensionError("beta must be (A, N) and gamma (A,)")
        if np.any(self.beta < 0) or np.any(self.gamma < 0):
            raise ConfigError("loading weights and loads must be nonnegative")

    @classmethod
    def equal(cls, N: int, A: int) -> "LoadingSpec":
        """All-ones weights and ``gamma_k = N / A`` (N must divide evenly)."""
        if A < 1 or N % A:
            raise ConfigError(f"equal loading needs A | N, got N={N}, A={A}")
        return cls(np.ones((A, N)), np.full(A, N // A, dtype=float))

    @classmethod
    def counts(cls, gamma, N: int) -> "LoadingSpec":
        gamma = np.asarray(gamma, dtype=float)
        return cls(np.ones((gamma.size, N)), gamma)

    @property
    def n_ads(self) -> int:
        return self.beta.shape[0]

    @property
    def n_rrh(self) -> int:
        return self.beta.shape[1]

    def is_count(self, k: int) -> bool:
        """True when AD k uses all-ones weights and an integer load."""
        return bool(np.all(self.beta[k] == 1.0) and float(self.gamma[k]).is_integer())

    @property
    def is_equal_loading(self) -> bool:
        return all(self.is_count(k) for k in range(self.n_ads))


@dataclass(frozen=True)
class Assignment:
    x: np.ndarray  # (A, N) int8 in {0, 1}

    def __post_init__(self):
        x = self.x
        if x.ndim != 2:
            raise DimensionError(f"assignment must be (A, N), got {x.shape}")
        if not np.all((x == 0) | (x == 1)):
            raise ValueError("assignment entries must be binary")
        if np.any(x.sum(axis=0) > 1):
            raise ValueError("an RRH is assigned to more than one AD")

    @classmethod
    def from_labels(cls, labels, A: int) -> "Assignment":
        """Build from a per-RRH AD label (-1 for unassigned)."""
        labels = np.asarray(labels)
        x = np.zeros((A, labels.size), dtype=np.int8)
        mask = labels >= 0
        x[labels[mask], np.flatnonzero(mask)] = 1
        return cls(x)

    @property
    def n_ads(self) -> int:
        return self.x.shape[0]

    @property
    def n_rrh(self) -> int:
        return self.x.shape[1]

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.x[k])

    def labels(self) -> np.ndarray:
        """AD index per RRH, -1 where unassigned."""
        lab = np.full(self.n_rrh, -1)
        ad, rrh = np.nonzero(self.x)
        lab[rrh] = ad
        return lab

    def satisfies(self, loading: LoadingSpec) -> bool:
        if loading.beta.shape != self.x.shape:
            return False
        loads = np.einsum("kn,kn->k", loading.beta, self.x)
        return bool(np.all(np.abs(loads - loading.gamma) <= _LOAD_TOL * np.maximum(1.0, loading.gamma)))


@dataclass(frozen=True)
class FractionalAssignment:
    w: np.ndarray  # (A, N) in [0, 1], column sums <= 1

    def __post_init__(self):
        w = self.w
        if w.ndim != 2:
            raise DimensionError(f"fractional assignment must be (A, N), got {w.shape}")
        if np.any(w < 0) or np.any(w > 1) or np.any(w.sum(axis=0) > 1 + 1e-12):
            raise ValueError("fractional assignment violates box or assignment constraints")


@dataclass
class SolveTrace:
    f_history: list = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    changed: list = field(default_factory=list)  # per sweep: did any block move


def _as_matrix(psi) -> np.ndarray:
    return np.asarray(getattr(psi, "psi", psi), dtype=float)


def _as_blocks(x) -> np.ndarray:
    if isinstance(x, Assignment):
        return x.x
    if isinstance(x, FractionalAssignment):
        return x.w
    return np.asarray(x)


def objective(psi, x) -> float:
    """Total inter-AD coupling ``sum_k sum_{l != k} x_k^T psi x_l``."""
    P = _as_matrix(psi)
    X = np.asarray(_as_blocks(x), dtype=float)
    if X.ndim != 2 or X.shape[1] != P.shape[0] or P.shape[0] != P.shape[1]:
        raise DimensionError(f"assignment {X.shape} does not match coupling {P.shape}")
    return float(np.einsum("kn,nm,km->", X, P, X.sum(axis=0) - X))


def _others(X: np.ndarray, k: int) -> np.ndarray:
    return X.sum(axis=0) - X[k]


def residual(psi, x, k: int) -> np.ndarray:
    """Linear cost of block k given the current state of all other blocks."""
    P = _as_matrix(psi)
    return P @ _others(np.asarray(_as_blocks(x), dtype=float), k)


def residual_assignment(x, k: int) -> np.ndarray:
    """RRHs not claimed by any AD other than k (1 = available)."""
    X = np.asarray(_as_blocks(x))
    omega = 1 - _others(X, k)
    if np.any(omega < 0):
        raise ValueError(f"corrupted state: exclusivity violated outside AD {k}")
    return omega


def _block_select(r, available, gamma: int) -> np.ndarray:
    if available.size < gamma:
        return None
    order = available[np.argsort(r[available], kind="stable")]
    x = np.zeros(r.size, dtype=np.int8)
    x[order[:gamma]] = 1
    return x


def _block_branch_and_bound(r, available, beta, gamma):
    """Exact min of r^T x over x <= omega, beta^T x = gamma, x binary."""
    x = np.zeros(r.size, dtype=np.int8)
    free = available[beta[available] == 0]
    # zero-weight RRHs never affect the load: take exactly those that lower the cost
    take_free = free[r[free] < 0]
    x[take_free] = 1

    items = available[beta[available] > 0]
    items = items[np.lexsort((items, r[items]))]  # cheapest first, then index
    w = beta[items].astype(float)
    c = r[items].astype(float)
    n = items.size
    tail_w = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    tail_neg = np.concatenate([np.cumsum(np.minimum(c, 0.0)[::-1])[::-1], [0.0]])
    tol = _LOAD_TOL * max(1.0, gamma)

    best_cost = math.inf
    best = None
    chosen = []

    def dfs(pos, load, cost):
        nonlocal best_cost, best
        if abs(load - gamma) <= tol:
            if cost < best_cost:
                best_cost, best = cost, list(chosen)
            # further items with positive weight would overshoot the load
            return
        if pos == n or load > gamma + tol or load + tail_w[pos] < gamma - tol:
            return
        if cost + tail_neg[pos] >= best_cost:
            return
        chosen.append(pos)
        dfs(pos + 1, load + w[pos], cost + c[pos])
        chosen.pop()
        dfs(pos + 1, load, cost)

    dfs(0, 0.0, 0.0)
    if best is None:
        return None
    x[items[best]] = 1
    return x


def solve_block(r, omega, beta, gamma, ad=None) -> np.ndarray:
    """Globally minimize ``r^T x`` subject to ``x <= omega`` and ``beta^T x = gamma``.

    All-ones ``beta`` with an integer load reduces to picking the ``gamma``
    cheapest available RRHs (ties to the lower index). Other weights go
    through a depth-first branch-and-bound.
    """
    r = np.asarray(r, dtype=float)
    omega = np.asarray(omega)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), r.shape)
    available = np.flatnonzero(omega > 0.5)
    name = f"AD {ad}" if ad is not None else "block"
    if np.all(beta == 1.0) and float(gamma).is_integer():
        x = _block_select(r, available, int(gamma))
        if x is None:
            raise InfeasibleError(
                f"{name}: needs {int(gamma)} RRHs but only {available.size} are free", ad)
        return x
    x = _block_branch_and_bound(r, available, beta, float(gamma))
    if x is None:
        raise InfeasibleError(f"{name}: no subset of free RRHs meets load {gamma}", ad)
    return x


def _check_symmetric(P):
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionError(f"coupling matrix must be square, got {P.shape}")
    if not np.allclose(P, P.T, rtol=0, atol=1e-12 * max(1.0, np.abs(P).max(initial=0))):
        raise ValueError("block updates assume a symmetric coupling matrix")


def solve_bcd(psi, loading: LoadingSpec, init, max_sweeps: int = 50):
    """Gauss-Seidel block-coordinate descent over the AD indicator vectors.

    Each sweep visits the ADs in ascending order and replaces block k by the
    exact minimizer of its residual cost over the RRHs left free by the other
    ADs. A block only moves when the new one is strictly cheaper. Stops after
    a sweep that moves no block, or after ``max_sweeps``.

    Returns ``(Assignment, SolveTrace)``; ``trace.f_history[0]`` is the
    objective at ``init`` followed by one entry per block update.
    """
    P = _as_matrix(psi)
    _check_symmetric(P)
    init = init if isinstance(init, Assignment) else Assignment(np.asarray(init, dtype=np.int8))
    if init.x.shape != loading.beta.shape or init.n_rrh != P.shape[0]:
        raise DimensionError("initial assignment, loading and coupling sizes disagree")
    if not init.satisfies(loading):
        raise InfeasibleError("initial assignment violates the loading constraints")

    X = init.x.astype(np.int8).copy()
    f = objective(P, X)
    trace = SolveTrace(f_history=[f])
    for _ in range(max_sweeps):
        moved = False
        for k in range(X.shape[0]):
            r = residual(P, X, k)
            omega = residual_assignment(X, k)
            xk = solve_block(r, omega, loading.beta[k], loading.gamma[k], ad=k)
            # move only on strict improvement so ties keep the current block
            if r @ xk >= r @ X[k] - 1e-12 * max(1.0, abs(r @ X[k])):
                xk = X[k]
            if not np.array_equal(xk, X[k]):
                moved = True
                X[k] = xk
            f_new = objective(P, X)
            if f_new > f + 1e-9 * max(1.0, abs(f)):
                raise RuntimeError(
                    f"block update of AD {k} increased the objective: {f} -> {f_new}")
            f = f_new
            trace.f_history.append(f)
        trace.sweeps += 1
        trace.changed.append(moved)
        if not moved:
            trace.converged = True
            break
    return Assignment(X), trace


def random_assignment(seed, loading: LoadingSpec) -> Assignment:
    """Uniformly random partition meeting count loads (``sum gamma <= N``)."""
    if not loading.is_equal_loading:
        raise ConfigError("random assignment needs all-ones weights and integer loads")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    N, A = loading.n_rrh, loading.n_ads
    counts = loading.gamma.astype(int)
    if counts.sum() > N:
        raise InfeasibleError(f"loads sum to {counts.sum()} but only {N} RRHs exist")
    perm = rng.permutation(N)
    x = np.zeros((A, N), dtype=np.int8)
    start = 0
    for k, c in enumerate(counts):
        x[k, perm[start:start + c]] = 1
        start += c
    return Assignment(x)


def count_feasible(loading: LoadingSpec) -> int:
    """Number of labeled assignments under count loads."""
    if not loading.is_equal_loading:
        raise ConfigError("closed-form count needs all-ones weights and integer loads")
    left, total = loading.n_rrh, 1
    for c in loading.gamma.astype(int):
        if c > left:
            return 0
        total *= math.comb(left, c)
        left -= c
    return total


def _random_start(rng, loading: LoadingSpec, attempts: int = 20) -> Assignment:
    """Random feasible start; weighted loads are filled AD by AD with random costs."""
    if loading.is_equal_loading:
        return random_assignment(rng, loading)
    A, N = loading.beta.shape
    for _ in range(attempts):
        X = np.zeros((A, N), dtype=np.int8)
        try:
            for k in range(A):
                X[k] = solve_block(rng.random(N), 1 - X.sum(axis=0), loading.beta[k],
                                   loading.gamma[k], ad=k)
        except InfeasibleError:
            continue
        return Assignment(X)
    raise InfeasibleError("could not find a feasible starting assignment")


def solve_bcd_restarts(psi, loading: LoadingSpec, restarts: int = 20, seed=0,
                       max_sweeps: int = 50):
    """Best of ``restarts`` BCD runs from distinct random feasible starts.

    Starts are drawn without repetition (up to the number of feasible
    assignments). Ties keep the earliest run. Returns ``(Assignment,
    SolveTrace)`` of the best run.
    """
    rng = np.random.default_rng(seed)
    limit = restarts
    if loading.is_equal_loading:
        limit = min(restarts, count_feasible(loading))
        if limit == 0:
            raise InfeasibleError(
                f"loads sum to {int(loading.gamma.sum())} but only {loading.n_rrh} RRHs exist")
    seen = set()
    best = None
    draws = 0
    while len(seen) < limit and draws < 50 * restarts:
        draws += 1
        init = _random_start(rng, loading)
        key = init.x.tobytes()
        if key in seen:
            continue
        seen.add(key)
        result, trace = solve_bcd(psi, loading, init, max_sweeps)
        if best is None or trace.f_history[-1] < best[1].f_history[-1]:
            best = (result, trace)
    return best


def _block_candidates(available, beta, gamma):
    """All subsets of ``available`` meeting the load, in lexicographic order."""
    if np.all(beta == 1.0) and float(gamma).is_integer():
        for combo in itertools.combinations(available, int(gamma)):
            yield combo
        return
    tol = _LOAD_TOL * max(1.0, gamma)
    weights = beta[available]
    out = []

    def rec(pos, load, picked):
        if pos == available.size:
            if abs(load - gamma) <= tol:
                out.append(tuple(picked))
            return
        if load > gamma + tol:
            return
        picked.append(available[pos])
        rec(pos + 1, load + weights[pos], picked)
        picked.pop()
        rec(pos + 1, load, picked)

    rec(0, 0.0, [])
    yield from out


def _enumerate_assignments(loading: LoadingSpec):
    A, N = loading.beta.shape

    def rec(k, free):
        if k == A:
            yield ()
            return
        for combo in _block_candidates(np.flatnonzero(free), loading.beta[k], loading.gamma[k]):
            nxt = free.copy()
            nxt[list(combo)] = False
            for rest in rec(k + 1, nxt):
                yield (combo,) + rest

    yield from rec(0, np.ones(N, dtype=bool))


def solve_exhaustive(psi, loading: LoadingSpec, cap: int = 10 ** 7, chunk: int = 65536):
    """Global minimum of the objective by enumerating every feasible assignment.

    Among assignments whose value ties the minimum (to 1e-12 relative), the
    lexicographically smallest flattened ``(A, N)`` array wins.
    """
    P = _as_matrix(psi)
    A, N = loading.beta.shape
    if P.shape != (N, N):
        raise DimensionError(f"coupling {P.shape} does not match {N} RRHs")
    if loading.is_equal_loading and count_feasible(loading) > cap:
        raise ValueError(
            f"exhaustive search over {count_feasible(loading)} assignments exceeds cap {cap}")

    best_f, best_x, seen = math.inf, None, 0
    buf = []

    def flush():
        nonlocal best_f, best_x
        X = np.zeros((len(buf), A, N), dtype=np.int8)
        for b, combos in enumerate(buf):
            for k, combo in enumerate(combos):
                X[b, k, list(combo)] = 1
        Xf = X.astype(float)
        f = np.einsum("bkn,nm,bkm->b", Xf, P, Xf.sum(axis=1)[:, None, :] - Xf)
        buf.clear()
        lo = float(f.min())
        if lo < best_f - 1e-12 * max(1.0, abs(best_f)):
            best_f, best_x = lo, None
        elif lo > best_f + 1e-12 * max(1.0, abs(best_f)):
            return
        best_f = min(best_f, lo)
        tie = np.flatnonzero(f <= best_f + 1e-12 * max(1.0, abs(best_f)))
        cands = [tuple(X[i].ravel()) for i in tie]
        if best_x is not None:
            cands.append(tuple(best_x.ravel()))
        best_x = np.array(min(cands), dtype=np.int8).reshape(A, N)

    for combos in _enumerate_assignments(loading):
        seen += 1
        if seen > cap:
            raise ValueError(f"exhaustive search exceeds cap {cap}")
        buf.append(combos)
        if len(buf) >= chunk:
            flush()
    if buf:
        flush()
    if best_x is None:
        raise InfeasibleError("no assignment satisfies the loading constraints")
    return Assignment(best_x), max(float(best_f), 0.0)


def solve_relaxed_bcd(psi, A: int | None = None, init=None, max_sweeps: int = 50):
    """Block-coordinate descent on the box relaxation (no binary, no loading).

    The block problem ``min w^T r`` over ``0 <= w <= min(1, omega)`` is solved
    in closed form: upper bound where ``r < 0``, zero where ``r > 0``, and the
    previous value kept where ``r == 0``. Returns ``(FractionalAssignment,
    f_lb, SolveTrace)``.

    ``init`` defaults to the uniform split ``1 / A``. With a nonnegative
    coupling matrix the reached fixed point typically has value 0, which is a
    valid but loose bound.
    """
    P = _as_matrix(psi)
    _check_symmetric(P)
    N = P.shape[0]
    if init is None:
        if A is None:
            raise ConfigError("need A or an initial fractional assignment")
        W = np.full((A, N), 1.0 / A)
    else:
        W = np.array(_as_blocks(init), dtype=float)
        FractionalAssignment(W)
    f = objective(P, W)
    trace = SolveTrace(f_history=[f])
    for _ in range(max_sweeps):
        moved = False
        for k in range(W.shape[0]):
            others = W.sum(axis=0) - W[k]
            r = P @ others
            upper = np.clip(1.0 - others, 0.0, 1.0)
            wk = np.where(r < 0, upper, np.where(r > 0, 0.0, np.minimum(W[k], upper)))
            if not np.array_equal(wk, W[k]):
                moved = True
                W[k] = wk
            f_new = objective(P, W)
            if f_new > f + 1e-9 * max(1.0, abs(f)):
                raise RuntimeError(f"relaxed block update of AD {k} increased the objective")
            f = f_new
            trace.f_history.append(f)
        trace.sweeps += 1
        trace.changed.append(moved)
        if not moved:
            trace.converged = True
            break
    if f == 0.0:
        log.debug("relaxed BCD reached a zero-valued fixed point; bound is trivial")
    return FractionalAssignment(W), f, trace


def project_to_feasible(w, beta, gamma) -> np.ndarray:
    """Nearest binary vector with ``gamma`` ones: keep the largest entries.

    Ties go to the lower index. Only count loads (all-ones ``beta``) are
    supported.
    """
    w = np.asarray(w, dtype=float)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), w.shape)
    if not (np.all(beta == 1.0) and float(gamma).is_integer()):
        raise ValueError("projection is only defined for all-ones weights and integer loads")
    g = int(gamma)
    if g > w.size:
        raise InfeasibleError(f"cannot place {g} ones in a vector of length {w.size}")
    order = np.argsort(-w, kind="stable")
    x = np.zeros(w.size, dtype=np.int8)
    x[order[:g]] = 1
    return x
