"""Seeded Monte Carlo sweeps over SNR for several assignment schemes.

A *trial* is one fading realization. Trials are grouped into deployment
drops of ``realizations_per_drop`` consecutive trials: RRH/user positions,
association and pathloss are fixed within a drop. Under statistical CSI the
coupling matrix and every scheme's assignment are computed once per drop and
reused for all of its realizations; under instantaneous CSI both are rebuilt
for every realization.

Leakage (and its relaxed lower bound) is always measured on the
instantaneous coupling of the realization, so values are comparable across
CSI modes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import adf, coordination, coupling, evaluation, scenario
from .errors import ConfigError, InfeasibleError

log = logging.getLogger(__name__)

SCHEMES = ("bcd", "random", "exhaustive", "relaxed_bound")
CSI_MODES = ("instantaneous", "statistical")
CSV_HEADER = ("scheme", "csi_mode", "snr_db", "trial", "sum_rate", "leakage_f",
              "f_lower_bound", "wall_time_ms")


@dataclass
class ExperimentConfig:
    N: int = 16
    A: int = 2
    M: int = 4
    J: int = 2
    C: int = 1
    snr_grid_db: list = field(default_factory=lambda: [0, 5, 10, 15, 20, 25, 30])
    trials: int = 100
    seed: int = 0
    csi_mode: list = field(default_factory=lambda: ["instantaneous"])
    schemes: list = field(default_factory=lambda: ["bcd", "random", "exhaustive"])
    loading: dict | None = None  # {"beta": [[...]], "gamma": [...]}; None = equal loading
    wmmse: dict = field(default_factory=lambda: {"max_iters": 100, "tol": 1e-4})
    restarts: int = 20
    max_sweeps: int = 50
    realizations_per_drop: int = 10
    area_side: float = 100.0
    pathloss_exponent: float = 3.5
    reference_gain: float = 10 ** 3.5  # unit gain at 10 m
    d_min: float = 1.0
    fading: str = "iid_pathloss"
    noise_power: float = 1.0
    exhaustive_cap: int = 10 ** 7
    timing: bool = False

    def __post_init__(self):
        if isinstance(self.csi_mode, str):
            self.csi_mode = [self.csi_mode]
        if isinstance(self.schemes, str):
            self.schemes = [s for s in self.schemes.split(",") if s]
        self.csi_mode = list(self.csi_mode)
        self.schemes = list(self.schemes)
        self.snr_grid_db = [float(x) for x in self.snr_grid_db]
        self.wmmse = {"max_iters": 100, "tol": 1e-4, **(self.wmmse or {})}
        self.validate()

    @property
    def K(self) -> int:
        return self.N * self.J

    def validate(self):
        for name in ("N", "A", "M", "J", "C", "trials", "restarts", "max_sweeps",
                     "realizations_per_drop"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not self.schemes:
            raise ConfigError("schemes must not be empty")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise ConfigError(f"unknown schemes {sorted(bad)}; choose from {SCHEMES}")
        bad = set(self.csi_mode) - set(CSI_MODES)
        if bad or not self.csi_mode:
            raise ConfigError(f"csi_mode must be drawn from {CSI_MODES}")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must not be empty")
        if self.fading not in scenario.FADING_MODES:
            raise ConfigError(f"fading must be one of {scenario.FADING_MODES}")
        if self.noise_power <= 0:
            raise ConfigError("noise_power must be positive")
        self.loading_spec()

    def loading_spec(self) -> adf.LoadingSpec:
        if self.loading is None:
            return adf.LoadingSpec.equal(self.N, self.A)
        try:
            beta = np.asarray(self.loading["beta"], dtype=float)
            gamma = np.asarray(self.loading["gamma"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"loading needs numeric 'beta' and 'gamma': {exc}") from exc
        if beta.ndim == 1:
            beta = np.tile(beta, (self.A, 1))
        if beta.shape != (self.A, self.N) or gamma.shape != (self.A,):
            raise ConfigError(f"loading must give beta ({self.A}, {self.N}) and gamma ({self.A},)")
        return adf.LoadingSpec(beta, gamma)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    csi_mode: str
    snr_db: float
    trial: int
    sum_rate: float
    leakage_f: float
    f_lower_bound: float | None = None
    wall_time_ms: float | None = None


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name, **where):
        return np.array([getattr(r, name) for r in self.rows
                         if all(getattr(r, k) == v for k, v in where.items())], dtype=float)

    def write_csv(self, stream):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([r.scheme, r.csi_mode, _fmt(r.snr_db), r.trial, _fmt(r.sum_rate),
                             _fmt(r.leakage_f), _fmt(r.f_lower_bound), _fmt(r.wall_time_ms)])


def _fmt(x):
    return "" if x is None else format(float(x), ".9g")


def _subseed(*key) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


def _assign(scheme, psi, loading, config, seed, context=""):
    try:
        return _assign_raw(scheme, psi, loading, config, seed)
    except (InfeasibleError, ConfigError, ValueError) as exc:
        if isinstance(exc, InfeasibleError):
            raise InfeasibleError(f"{context}, scheme {scheme}: {exc}", exc.ad) from exc
        raise type(exc)(f"{context}, scheme {scheme}: {exc}") from exc


def _assign_raw(scheme, psi, loading, config, seed):
    if scheme == "bcd":
        result, _ = adf.solve_bcd_restarts(psi, loading, config.restarts, seed, config.max_sweeps)
        return result
    if scheme == "random":
        return adf.random_assignment(seed, loading)
    if scheme == "exhaustive":
        return adf.solve_exhaustive(psi, loading, cap=config.exhaustive_cap)[0]
    raise ValueError(scheme)


def run_drop(config: ExperimentConfig, drop: int, trials, record: dict | None = None):
    """Rows for the given trial indices, all belonging to deployment ``drop``.

    ``record``, when given, collects the assignment object used for every
    ``(csi_mode, scheme)`` in trial order.
    """
    loading = config.loading_spec()
    drop_seed = _subseed(config.seed, drop)
    dep = scenario.drop_deployment(drop_seed, config.N, config.K, config.M, config.J,
                                   config.area_side, config.pathloss_exponent)
    gains = scenario.compute_pathloss(dep, config.pathloss_exponent, config.reference_gain,
                                      config.d_min)
    assign_schemes = [s for s in config.schemes if s != "relaxed_bound"]

    static = {}
    if "statistical" in config.csi_mode:
        psi_stat = coupling.coupling_statistical(gains, dep.association, config.M)
        for scheme in assign_schemes:
            static[scheme] = _assign(scheme, psi_stat, loading, config,
                                     _subseed(config.seed, drop, 1, SCHEMES.index(scheme)),
                                     f"drop {drop}")

    rows = []
    for t in trials:
        real = t - drop * config.realizations_per_drop
        channels = scenario.draw_channels(drop_seed, dep, config.fading, real, gains,
                                          config.noise_power)
        psi = coupling.coupling_instantaneous(channels, dep.association)
        bound = None
        if "relaxed_bound" in config.schemes:
            _, bound, _ = adf.solve_relaxed_bcd(psi, config.A, max_sweeps=config.max_sweeps)
        cache = {}
        powers = [config.noise_power * 10 ** (snr / 10) for snr in config.snr_grid_db]
        for mode in config.csi_mode:
            for scheme in assign_schemes:
                t0 = time.perf_counter()
                if mode == "statistical":
                    assignment = static[scheme]
                else:
                    assignment = _assign(scheme, psi, loading, config,
                                         _subseed(config.seed, drop, 2, real,
                                                  SCHEMES.index(scheme)), f"trial {t}")
                if record is not None:
                    record.setdefault((mode, scheme), []).append(assignment)
                leak = adf.objective(psi, assignment)
                key = assignment.x.tobytes()
                if key not in cache:
                    nets, _ = coordination.coordinate_network_sweep(
                        dep, channels, assignment, config.C, powers, drop_seed,
                        config.wmmse["max_iters"], config.wmmse["tol"])
                    cache[key] = [evaluation.sum_rate(
                        evaluation.compute_sinrs(pre, channels, dep.association)) for pre in nets]
                ms = (time.perf_counter() - t0) * 1e3 if config.timing else None
                for snr, rate in zip(config.snr_grid_db, cache[key]):
                    rows.append(ResultRow(scheme, mode, snr, t, rate, leak, bound, ms))
    return rows


def _drop_job(args):
    config, drop, trials = args
    return run_drop(config, drop, trials)


def run_experiment(config: ExperimentConfig, jobs: int = 1, progress=None) -> ResultTable:
    """Run every trial of ``config``; rows come out in trial order regardless of ``jobs``."""
    rpd = config.realizations_per_drop
    work = []
    for drop in range(math.ceil(config.trials / rpd)):
        trials = range(drop * rpd, min((drop + 1) * rpd, config.trials))
        work.append((config, drop, list(trials)))
    table = ResultTable()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_drop_job, work))
    else:
        results = []
        for item in work:
            results.append(_drop_job(item))
            if progress:
                progress(len(results), len(work))
    for rows in results:
        table.rows.extend(rows)
    return table


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    csi_mode: str
    snr_db: float
    trials: int
    mean_sum_rate: float
    mean_leakage_f: float
    mean_f_lower_bound: float | None
    gap_vs_instantaneous: float | None  # (R_inst - R_stat) / R_inst on statistical rows


def summarize(table: ResultTable) -> list:
    """Mean sum-rate and leakage per (scheme, csi_mode, snr) in first-seen order."""
    if not len(table):
        raise ValueError("cannot summarize an empty result table")
    groups = {}
    for r in table.rows:
        groups.setdefault((r.scheme, r.csi_mode, r.snr_db), []).append(r)
    means = {}
    for key, rows in groups.items():
        bounds = [r.f_lower_bound for r in rows if r.f_lower_bound is not None]
        means[key] = (len(rows), float(np.mean([r.sum_rate for r in rows])),
                      float(np.mean([r.leakage_f for r in rows])),
                      float(np.mean(bounds)) if bounds else None)
    out = []
    for (scheme, mode, snr), (n, rate, leak, lb) in means.items():
        gap = None
        inst = means.get((scheme, "instantaneous", snr))
        if mode == "statistical" and inst is not None and inst[1] != 0:
            gap = (inst[1] - rate) / inst[1]
        out.append(SummaryRow(scheme, mode, snr, n, rate, leak, lb, gap))
    return out


def write_summary_csv(summary, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow([f.name for f in fields(SummaryRow)])
    for s in summary:
        writer.writerow([s.scheme, s.csi_mode, _fmt(s.snr_db), s.trials, _fmt(s.mean_sum_rate),
                         _fmt(s.mean_leakage_f), _fmt(s.mean_f_lower_bound),
                         _fmt(s.gap_vs_instantaneous)])
