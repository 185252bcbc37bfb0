"""Command-line entry point.

Exit status: 0 on success, 1 on configuration/input errors, 2 when the
loading constraints cannot be met.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import adf, coupling, harness
from .errors import ConfigError, DimensionError, InfeasibleError

# Two tightly coupled pairs, {0, 1} and {2, 3}.
DEMO_PSI = np.array([
    [0.0, 5.0, 1.0, 2.0],
    [5.0, 0.0, 1.0, 1.0],
    [1.0, 1.0, 0.0, 4.0],
    [2.0, 1.0, 4.0, 0.0],
])


def _csv_floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _load_psi(args) -> np.ndarray:
    if args.demo:
        return DEMO_PSI.copy()
    if not args.psi:
        raise ConfigError("give a coupling CSV path or --demo")
    try:
        with open(args.psi) as fh:
            return coupling.read_psi_csv(fh).psi
    except FileNotFoundError as exc:
        raise ConfigError(f"coupling file not found: {args.psi}") from exc


def _loading(args, N: int) -> adf.LoadingSpec:
    if args.gamma is None:
        return adf.LoadingSpec.equal(N, args.ads)
    gamma = np.asarray(_csv_floats(args.gamma))
    if gamma.size != args.ads:
        raise ConfigError(f"--gamma needs {args.ads} values, got {gamma.size}")
    beta = np.ones(N) if args.beta is None else np.asarray(_csv_floats(args.beta))
    if beta.size != N:
        raise ConfigError(f"--beta needs {N} values, got {beta.size}")
    return adf.LoadingSpec(np.tile(beta, (args.ads, 1)), gamma)


def _print_assignment(assignment, out):
    for k in range(assignment.n_ads):
        out.write(f"{k}: {','.join(str(i) for i in assignment.members(k))}\n")


def _cmd_solve(args, out):
    psi = _load_psi(args)
    loading = _loading(args, psi.shape[0])
    result, trace = adf.solve_bcd_restarts(psi, loading, args.restarts, args.seed, args.max_sweeps)
    _print_assignment(result, out)
    out.write(f"f: {trace.f_history[-1]:.9g}\n")
    out.write("f_history: " + ",".join(f"{v:.9g}" for v in trace.f_history) + "\n")


def _cmd_exhaustive(args, out):
    psi = _load_psi(args)
    loading = _loading(args, psi.shape[0])
    result, f = adf.solve_exhaustive(psi, loading, cap=args.cap)
    _print_assignment(result, out)
    out.write(f"f: {f:.9g}\n")


def _cmd_bound(args, out):
    psi = _load_psi(args)
    w, f_lb, trace = adf.solve_relaxed_bcd(psi, args.ads, max_sweeps=args.max_sweeps)
    for k, row in enumerate(w.w):
        out.write(f"{k}: {','.join(f'{v:.9g}' for v in row)}\n")
    out.write(f"f_lb: {f_lb:.9g}\n")
    out.write("f_history: " + ",".join(f"{v:.9g}" for v in trace.f_history) + "\n")


def _cmd_sweep(args, out):
    if args.config:
        config = harness.ExperimentConfig.from_file(args.config)
    else:
        config = harness.ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.schemes:
        overrides["schemes"] = args.schemes.split(",")
    if args.csi:
        overrides["csi_mode"] = args.csi.split(",")
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        config = harness.ExperimentConfig.from_dict({**config.to_dict(), **overrides})
    table = harness.run_experiment(config, jobs=args.jobs)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            table.write_csv(fh)
    else:
        table.write_csv(out)
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            harness.write_summary_csv(harness.summarize(table), fh)


def _cmd_demo(args, out):
    json.dump(harness.ExperimentConfig().to_dict(), out, indent=2)
    out.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cran-adf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def matrix_args(p, loading=True):
        p.add_argument("psi", nargs="?", help="coupling matrix CSV (N rows of N values)")
        p.add_argument("--demo", action="store_true", help="use the built-in 4x4 demo matrix")
        p.add_argument("--ads", "-A", type=int, default=2, help="number of antenna domains")
        if loading:
            p.add_argument("--gamma", help="comma-separated loads, one per AD (default N/A)")
            p.add_argument("--beta", help="comma-separated load weights per RRH (default 1)")

    p = sub.add_parser("solve", help="block-coordinate descent with random restarts")
    matrix_args(p)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--max-sweeps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("exhaustive", help="global optimum by enumeration")
    matrix_args(p)
    p.add_argument("--cap", type=int, default=10 ** 7)
    p.set_defaults(func=_cmd_exhaustive)

    p = sub.add_parser("bound", help="relaxed lower bound")
    matrix_args(p, loading=False)
    p.add_argument("--max-sweeps", type=int, default=50)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("sweep", help="Monte Carlo SNR sweep to CSV")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="result CSV path (default stdout)")
    p.add_argument("--summary", help="optional path for per-scheme means")
    p.add_argument("--seed", type=int)
    p.add_argument("--schemes", help="comma-separated subset of " + ",".join(harness.SCHEMES))
    p.add_argument("--csi", help="instantaneous, statistical, or both comma-separated")
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("demo", help="print the default experiment config")
    p.set_defaults(func=_cmd_demo)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, out)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, DimensionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
