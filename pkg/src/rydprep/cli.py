"""Command-line entry point: ``rydprep {rk-sweep,rk-scaling,w-sweep,trajectory}``.

Exit codes: 0 success, 1 invalid arguments or configuration, 2 solver failure.
"""

import argparse
import json
import logging
import sys
import time

import tomli

from .errors import ArgumentError, SolverError
from .experiments import (
    EXPERIMENTS,
    RunConfig,
    SweepError,
    peak_table,
    rows_to_csv,
    run_rk_scaling,
    run_rk_sweep,
    run_trajectory,
    run_w_sweep,
    write_outputs,
)

EXIT_OK, EXIT_ARGS, EXIT_SOLVER = 0, 1, 2

RUNNERS = {"rk-sweep": run_rk_sweep, "rk-scaling": run_rk_scaling, "w-sweep": run_w_sweep}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return [int(x) for x in text.replace(",", " ").split()]


def build_parser():
    parser = _Parser(prog="rydprep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML file of flat key = value settings")
        p.add_argument("--output", help="output path (CSV for sweeps, JSON for trajectory)")
        p.add_argument("--method", choices=["direct", "mcwf", "auto"])
        p.add_argument("--n", type=int, help="number of sites")
        p.add_argument("--n-list", type=_int_list, help="site counts, e.g. '5,7,9'")
        p.add_argument("--delta", type=float)
        p.add_argument("--delta-min", type=float)
        p.add_argument("--delta-max", type=float)
        p.add_argument("--delta-step", type=float)
        p.add_argument("--omega", type=float)
        p.add_argument("--V", type=float)
        p.add_argument("--kappa", type=float)
        p.add_argument("--pump", type=float)
        p.add_argument("--xi", type=float)
        p.add_argument("--family", choices=["rk", "w"])
        p.add_argument("--n-traj", type=int)
        p.add_argument("--t-burn", type=float)
        p.add_argument("--t-avg", type=float)
        p.add_argument("--t-final", type=float)
        p.add_argument("--n-samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--propagator", choices=["rk45", "spectral"])
        p.add_argument("--auto-threshold", type=int)
        p.add_argument("--max-dim", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(path):
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    for key, value in data.items():
        if isinstance(value, dict):
            raise ArgumentError(f"configuration must be flat; key {key!r} is a table")
    return data


def resolve_config(args):
    values = load_config(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items()
             if k not in ("config", "experiment", "verbose") and v is not None}
    values.update(flags)
    return RunConfig.from_mapping(args.experiment, values)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except (ArgumentError, OSError, tomli.TOMLDecodeError, TypeError) as exc:
        print(f"rydprep: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    output = cfg.output or f"{cfg.experiment}.{'json' if cfg.experiment == 'trajectory' else 'csv'}"

    start = time.perf_counter()
    if cfg.experiment == "trajectory":
        try:
            dump = run_trajectory(cfg)
        except SolverError as exc:
            print(f"rydprep: solver error: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        write_outputs(output, json.dumps(dump, sort_keys=True) + "\n", cfg,
                      time.perf_counter() - start)
        return EXIT_OK

    status, error = EXIT_OK, None
    try:
        rows, infos = RUNNERS[cfg.experiment](cfg)
    except SweepError as exc:
        rows, infos, status, error = exc.rows, [], EXIT_SOLVER, str(exc)
        print(f"rydprep: solver error: {exc}", file=sys.stderr)
    extra = {"points": infos, "error": error}
    if cfg.experiment == "w-sweep":
        extra["peaks"] = peak_table(rows)
    write_outputs(output, rows_to_csv(rows), cfg, time.perf_counter() - start, extra)
    return status


if __name__ == "__main__":
    sys.exit(main())
