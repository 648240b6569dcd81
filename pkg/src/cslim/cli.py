"""Command-line entry point: ``cslim <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure (budget exceeded or a fatal blowup).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from ._kernel import BACKEND
from .errors import (
    ConfigError,
    CSLIMError,
    DataError,
    FailureBudgetExceeded,
    MatrixFunctionError,
    NumericalBlowup,
)
from .experiments import (
    ExperimentConfig,
    check_failure_budget,
    run_experiment,
    write_report,
)
from .models import classical_lim, cs_lim, l_cs_lim
from .plotdata import emit_plot_data
from .simulate import RandomStream, TimeSeries, random_stable_system, sample_path, sinusoidal_system

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

PAPER_SCALE = {"trials": 1024, "Tf_list": [100, 1000, 5000], "members": 1024}


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="master seed")
    p.add_argument("--trials", type=int, default=d, help="trials per group")
    p.add_argument("--out", default=d, metavar="DIR", help="output directory")
    p.add_argument("--config", default=d, metavar="FILE", help="JSON experiment config")
    p.add_argument("--paper-scale", action="store_true", default=d,
                   help="1024 trials / members and Tf in {100, 1000, 5000}")
    p.add_argument("--workers", type=int, default=d, help="worker processes")


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cslim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cslim {__version__} ({BACKEND})")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        _global_flags(sp, suppress=True)
        return sp

    sp = add("simulate", "simulate a sample path and write it as CSV")
    sp.add_argument("--system", choices=("oned", "random"), default="oned")
    sp.add_argument("--n", type=int, default=1, help="dimension for --system random")
    sp.add_argument("--Tf", type=int, default=100, help="periods to simulate")
    sp.add_argument("--dt", type=float, default=0.002)
    sp.add_argument("--stride", type=int, default=5)
    sp.add_argument("--burn-in", type=int, default=0, help="periods discarded first")

    sp = add("fit", "fit one estimator to a TimeSeries CSV")
    sp.add_argument("input", help="CSV with header t,x1,...,xn")
    sp.add_argument("--model", choices=("lim", "cslim", "ecslim", "lcslim"), default="ecslim")
    sp.add_argument("--P", type=int, help="samples per period (default 1/dt)")
    sp.add_argument("--M", type=int, default=10)
    sp.add_argument("--k", type=int, default=10)

    for name, help_ in (("oned", "1-D sinusoidal study"), ("nd", "random n-D study"),
                        ("convergence", "e-CS-LIM to l-CS-LIM convergence")):
        sp = add(name, help_)
        sp.add_argument("--Tf", type=_ints, help="comma-separated Tf list")
        sp.add_argument("--dims", type=_ints, help="comma-separated dimensions")
        sp.add_argument("--M", type=int)
        sp.add_argument("--k", type=int)
        if name == "convergence":
            sp.add_argument("--M-list", type=_ints, help="comma-separated interval counts")
            sp.add_argument("--conv-lag", choices=("one", "interval"))

    sp = add("enso", "monthly-index pipeline (real or synthetic data)")
    sp.add_argument("--data", help="CSV year,month,value (synthetic record if omitted)")
    sp.add_argument("--members", type=int)
    sp.add_argument("--years", type=int, help="ensemble length (default: record length)")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--window", type=int)
    sp.add_argument("--polarity", choices=("absolute", "signed"))
    sp.add_argument("--representative", choices=("mean", "snapshot"))
    sp.add_argument("--roundtrip", action="store_true",
                    help="fit / regenerate / refit self-consistency trials instead")

    sp = add("plotdata", "derive plot-ready CSVs from a report")
    sp.add_argument("report", help="report.json")
    sp.add_argument("--kind", required=True, help="curves, boxes or phases")
    return parser


def _load_config(args, experiment: str) -> ExperimentConfig:
    d = {"experiment": experiment}
    if getattr(args, "paper_scale", None):
        d.update(PAPER_SCALE)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        file_cfg.pop("experiment", None)
        d.update(file_cfg)
    flag_map = {"seed": "master_seed", "trials": "trials", "workers": "workers", "Tf": "Tf_list",
                "dims": "dims", "M": "M", "k": "k", "M_list": "M_list", "conv_lag": "conv_lag",
                "data": "data", "members": "members", "years": "years", "threshold": "threshold",
                "window": "window", "polarity": "polarity", "representative": "representative"}
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    try:
        return ExperimentConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args, default: str) -> str:
    out = getattr(args, "out", None) or default
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    seed = getattr(args, "seed", None) or 0
    stream = RandomStream(seed, 0)
    if args.system == "oned":
        spec = sinusoidal_system([[-1.0]], 0.2, [[1.0]], 0.3)
    else:
        Abar, Qbar = random_stable_system(args.n, stream.child(1))
        spec = sinusoidal_system(Abar, 0.2, Qbar, 0.3)
    ts = sample_path(spec, args.dt, args.Tf, stream.child(0), burn_in_periods=args.burn_in,
                     record_stride=args.stride)
    out = _out_dir(args, ".")
    ts.to_csv(os.path.join(out, "path.csv"))
    with open(os.path.join(out, "system.json"), "w") as fh:
        json.dump({"system": spec.to_dict(), "seed": seed, "dt": args.dt, "stride": args.stride,
                   "Tf": args.Tf, "burn_in_periods": args.burn_in}, fh, sort_keys=True, indent=1,
                  default=lambda a: np.asarray(a).tolist())
    print(f"wrote {len(ts)} samples to {os.path.join(out, 'path.csv')}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    try:
        ts = TimeSeries.from_csv(args.input)
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{args.input}: {exc}") from exc
    P = args.P or int(round(1.0 / ts.dt))
    out = _out_dir(args, ".")
    if args.model == "lim":
        A, Q = classical_lim(ts, args.k)
        path = os.path.join(out, "model_lim.json")
        with open(path, "w") as fh:
            json.dump({"estimator": "lim", "hyper": {"k": args.k, "dt": ts.dt},
                       "A": A.tolist(), "Q": Q.tolist()}, fh, sort_keys=True, indent=1)
    else:
        if args.model == "lcslim":
            model = l_cs_lim(ts, P)
        else:
            model = cs_lim(ts, P, args.M, args.k, "original" if args.model == "cslim" else "e")
        path = os.path.join(out, f"model_{args.model}.json")
        model.to_json(path, indent=1)
        model.to_csv(os.path.join(out, f"model_{args.model}.csv"))
        if model.n_failed:
            print(f"{model.n_failed} phase(s) flagged", file=sys.stderr)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_experiment(args, experiment: str) -> int:
    if experiment == "enso" and args.roundtrip:
        experiment = "enso_roundtrip"
    cfg = _load_config(args, experiment)
    out = _out_dir(args, os.path.join("results", experiment))
    start = time.perf_counter()
    report = run_experiment(cfg, out)
    elapsed = time.perf_counter() - start
    if experiment != "enso":
        write_report(report, os.path.join(out, "report.json"))
    # wall time lives apart from the report so reports stay byte-identical
    with open(os.path.join(out, "timing.json"), "w") as fh:
        json.dump({"wall_seconds": elapsed, "backend": BACKEND}, fh, sort_keys=True)
    print(f"wrote {os.path.join(out, 'report.json')} ({elapsed:.1f} s)")
    if "n_trials_total" in report:
        print(f"{report['n_trials_total']} trials, {report['n_failed']} failed")
        check_failure_budget(report)
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {args.report}: {exc}") from exc
    out = _out_dir(args, os.path.dirname(os.path.abspath(args.report)))
    for path in emit_plot_data(report, args.kind, out):
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "plotdata":
            return _cmd_plotdata(args)
        return _cmd_experiment(args, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FailureBudgetExceeded, NumericalBlowup, MatrixFunctionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CSLIMError, ValueError) as exc:
        # remaining errors are argument problems (bad stride, indivisible M, ...)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
