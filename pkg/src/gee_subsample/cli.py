"""Command-line front end: ``gee-subsample {fit,subfit,simulate,bench,holdout}``.

Every option can also come from a TOML or JSON file passed with
``--config``; keys are option names with dashes or underscores, and flags
given on the command line win over the file.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure, 3 I/O or input-data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DataError, NumericalError
from .gee import FitConfig, fit
from .harness import PRESETS, BenchmarkConfig, emit_plot_data, run_benchmark, run_holdout
from .panel import CsvSchema, read_panel, write_panel
from .simulate import SimConfig, simulate
from .subsampling import subsample_fit

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for numerical failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(text, cast=str):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return tuple(cast(t) for t in text)
    return tuple(cast(t.strip()) for t in str(text).split(",") if t.strip())


def _add_data_args(p):
    p.add_argument("--data", required=True, help="long-format panel CSV")
    p.add_argument("--id-col", default="id")
    p.add_argument("--time-col", default="time", help="empty string keeps file order")
    p.add_argument("--response", default="y")
    p.add_argument("--covariates", default=None, help="comma-separated; default: all other columns")


def _add_model_args(p, structure_default="independent"):
    p.add_argument("--family", default="gaussian", help="gaussian, poisson or binomial")
    p.add_argument("--structure", default=structure_default,
                   help="independent, exchangeable, ar1 or unstructured")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)


def _add_bench_args(p):
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--r-grid", default=None, help="comma-separated subsample sizes")
    p.add_argument("--r0", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--methods", default=None, help="subset of uniform,mV,mVc")
    p.add_argument("--structures", default=None, help="subset of ind,exch,ar1,un")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--timing", action="store_true", help="record wall-clock fit times")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", default=None, help="tidy per-cell CSV output")
    p.add_argument("--json", default=None, help="full report as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gee-subsample", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="GEE fit on a CSV panel")
    p.add_argument("--config", default=None)
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--out", default=None, help="write the result JSON here instead of stdout")

    p = sub.add_parser("subfit", help="optimal-subsampling GEE fit on a CSV panel")
    p.add_argument("--config", default=None)
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--method", default="mVc", help="uniform, mV or mVc")
    p.add_argument("--r0", type=int, default=200)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--delta", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--literal-floor", action="store_true",
                   help="floor residuals as max(S, delta) instead of keeping their sign")
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="write a simulated panel as CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--case", default="1", help="1/linear, 2/count or 3/binary")
    p.add_argument("--m", type=int, default=10000)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--error-dist", default="mvnormal", help="mvnormal or mvt3 (linear only)")
    p.add_argument("--true-corr", default="ar1_05", help="independent or ar1_05")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="Monte Carlo MSE and timing benchmark")
    p.add_argument("--config", default=None)
    p.add_argument("--case", default="1")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--error-dist", default="mvnormal")
    p.add_argument("--true-corr", default="ar1_05")
    _add_bench_args(p)

    p = sub.add_parser("holdout", help="train/test prediction-error study on a CSV panel")
    p.add_argument("--config", default=None)
    _add_data_args(p)
    p.add_argument("--family", default="gaussian")
    p.add_argument("--train-fraction", type=float, required=True)
    _add_bench_args(p)

    parser.subcommands = sub.choices
    return parser


def _load_config(path) -> dict:
    path = Path(path)
    with open(path, "rb") as fh:
        if path.suffix.lower() == ".json":
            data = json.load(fh)
        else:
            data = tomllib.load(fh)
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a table/object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, rest = pre.parse_known_args(argv)
    command = next((a for a in rest if a in parser.subcommands), None)
    if known.config is not None and command is not None:
        try:
            config = _load_config(known.config)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {known.config}: {exc}") from exc
        # file values become defaults, so explicit flags still win
        sub = parser.subcommands[command]
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(config) - set(actions))
        if unknown:
            raise UsageError(f"unknown config keys for {command!r}: {', '.join(unknown)}")
        for dest in config:
            actions[dest].required = False
        sub.set_defaults(**config)
    return parser.parse_args(argv)


def _schema(args) -> CsvSchema:
    return CsvSchema(
        id=args.id_col,
        time=args.time_col or None,
        response=args.response,
        covariates=_csv_list(args.covariates),
    )


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _fit_config(args):
    return FitConfig(max_outer_iter=args.max_iter, tol=args.tol)


def cmd_fit(args) -> int:
    panel = read_panel(args.data, _schema(args))
    result = fit(panel, args.family, args.structure, config=_fit_config(args))
    _emit_json({"covariates": list(panel.covariate_names), **result.to_dict()}, args.out)
    return EXIT_OK if result.converged else EXIT_NUMERICAL


def cmd_subfit(args) -> int:
    panel = read_panel(args.data, _schema(args))
    result = subsample_fit(
        panel, args.method, args.r0, args.r, args.family, args.structure,
        delta=args.delta, seed=args.seed, config=_fit_config(args),
        literal_floor=args.literal_floor,
    )
    _emit_json({"covariates": list(panel.covariate_names), **result.to_dict()}, args.out)
    return EXIT_OK if result.converged else EXIT_NUMERICAL


def cmd_simulate(args) -> int:
    cfg = SimConfig(args.case, args.m, args.n, args.error_dist, args.true_corr, seed=args.seed)
    write_panel(simulate(cfg), args.out)
    return EXIT_OK


def _bench_overrides(args) -> dict:
    overrides = {
        "r_grid": _csv_list(args.r_grid, int),
        "r0": args.r0,
        "replications": args.replications,
        "methods": _csv_list(args.methods),
        "structures": _csv_list(args.structures),
        "delta": args.delta,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    overrides.update(seed=args.seed, timing=bool(args.timing), workers=args.workers)
    return overrides


def _write_report(report, args):
    if args.csv:
        emit_plot_data(report, args.csv)
    if args.json:
        report.write_json(args.json)
    if not (args.csv or args.json):
        _emit_json(report.to_dict(), None)


def cmd_bench(args) -> int:
    overrides = _bench_overrides(args)
    overrides.update(case=args.case, n=args.n, error_dist=args.error_dist,
                     true_corr=args.true_corr)
    if args.m is not None:
        overrides["m"] = args.m
    report = run_benchmark(BenchmarkConfig.preset(args.preset, **overrides))
    _write_report(report, args)
    return EXIT_OK


def cmd_holdout(args) -> int:
    panel = read_panel(args.data, _schema(args))
    overrides = _bench_overrides(args)
    overrides.update(family=args.family, m=panel.m, n=panel.n)
    report = run_holdout(panel, args.train_fraction, BenchmarkConfig.preset(args.preset, **overrides))
    _write_report(report, args)
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "subfit": cmd_subfit,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "holdout": cmd_holdout,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
