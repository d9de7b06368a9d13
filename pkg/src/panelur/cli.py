"""Command-line entry point: ``run``, ``simulate-tables`` and ``gen-synthetic``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .regression import AdfSpec
from .report import ConfigError, StageError, emit, load_config, run
from .synthetic import DGPS, make_panel, pipeline_series
from .tables import FAMILIES, TableCache

EXIT_OK = 0
EXIT_FAILED_TESTS = 1
EXIT_USAGE = 2
EXIT_STAGE = 3


def _fail(stage: str, message: str, code: int) -> int:
    print(f"error [{stage}]: {message}", file=sys.stderr)
    return code


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config).replace(seed=args.seed, reps=args.reps, output_format=args.format,
                                                  cache_dir=args.cache_dir)
    except (ConfigError, ValueError) as exc:
        return _fail("config", str(exc), EXIT_USAGE)
    try:
        report = run(config)
        paths = emit(report, args.out, config.output_format)
    except StageError as exc:
        return _fail(exc.stage, str(exc), EXIT_STAGE)
    for p in paths:
        print(p)
    for row in report.failures:
        print(f"error {row.error} ({row.mode}/{row.benchmark})", file=sys.stderr)
    return EXIT_FAILED_TESTS if report.failures else EXIT_OK


def _cmd_simulate(args) -> int:
    cache = TableCache(args.out, seed=args.seed, reps=args.reps, cips_reps=args.reps, cadf_reps=args.reps)
    fam = args.family
    try:
        if fam in ("df_t", "ips_moments"):
            case = "constant" if fam == "ips_moments" else args.case
            lag = args.p if args.p is not None else f"aic{args.max_lag}"
            table = cache.df_table(case, args.T, lag)
            info = {"mean": table.extras["mean"], "var": table.extras["var"]}
        elif fam == "llc_adjustments":
            info = cache.llc_adjustments(args.N, args.T, args.max_lag)._asdict()
        elif fam == "cips":
            table = cache.cips_table(args.N, args.T, AdfSpec.aic(args.max_lag))
            info = {"5%": table.quantile(0.05)}
        else:
            surface = cache.hansen_surface(args.case, args.T, args.max_lag, args.max_lag)
            info = {"grid": surface.grid.tolist()}
    except ValueError as exc:
        return _fail(f"simulate:{fam}", str(exc), EXIT_USAGE)
    except OSError as exc:
        return _fail(f"simulate:{fam}", str(exc), EXIT_STAGE)
    print(json.dumps({"family": fam, "events": cache.events, **info}, default=float))
    return EXIT_OK


def _cmd_synthetic(args) -> int:
    try:
        if args.layout == "pipeline":
            header = ("date", "country", "variable", "value")
            records = [(str(m), s.unit_id, s.variable, repr(v))
                       for s in pipeline_series(args.n, args.t, args.seed, args.dgp)
                       for m, v in zip(s.months, s.values.tolist())]
        else:
            panel = make_panel(args.dgp, args.n, args.t, args.seed)
            header = ("date", "unit", "value")
            records = [(str(m), u, repr(float(panel.values[i, j])))
                       for i, u in enumerate(panel.units) for j, m in enumerate(panel.time_axis)]
    except ValueError as exc:
        return _fail("gen-synthetic", str(exc), EXIT_USAGE)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(records)
    if args.out:
        try:
            Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
        except OSError as exc:
            return _fail("gen-synthetic", str(exc), EXIT_STAGE)
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panelur", description="Panel unit root tests for interest differentials.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured test battery on an input CSV")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--out", default="panelur-report", help="output directory")
    p.add_argument("--format", choices=("csv", "markdown"))
    p.add_argument("--cache-dir", help="directory for simulated tables")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("simulate-tables", help="simulate a null-distribution table into a cache directory")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--case", default="constant", choices=("none", "constant", "gls"))
    p.add_argument("--T", type=int, default=148)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--p", type=int, help="fixed lag (default: AIC search up to --max-lag)")
    p.add_argument("--max-lag", type=int, default=5)
    p.add_argument("--reps", type=int, default=20000)
    p.add_argument("--seed", type=int, default=20240611)
    p.add_argument("--out", required=True, help="cache directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("gen-synthetic", help="write a simulated dataset as CSV")
    p.add_argument("--dgp", required=True, choices=sorted(DGPS))
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--t", type=int, default=148)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layout", choices=("pipeline", "panel"), default="pipeline",
                   help="pipeline: cpi and rate inputs for 'run'; panel: date,unit,value rows of the panel")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=_cmd_synthetic)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
