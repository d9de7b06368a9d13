"""Run configuration, orchestration of the test battery and report rendering."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .combination import SimesResult, pcadf_family, scadf_family
from .data import MonthIndex, RawSeries, load_csv
from .firstgen import choi_z, llc_test, maddala_wu, ips_test, unit_adf_pvalues
from .regression import AdfSpec, LrvSpec
from .results import LEVELS
from .rird import Benchmark, InflationMode, SummaryRow, compute_rird, real_rate_panel, summary_stats
from .secondgen import choi2006_tests, cips_test, moon_perron_test
from .tables import TableCache

__all__ = [
    "TEST_NAMES",
    "DISPLAY_NAMES",
    "GENERATIONS",
    "RunConfig",
    "ConfigError",
    "StageError",
    "ReportRow",
    "Report",
    "load_config",
    "run",
    "emit",
    "read_results_csv",
]

GENERATIONS = {
    "first": ("mw", "choi", "llc", "ips"),
    "second": ("mp", "choi2006", "cips"),
    "combination": ("padf", "pcadf", "pcadf_pc", "sadf", "scadf", "scadf_pc"),
}
TEST_NAMES = tuple(t for names in GENERATIONS.values() for t in names)
_GENERATION_OF = {t: g for g, names in GENERATIONS.items() for t in names}
DISPLAY_NAMES = {"mw": "MW", "choi": "Choi", "llc": "LLC", "ips": "IPS", "mp": "MP", "choi2006": "Choi 2006",
                 "cips": "CIPS", "padf": "pADF", "pcadf": "pCADF", "pcadf_pc": "pCADF_PC", "sadf": "sADF",
                 "scadf": "sCADF", "scadf_pc": "sCADF_PC"}
FORMATS = ("csv", "markdown")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """Failure tagged with the pipeline stage it happened in."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class RunConfig:
    """Every parameter of a run; validated on construction.

    ``window`` is an inclusive ``("YYYY-MM", "YYYY-MM")`` pair applied to the
    real-rate panels.
    """

    input: str
    inflation_modes: tuple[str, ...] = ("ex_ante", "ex_post")
    benchmarks: tuple[str, ...] = ("euro_area", "group_average")
    horizon: int = 12
    tests: tuple[str, ...] = TEST_NAMES
    max_lag: int = 5
    lag_criterion: str = "aic"
    seed: int = 20240611
    reps: int = 20000
    cd_threshold: float = 0.10
    cache_dir: str | None = None
    output_format: str = "csv"
    window: tuple[str, str] | None = None
    leave_one_out: bool = False
    factors: int = 1

    def __post_init__(self):
        def fix(name, value):
            object.__setattr__(self, name, value)

        if not isinstance(self.input, str) or not self.input:
            raise ConfigError("input must be a non-empty path")
        for name, enum_cls in (("inflation_modes", InflationMode), ("benchmarks", Benchmark)):
            raw = getattr(self, name)
            raw = (raw,) if isinstance(raw, str) else tuple(raw)
            if not raw:
                raise ConfigError(f"{name} must not be empty")
            allowed = [m.value for m in enum_cls]
            for v in raw:
                if v not in allowed:
                    raise ConfigError(f"{name}: unknown value {v!r}; choose from {allowed}")
            fix(name, raw)
        tests = (self.tests,) if isinstance(self.tests, str) else tuple(self.tests)
        unknown = [t for t in tests if t not in TEST_NAMES]
        if unknown:
            raise ConfigError(f"unknown test name(s) {unknown}; choose from {list(TEST_NAMES)}")
        if len(set(tests)) != len(tests):
            raise ConfigError("tests must not repeat")
        fix("tests", tests)
        for name, lo in (("horizon", 1), ("max_lag", 0), ("reps", 10000), ("factors", 1)):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.lag_criterion != "aic":
            raise ConfigError("lag_criterion must be 'aic'")
        if isinstance(self.cd_threshold, bool) or not isinstance(self.cd_threshold, (int, float)) \
                or not 0.0 <= self.cd_threshold <= 1.0:
            raise ConfigError("cd_threshold must lie in [0, 1]")
        fix("cd_threshold", float(self.cd_threshold))
        if self.output_format not in FORMATS:
            raise ConfigError(f"output_format must be one of {FORMATS}")
        if self.cache_dir is not None and not isinstance(self.cache_dir, str):
            raise ConfigError("cache_dir must be a path or null")
        if not isinstance(self.leave_one_out, bool):
            raise ConfigError("leave_one_out must be true or false")
        if self.window is not None:
            try:
                lo, hi = (MonthIndex.parse(w) for w in self.window)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"window: {exc}") from None
            if hi < lo:
                raise ConfigError("window end precedes its start")
            fix("window", (str(lo), str(hi)))

    @classmethod
    def from_dict(cls, data: Mapping[str, object], base_dir: Path | None = None) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config key(s) {unknown}")
        if "input" not in data:
            raise ConfigError("config needs an 'input' path")
        data = dict(data)
        for key in ("inflation_modes", "benchmarks", "tests", "window"):
            if isinstance(data.get(key), list):
                data[key] = tuple(data[key])
        if base_dir is not None:
            for key in ("input", "cache_dir"):
                if isinstance(data.get(key), str) and not Path(data[key]).is_absolute():
                    data[key] = str(base_dir / data[key])
        return cls(**data)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


def load_config(path) -> RunConfig:
    """Read a JSON config; relative paths resolve against the config file's directory."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return RunConfig.from_dict(data, path.parent)


@dataclass(frozen=True)
class ReportRow:
    """One test outcome in one (mode, benchmark) cell.

    ``decisions`` holds ``"reject"``/``"accept"`` for statistic-based tests
    and ``"TRUE"``/``"FALSE"`` (TRUE = no rejection) for intersection tests.
    """

    mode: str
    benchmark: str
    generation: str
    test: str
    statistic: float | None
    p_value: float | None
    critical_values: Mapping[float, float]
    decisions: Mapping[float, str]
    tail: str | None = None
    note: str = ""
    error: str | None = None


@dataclass(frozen=True)
class Report:
    metadata: Mapping[str, object]
    summaries: Mapping[tuple[str, str], Mapping[str, SummaryRow]]
    rows: Sequence[ReportRow] = field(default_factory=tuple)

    @property
    def failures(self) -> list[ReportRow]:
        return [r for r in self.rows if r.error is not None]

    def row(self, mode: str, benchmark: str, test: str) -> ReportRow:
        for r in self.rows:
            if (r.mode, r.benchmark, r.test) == (mode, benchmark, test):
                return r
        raise KeyError((mode, benchmark, test))


def _result_rows(name, outcome, mode, bench) -> list[ReportRow]:
    gen = _GENERATION_OF[name]
    if isinstance(outcome, SimesResult):
        dec = {a: "TRUE" if d.accept else "FALSE" for a, d in outcome.decisions.items()}
        return [ReportRow(mode, bench, gen, outcome.test_name, None, None, {}, dec, None, "intersection")]
    results = outcome.values() if isinstance(outcome, dict) else [outcome]
    rows = []
    for res in results:
        note = f"branch={res.diagnostics['branch']}" if "branch" in res.diagnostics else ""
        rows.append(ReportRow(mode, bench, gen, res.test_name, res.statistic, res.p_value,
                              dict(res.critical_values), dict(res.decisions), res.tail, note))
    return rows


def _battery(config: RunConfig, tables: TableCache) -> dict[str, Callable]:
    spec = AdfSpec.aic(config.max_lag)
    lrv = LrvSpec()

    def first(p, which):
        _, diags = unit_adf_pvalues(p, spec, tables)
        pv = [d.p_value for d in diags]
        return maddala_wu(pv, diags) if which == "mw" else choi_z(pv, diags)

    return {
        "mw": lambda p: first(p, "mw"),
        "choi": lambda p: first(p, "choi"),
        "llc": lambda p: llc_test(p, lrv, config.max_lag, tables),
        "ips": lambda p: ips_test(p, spec, tables),
        "mp": lambda p: moon_perron_test(p, config.factors, lrv),
        "choi2006": lambda p: choi2006_tests(p, spec, tables),
        "cips": lambda p: cips_test(p, spec, tables),
        "padf": lambda p: pcadf_family(p, "ADF", spec, lrv, config.cd_threshold, tables),
        "pcadf": lambda p: pcadf_family(p, "CADF", spec, lrv, config.cd_threshold, tables),
        "pcadf_pc": lambda p: pcadf_family(p, "CADF_PC", spec, lrv, config.cd_threshold, tables),
        "sadf": lambda p: scadf_family(p, "ADF", spec, lrv, tables=tables),
        "scadf": lambda p: scadf_family(p, "CADF", spec, lrv, tables=tables),
        "scadf_pc": lambda p: scadf_family(p, "CADF_PC", spec, lrv, tables=tables),
    }


def run(config: RunConfig, series: Sequence[RawSeries] | None = None, tables: TableCache | None = None) -> Report:
    """Build every (mode, benchmark) RIRD panel and run the configured tests on it.

    Ingestion and panel construction errors abort with a :class:`StageError`;
    a failing test is recorded in its row and the run continues.
    """
    if series is None:
        try:
            series = load_csv(config.input)
        except (OSError, ValueError) as exc:
            raise StageError("ingest", str(exc)) from exc
    tables = tables or TableCache(config.cache_dir, seed=config.seed, reps=config.reps)
    battery = _battery(config, tables)
    window = None
    if config.window is not None:
        window = tuple(MonthIndex.parse(w) for w in config.window)

    summaries, rows = {}, []
    for mode in config.inflation_modes:
        try:
            real = real_rate_panel(series, mode, config.horizon, window)
        except (ValueError, KeyError) as exc:
            raise StageError(f"rird:{mode}", str(exc)) from exc
        for bench in config.benchmarks:
            try:
                rird = compute_rird(real, bench, mode, config.leave_one_out)
                summaries[(mode, bench)] = summary_stats(rird)
            except ValueError as exc:
                raise StageError(f"rird:{mode}/{bench}", str(exc)) from exc
            for name in config.tests:
                try:
                    rows.extend(_result_rows(name, battery[name](rird.panel), mode, bench))
                except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                    rows.append(ReportRow(mode, bench, _GENERATION_OF[name], DISPLAY_NAMES[name], None, None, {}, {},
                                          error=f"[test:{name}] {type(exc).__name__}: {exc}"))

    metadata = {
        "config": config.as_dict(),
        "tables": tables.describe(),
        "table_events": [list(e) for e in tables.events],
        "versions": {"panelur": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "conventions": {"levels": list(LEVELS), "decision": "reject when the statistic lies strictly beyond "
                        "the critical value in the test's tail",
                        "intersection": "TRUE = the intersection test does not reject"},
    }
    return Report(metadata, summaries, tuple(rows))


# --- rendering -----------------------------------------------------------------------------

_RESULT_FIELDS = ("mode", "benchmark", "generation", "test", "statistic", "p_value", "tail",
                  "cv_1", "cv_5", "cv_10", "decision_1", "decision_5", "decision_10", "note", "error")
_SUMMARY_FIELDS = ("mode", "benchmark", "unit", "min", "max", "mean", "sd", "n")


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _result_record(r: ReportRow) -> list[str]:
    cv = [_num(r.critical_values.get(a)) for a in LEVELS]
    dec = [r.decisions.get(a, "") for a in LEVELS]
    return [r.mode, r.benchmark, r.generation, r.test, _num(r.statistic), _num(r.p_value), r.tail or "",
            *cv, *dec, r.note, r.error or ""]


def _write_csv(path: Path, header, records) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(records)


def _fmt(x, digits=4) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.{digits}f}"


def _markdown(report: Report) -> str:
    lines = ["# Panel unit root report", "", "## Run metadata", "", "```json",
             json.dumps(report.metadata, indent=2, sort_keys=True), "```", ""]
    lines += ["## RIRD summary statistics", ""]
    for (mode, bench), rows in report.summaries.items():
        lines += [f"### {mode} / {bench}", "", "| unit | min | max | mean | sd | n |", "|---|---|---|---|---|---|"]
        for unit, s in rows.items():
            lines.append(f"| {unit} | {_fmt(s.min, 2)} | {_fmt(s.max, 2)} | {_fmt(s.mean, 2)} | {_fmt(s.sd, 2)} | {s.n} |")
        lines.append("")
    combos = list(dict.fromkeys((r.mode, r.benchmark) for r in report.rows))
    titles = {"first": "First-generation tests", "second": "Second-generation tests",
              "combination": "Combination and intersection tests"}
    for gen, title in titles.items():
        gen_rows = [r for r in report.rows if r.generation == gen]
        if not gen_rows:
            continue
        lines += [f"## {title}", ""]
        stat_rows = [r for r in gen_rows if r.note != "intersection"]
        if stat_rows:
            head = ["test"] + [f"{m} / {b}" for m, b in combos] + ["1%", "5%", "10%", "tail"]
            lines += ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
            for test in dict.fromkeys(r.test for r in stat_rows):
                cells, ref = [], None
                for m, b in combos:
                    hit = [r for r in stat_rows if (r.mode, r.benchmark, r.test) == (m, b, test)]
                    if not hit:
                        cells.append("")
                        continue
                    r = hit[0]
                    if r.error:
                        cells.append(f"error: {r.error}")
                        continue
                    ref = ref or r
                    p = f" (p={_fmt(r.p_value)})" if r.p_value is not None else ""
                    star = "*" if r.decisions.get(0.05) == "reject" else ""
                    cells.append(f"{_fmt(r.statistic)}{p}{star}")
                cv = [_fmt(ref.critical_values.get(a)) for a in LEVELS] if ref else ["", "", ""]
                lines.append("| " + " | ".join([test, *cells, *cv, ref.tail if ref else ""]) + " |")
            lines += ["", "Left-tail tests reject below the critical value, right-tail tests above it; "
                      "`*` marks rejection at 5%.", ""]
        simes_rows = [r for r in gen_rows if r.note == "intersection"]
        if simes_rows:
            head = ["test"] + [f"{m} / {b} ({lvl})" for m, b in combos for lvl in ("1%", "5%", "10%")]
            lines += ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
            for test in dict.fromkeys(r.test for r in simes_rows):
                cells = []
                for m, b in combos:
                    hit = [r for r in simes_rows if (r.mode, r.benchmark, r.test) == (m, b, test)]
                    cells += [hit[0].decisions.get(a, "") if hit else "" for a in LEVELS]
                lines.append("| " + " | ".join([test, *cells]) + " |")
            lines += ["", "TRUE indicates that the intersection test does not reject the unit root null.", ""]
    return "\n".join(lines).rstrip() + "\n"


def emit(report: Report, out_dir, fmt: str = "csv") -> list[Path]:
    """Write the report; CSV gives ``results.csv``, ``summary.csv`` and ``metadata.json``."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "markdown":
            path = out / "report.md"
            path.write_text(_markdown(report), encoding="utf-8")
            return [path]
        results = out / "results.csv"
        _write_csv(results, _RESULT_FIELDS, [_result_record(r) for r in report.rows])
        summary = out / "summary.csv"
        _write_csv(summary, _SUMMARY_FIELDS, [
            [m, b, unit, _num(s.min), _num(s.max), _num(s.mean), _num(s.sd), str(s.n)]
            for (m, b), rows in report.summaries.items() for unit, s in rows.items()
        ])
        meta = out / "metadata.json"
        meta.write_text(json.dumps(report.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return [results, summary, meta]
    except OSError as exc:
        raise StageError("emit", str(exc)) from exc


def read_results_csv(path) -> list[ReportRow]:
    """Parse ``results.csv`` back into rows."""
    def num(s):
        return float(s) if s else None

    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            cv = {a: float(rec[f"cv_{k}"]) for a, k in zip(LEVELS, (1, 5, 10)) if rec[f"cv_{k}"]}
            dec = {a: rec[f"decision_{k}"] for a, k in zip(LEVELS, (1, 5, 10)) if rec[f"decision_{k}"]}
            rows.append(ReportRow(rec["mode"], rec["benchmark"], rec["generation"], rec["test"],
                                  num(rec["statistic"]), num(rec["p_value"]), cv, dec, rec["tail"] or None,
                                  rec["note"], rec["error"] or None))
    return rows
