import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from panelur.report import (
    TEST_NAMES,
    ConfigError,
    RunConfig,
    StageError,
    emit,
    load_config,
    read_results_csv,
    run,
)
from panelur.synthetic import pipeline_series

from conftest import SEED

GOLDEN = Path(__file__).parent / "golden" / "battery_results.csv"


@pytest.fixture(scope="module")
def series():
    return pipeline_series(10, 148, seed=7)


@pytest.fixture(scope="module")
def full_report(series, small_tables):
    return run(RunConfig(input="unused.csv"), series=series, tables=small_tables)


# --- configuration ---


@pytest.mark.parametrize(
    "changes,match",
    [
        ({"inflation_modes": ["ex_ante", "lagged"]}, "inflation_modes"),
        ({"benchmarks": []}, "benchmarks"),
        ({"tests": ["mw", "kpss"]}, "unknown test"),
        ({"tests": ["mw", "mw"]}, "repeat"),
        ({"reps": 5000}, "reps"),
        ({"reps": True}, "reps"),
        ({"horizon": 0}, "horizon"),
        ({"seed": -1}, "seed"),
        ({"cd_threshold": 1.5}, "cd_threshold"),
        ({"lag_criterion": "bic"}, "lag_criterion"),
        ({"output_format": "xlsx"}, "output_format"),
        ({"window": ["2012-04", "2000-01"]}, "precedes"),
        ({"window": ["2000-1", "2012-04"]}, "window"),
        ({"leave_one_out": 1}, "leave_one_out"),
        ({"colour": "blue"}, "unknown config key"),
    ],
)
def test_config_validation(changes, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_dict({"input": "x.csv", **changes})


def test_config_defaults_and_paths(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"input": "data/in.csv", "cache_dir": "cache", "tests": ["mw"]}))
    cfg = load_config(path)
    assert cfg.input == str(tmp_path / "data" / "in.csv")
    assert cfg.cache_dir == str(tmp_path / "cache")
    assert cfg.tests == ("mw",)
    assert (cfg.horizon, cfg.max_lag, cfg.seed, cfg.cd_threshold) == (12, 5, 20240611, 0.10)
    assert cfg.replace(seed=3, reps=None).seed == 3
    with pytest.raises(ConfigError, match="input"):
        RunConfig.from_dict({"tests": ["mw"]})
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_config(path)
    path.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)


# --- orchestration ---


def test_full_battery_layout(full_report):
    r = full_report
    assert len(r.summaries) == 4
    # 13 test groups, of which MP yields two rows and Choi (2006) three
    assert len(r.rows) == 4 * 16
    names = [row.test for row in r.rows if (row.mode, row.benchmark) == ("ex_ante", "euro_area")]
    assert names[:4] == ["MW", "Choi", "LLC", "IPS"]
    assert names[-3:] == ["sADF", "sCADF", "sCADF_PC"]
    assert all(row.decisions.get(0.05) in ("TRUE", "FALSE") for row in r.rows if row.note == "intersection")


def test_group_average_cadf_is_an_error_row(full_report):
    failed = {(row.mode, row.benchmark, row.test) for row in full_report.failures}
    assert failed == {(m, "group_average", t) for m in ("ex_ante", "ex_post") for t in ("pCADF", "sCADF")}
    row = full_report.row("ex_ante", "group_average", "pCADF")
    assert row.error.startswith("[test:pcadf] PanelError")
    assert row.statistic is None and row.decisions == {}


def test_choi2006_does_not_depend_on_benchmark(full_report):
    # cross-section demeaning removes the benchmark entirely
    for mode in ("ex_ante", "ex_post"):
        for test in ("Choi Pm", "Choi Z", "Choi L*"):
            a = full_report.row(mode, "euro_area", test).statistic
            b = full_report.row(mode, "group_average", test).statistic
            assert b == pytest.approx(a, abs=1e-9)


def test_single_test_single_cell(series, small_tables):
    cfg = RunConfig(input="x", inflation_modes=("ex_post",), benchmarks=("euro_area",), tests=("mw",))
    r = run(cfg, series=series, tables=small_tables)
    assert len(r.rows) == 1
    row = r.rows[0]
    assert (row.mode, row.benchmark, row.generation, row.test) == ("ex_post", "euro_area", "first", "MW")
    assert row.tail == "right" and set(row.decisions) == {0.01, 0.05, 0.10}


def test_empty_test_list_gives_summaries_only(series, small_tables):
    r = run(RunConfig(input="x", tests=()), series=series, tables=small_tables)
    assert r.rows == () and len(r.summaries) == 4
    assert r.metadata["config"]["tests"] == []
    assert set(r.metadata) == {"config", "tables", "table_events", "versions", "conventions"}


def test_ingest_failure_is_stage_tagged(tmp_path):
    with pytest.raises(StageError) as err:
        run(RunConfig(input=str(tmp_path / "missing.csv"), tests=("mw",)))
    assert err.value.stage == "ingest"


def test_rird_failure_is_stage_tagged(series, small_tables):
    no_ea = [s for s in series if s.unit_id != "EA"]
    with pytest.raises(StageError) as err:
        run(RunConfig(input="x", tests=("mw",)), series=no_ea, tables=small_tables)
    assert err.value.stage.startswith("rird:")


def test_window_and_horizon(series, small_tables):
    cfg = RunConfig(input="x", tests=(), inflation_modes=("ex_ante",), window=("2005-01", "2010-12"), horizon=1)
    r = run(cfg, series=series, tables=small_tables)
    rows = r.summaries[("ex_ante", "euro_area")]
    assert {s.n for unit, s in rows.items() if unit != "Panel"} == {72}
    assert rows["Panel"].n == 720


# --- rendering ---


def test_csv_round_trip(full_report, tmp_path):
    paths = emit(full_report, tmp_path)
    assert [p.name for p in paths] == ["results.csv", "summary.csv", "metadata.json"]
    back = read_results_csv(paths[0])
    assert back == list(full_report.rows)
    header = paths[0].read_text().splitlines()[0].split(",")
    assert header[7:13] == ["cv_1", "cv_5", "cv_10", "decision_1", "decision_5", "decision_10"]
    meta = json.loads(paths[2].read_text())
    assert meta["tables"]["seed"] == SEED


def test_markdown_layout(full_report, tmp_path):
    (path,) = emit(full_report, tmp_path, "markdown")
    text = path.read_text()
    for heading in ("## Run metadata", "## RIRD summary statistics", "## First-generation tests",
                    "## Second-generation tests", "## Combination and intersection tests"):
        assert heading in text
    header = next(line for line in text.splitlines() if line.startswith("| test | ex_ante / euro_area |"))
    cols = [c.strip() for c in header.strip("|").split("|")]
    assert cols[-4:] == ["1%", "5%", "10%", "tail"]
    assert "TRUE indicates" in text
    with pytest.raises(ValueError):
        emit(full_report, tmp_path, "pdf")


def test_emit_failure_is_stage_tagged(full_report, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(StageError) as err:
        emit(full_report, blocker / "sub")
    assert err.value.stage == "emit"


def test_runs_are_reproducible(series, tmp_path):
    cfg = RunConfig(input="x", tests=("mw", "ips", "llc", "sadf"), reps=10000, cache_dir=str(tmp_path / "cache"))
    first = run(cfg, series=series)
    second = run(cfg, series=series)
    assert {e[1] for e in first.metadata["table_events"]} == {"simulated"}
    assert {e[1] for e in second.metadata["table_events"]} == {"loaded"}
    a = emit(first, tmp_path / "a")[0].read_bytes()
    b = emit(second, tmp_path / "b")[0].read_bytes()
    assert a == b


# --- golden battery ---


def test_golden_battery(full_report, tmp_path):
    if os.environ.get("PANELUR_REGEN_GOLDEN"):
        GOLDEN.parent.mkdir(exist_ok=True)
        GOLDEN.write_bytes(emit(full_report, tmp_path)[0].read_bytes())
    expected = read_results_csv(GOLDEN)
    assert len(expected) == len(full_report.rows)
    for got, want in zip(full_report.rows, expected):
        assert (got.mode, got.benchmark, got.test, got.tail, got.note) == \
               (want.mode, want.benchmark, want.test, want.tail, want.note)
        assert got.decisions == want.decisions
        assert (got.error is None) == (want.error is None)
        for a, b in ((got.statistic, want.statistic), (got.p_value, want.p_value)):
            assert (a is None) == (b is None)
            if a is not None:
                assert math.isclose(a, b, rel_tol=1e-8, abs_tol=1e-12)
        assert set(got.critical_values) == set(want.critical_values)
        np.testing.assert_allclose([got.critical_values[k] for k in sorted(got.critical_values)],
                                   [want.critical_values[k] for k in sorted(want.critical_values)], rtol=1e-8)


def test_all_test_names_are_runnable():
    assert len(TEST_NAMES) == 13
