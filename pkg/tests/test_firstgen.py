import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from panelur.data import BalanceRequired, Panel, PanelError
from panelur.firstgen import (
    choi_z,
    choi_z_test,
    ips_test,
    llc_test,
    maddala_wu,
    mw_test,
    unit_adf_pvalues,
)
from panelur.regression import AdfSpec
from panelur.results import ACCEPT, LEVELS, REJECT, TestResult, decide
from panelur.synthetic import ar1_panel, random_walk_panel

NORMAL = {0.01: 2.3263, 0.05: 1.6449, 0.10: 1.2816}
pvals = arrays(np.float64, st.integers(1, 30), elements=st.floats(1e-6, 1.0, exclude_min=False))


def test_mw_at_inverse_e():
    res = maddala_wu([math.exp(-1)] * 10)
    assert res.statistic == pytest.approx(20.0, abs=1e-12)
    assert res.critical_values == {0.01: 37.566, 0.05: 31.410, 0.10: 28.412}
    assert res.tail == "right"


def test_choi_at_inverse_e():
    res = choi_z([math.exp(-1)] * 10)
    assert res.statistic == pytest.approx(0.0, abs=1e-12)
    assert res.critical_values == NORMAL
    assert res.p_value == pytest.approx(0.5)


@given(pvals)
def test_choi_is_affine_in_mw(p):
    n = len(p)
    mw = maddala_wu(p).statistic
    assert choi_z(p).statistic == pytest.approx(math.sqrt(n) * (mw / n - 2.0) / 2.0, abs=1e-9)


def test_mw_uses_chi2_for_other_n():
    from scipy import stats

    res = maddala_wu([0.5] * 4)
    assert res.critical_values[0.05] == pytest.approx(stats.chi2.isf(0.05, 8))


def test_extreme_inputs_agree():
    small, large = [1e-6] * 10, [1.0] * 10
    for fn in (maddala_wu, choi_z):
        assert all(fn(small).rejects(a) for a in LEVELS)
        assert not any(fn(large).rejects(a) for a in LEVELS)


@given(st.floats(-10, 10), st.sampled_from(["left", "right"]))
def test_decision_nesting(stat, tail):
    sign = -1.0 if tail == "left" else 1.0
    res = TestResult("x", stat, None, {a: sign * v for a, v in NORMAL.items()}, tail)
    if res.rejects(0.01):
        assert res.rejects(0.05)
    if res.rejects(0.05):
        assert res.rejects(0.10)
    assert res.decisions == decide(stat, res.critical_values, tail)


def test_decisions_must_follow_statistic():
    with pytest.raises(ValueError, match="decisions"):
        TestResult("x", -3.0, None, {0.05: -1.6449}, "left", decisions={0.05: ACCEPT})
    assert TestResult("x", -1.6449, None, {0.05: -1.6449}, "left").decisions[0.05] == ACCEPT
    assert TestResult("x", -1.645, None, {0.05: -1.6449}, "left").decisions[0.05] == REJECT


@pytest.fixture(scope="module")
def walk_panel():
    return random_walk_panel(n=6, t=80, seed=21)


@pytest.mark.parametrize("fn", [mw_test, choi_z_test, ips_test, llc_test])
def test_scale_invariance(fn, walk_panel, small_tables):
    a = fn(walk_panel, tables=small_tables)
    b = fn(walk_panel.with_values(walk_panel.values * 4.2), tables=small_tables)
    assert b.statistic == pytest.approx(a.statistic, abs=1e-9)


@pytest.mark.parametrize("fn", [mw_test, choi_z_test, ips_test, llc_test])
def test_permutation_invariance(fn, walk_panel, small_tables):
    order = list(reversed(walk_panel.units))
    a = fn(walk_panel, tables=small_tables)
    b = fn(walk_panel.select(order), tables=small_tables)
    assert b.statistic == pytest.approx(a.statistic, abs=1e-9)


def test_ips_and_llc_require_balance(walk_panel, small_tables):
    v = np.array(walk_panel.values)
    v[2, 0] = np.nan
    p = walk_panel.with_values(v)
    for fn in (ips_test, llc_test):
        with pytest.raises(BalanceRequired):
            fn(p, tables=small_tables)
    # combination tests work on each unit's own span
    assert np.isfinite(mw_test(p, tables=small_tables).statistic)


def test_unit_errors_are_named(walk_panel, small_tables):
    v = np.array(walk_panel.values)
    v[3] = 1.0
    with pytest.raises(PanelError, match="U04"):
        mw_test(walk_panel.with_values(v), tables=small_tables)
    with pytest.raises(PanelError, match="at least 2 units"):
        mw_test(walk_panel.select(["U01"]), tables=small_tables)


def test_unit_pvalues_use_search_table(walk_panel, small_tables):
    fits, diags = unit_adf_pvalues(walk_panel, AdfSpec.aic(5), small_tables)
    assert [d.unit for d in diags] == list(walk_panel.units)
    assert all(0 < d.p_value < 1 for d in diags)
    table = small_tables.df_table("constant", 80, "aic5")
    from panelur.tables import pvalue_from_table

    assert diags[0].p_value == pvalue_from_table(fits["U01"].t_stat, table)


def test_ips_diagnostics(walk_panel, small_tables):
    res = ips_test(walk_panel, tables=small_tables)
    assert res.critical_values == {a: -v for a, v in NORMAL.items()}
    assert res.diagnostics["t_bar"] == pytest.approx(np.mean([d.t_stat for d in res.per_unit]))


def test_llc_power(small_tables):
    rng = np.random.default_rng(31)
    hits = sum(llc_test(ar1_panel(10, 148, rng, phi=0.8), tables=small_tables).rejects(0.05) for _ in range(100))
    assert hits / 100 > 0.90


def test_llc_constant_unit(small_tables):
    v = np.cumsum(np.random.default_rng(0).standard_normal((3, 40)), axis=1)
    v[1] = 0.0
    with pytest.raises(PanelError, match="constant"):
        llc_test(Panel.from_array(v), tables=small_tables)
