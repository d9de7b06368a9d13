import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from panelur.firstgen import llc_raw_batch
from panelur.tables import (
    CHI2_20_CV,
    CIPS_N10_CV,
    FORMAT_VERSION,
    NORMAL_CV,
    P_CLAMP,
    PROB_GRID,
    CacheChecksumError,
    CacheVersionError,
    HansenSurface,
    QuantileTable,
    TableCache,
    cache_key,
    cache_load,
    cache_store,
    pvalue_from_table,
    simulate_df_quantiles,
    simulate_hansen_finite,
    simulate_hansen_surface,
    simulate_ips_moments,
    simulate_llc_adjustments,
    table_critical_values,
)


@pytest.fixture(scope="module")
def df_table():
    return simulate_df_quantiles("constant", 100, 0, 10000, seed=3)


def test_grid_shape():
    assert len(PROB_GRID) == 199
    assert PROB_GRID[0] == 0.005 and PROB_GRID[-1] == 0.995
    assert np.all(np.diff(PROB_GRID) > 0)


def test_df_table_reproducible(df_table):
    again = simulate_df_quantiles("constant", 100, 0, 10000, seed=3)
    assert again == df_table
    assert again.quants.tobytes() == df_table.quants.tobytes()
    other = simulate_df_quantiles("constant", 100, 0, 10000, seed=4)
    assert other != df_table
    assert np.all(np.diff(df_table.quants) >= 0)
    assert df_table.params == {"case": "constant", "T": 100, "p": 0}
    assert (df_table.seed, df_table.reps, df_table.provenance) == (3, 10000, "simulated")


def test_df_argument_checks():
    with pytest.raises(ValueError, match="reps"):
        simulate_df_quantiles("constant", 100, 0, 500, seed=1)
    with pytest.raises(ValueError):
        simulate_df_quantiles("trend", 100, 0, 10000, seed=1)
    with pytest.raises(ValueError, match="lag key"):
        simulate_df_quantiles("constant", 100, "bic3", 10000, seed=1)


def test_lag_search_table_is_left_of_fixed_lag():
    fixed = simulate_df_quantiles("constant", 100, 0, 10000, seed=5)
    search = simulate_df_quantiles("constant", 100, "aic3", 10000, seed=5)
    assert search.params["p"] == "aic3"
    assert search.quantile(0.01) < fixed.quantile(0.01)


def test_gls_case_left_of_none():
    none = simulate_df_quantiles("none", 150, 0, 10000, seed=5)
    gls = simulate_df_quantiles("gls", 150, 0, 10000, seed=5)
    assert gls.quantile(0.5) < none.quantile(0.5)


def test_quantile_table_validation():
    with pytest.raises(ValueError, match="family"):
        QuantileTable("nope", {}, [0.5], [0.0])
    with pytest.raises(ValueError, match="nondecreasing"):
        QuantileTable("df_t", {}, [0.1, 0.9], [1.0, 0.0])
    with pytest.raises(ValueError, match="strictly increasing"):
        QuantileTable("df_t", {}, [0.5, 0.5], [0.0, 1.0])


# --- p-value lookup ---


def test_pvalue_at_nodes(df_table):
    assert pvalue_from_table(df_table.quantile(0.05), df_table) == pytest.approx(0.05, abs=1e-12)
    assert pvalue_from_table(df_table.quantile(0.5), df_table) == pytest.approx(0.5, abs=1e-12)
    assert pvalue_from_table(df_table.quants[0] - 100, df_table) == P_CLAMP
    assert pvalue_from_table(df_table.quants[-1] + 100, df_table) == 1 - P_CLAMP
    assert pvalue_from_table(-np.inf, df_table) == P_CLAMP


def test_pvalue_tail_extrapolation_is_graded(df_table):
    lo = df_table.quants[0]
    p1 = pvalue_from_table(lo - 0.1, df_table)
    p2 = pvalue_from_table(lo - 0.5, df_table)
    assert P_CLAMP < p2 < p1 < PROB_GRID[0]


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_pvalue_nondecreasing(a, b):
    table = QuantileTable("df_t", {"case": "constant", "T": 50, "p": 0}, PROB_GRID, stats.norm.ppf(PROB_GRID) - 1.5)
    lo, hi = min(a, b), max(a, b)
    assert pvalue_from_table(lo, table) <= pvalue_from_table(hi, table)


def test_critical_values_by_tail(df_table):
    left = table_critical_values(df_table, tail="left")
    right = table_critical_values(df_table, tail="right")
    assert left[0.01] < left[0.05] < left[0.10] < right[0.10] < right[0.05] < right[0.01]


# --- embedded constants ---


def test_embedded_constants_match_quantile_routines():
    for a, v in CHI2_20_CV.items():
        assert v == pytest.approx(stats.chi2.isf(a, 20), abs=1e-3)
    for a, v in NORMAL_CV.items():
        assert v == pytest.approx(stats.norm.isf(a), abs=1e-3)
    assert CIPS_N10_CV == {0.01: -2.5669, 0.05: -2.3310, 0.10: -2.2062}


# --- IPS moments ---


def test_ips_moments_t500():
    m = simulate_ips_moments(500, 0, 20000, seed=11)
    assert m.mean == pytest.approx(-1.53, abs=0.02)
    assert m.var == pytest.approx(0.72, abs=0.05)
    assert m.var > 0


def test_ips_moments_stable_across_seeds():
    a = simulate_ips_moments(100, 1, 10000, seed=1)
    b = simulate_ips_moments(100, 1, 10000, seed=2)
    se = np.sqrt((a.var + b.var) / 10000)
    assert abs(a.mean - b.mean) < 3 * se


# --- LLC adjustments ---


@pytest.fixture(scope="module")
def llc_adj(small_tables):
    return small_tables.llc_adjustments(10, 148)


def test_llc_adjustments_sign_and_determinism(llc_adj):
    assert llc_adj.mu_star < 0
    assert llc_adj.sigma_star > 0
    a = simulate_llc_adjustments(4, 40, 2000, seed=9)
    b = simulate_llc_adjustments(4, 40, 2000, seed=9)
    assert a == b


def test_llc_adjustments_held_out(llc_adj):
    rng = np.random.default_rng(987654)
    Y = np.cumsum(rng.standard_normal((2000, 10, 148)), axis=2)
    t, mult = llc_raw_batch(Y)
    z = (t - mult * llc_adj.mu_star) / llc_adj.sigma_star
    assert z.mean() == pytest.approx(0.0, abs=0.05)
    assert z.std(ddof=1) == pytest.approx(1.0, abs=0.05)


# --- Hansen surfaces ---


def test_hansen_surface_monotone_in_rho2():
    # the 1% tail needs many draws before neighbouring grid points separate
    surface = simulate_hansen_surface(reps=100000, seed=8)
    for prob in (0.01, 0.05, 0.10):
        q = [t.quantile(prob) for t in surface.tables]
        assert np.all(np.diff(q) < 0), prob
    assert surface.grid[0] == 0.0 and surface.grid[-1] == 1.0


def test_hansen_pvalue_interpolates(small_tables):
    surface = small_tables.hansen_surface("constant")
    lo, hi = surface.at(0.25), surface.at(0.3)
    stat = -2.0
    p = pvalue_from_table(stat, surface, 0.275)
    a, b = pvalue_from_table(stat, lo), pvalue_from_table(stat, hi)
    assert min(a, b) <= p <= max(a, b)
    assert p == pytest.approx((a + b) / 2, abs=1e-12)
    with pytest.raises(ValueError, match="rho2"):
        pvalue_from_table(stat, surface)


def test_hansen_finite_surface():
    s = simulate_hansen_finite(60, reps=1000, seed=2, max_lag=2, max_lag_x=2)
    np.testing.assert_allclose(s.at(0.0).quants, stats.norm.ppf(PROB_GRID))
    assert s.at(1.0).quantile(0.05) < s.at(0.5).quantile(0.05) < s.at(0.1).quantile(0.05)
    again = simulate_hansen_finite(60, reps=1000, seed=2, max_lag=2, max_lag_x=2)
    assert all(a == b for a, b in zip(s.tables, again.tables))


def test_hansen_surface_needs_endpoints(df_table):
    t = QuantileTable("hansen_cadf", {"rho2": 0.5}, PROB_GRID, df_table.quants)
    with pytest.raises(ValueError):
        HansenSurface((t,))


# --- persistence ---


def test_store_load_round_trip(tmp_path, df_table):
    path = cache_store(df_table, tmp_path / "t.csv")
    assert cache_load(path) == [df_table]
    text = path.read_text()
    assert "# format_version: 1" in text and "# seed: 3" in text and "# reps: 10000" in text


def test_surface_round_trip(tmp_path):
    s = simulate_hansen_finite(40, (0.0, 0.5, 1.0), reps=1000, seed=1, max_lag=1, max_lag_x=1)
    path = cache_store(s, tmp_path / "h.csv")
    assert HansenSurface(tuple(cache_load(path))) == s


def test_corrupted_file(tmp_path, df_table):
    path = cache_store(df_table, tmp_path / "t.csv")
    lines = path.read_text().splitlines(keepends=True)
    lines[-1] = lines[-1][:-3] + "9\n"
    path.write_text("".join(lines))
    with pytest.raises(CacheChecksumError):
        cache_load(path)


def test_version_mismatch(tmp_path, df_table):
    path = cache_store(df_table, tmp_path / "t.csv")
    path.write_text(path.read_text().replace(f"# format_version: {FORMAT_VERSION}", "# format_version: 0"))
    with pytest.raises(CacheVersionError, match="regenerate"):
        cache_load(path)


def test_cache_keys():
    params = {"case": "constant", "T": 148, "p": 0}
    assert cache_key("df_t", params, 1, 20000) != cache_key("df_t", params, 1, 30000)
    assert cache_key("df_t", params, 1, 20000) != cache_key("df_t", params, 2, 20000)
    assert cache_key("df_t", params, 1, 20000) == cache_key("df_t", dict(reversed(params.items())), 1, 20000)


def test_table_cache_persists_and_regenerates(tmp_path):
    first = TableCache(tmp_path, seed=5, reps=10000)
    t = first.df_table("none", 60, 1)
    assert first.events[-1][1] == "simulated"
    second = TableCache(tmp_path, seed=5, reps=10000)
    assert second.df_table("none", 60, 1) == t
    assert second.events[-1][1] == "loaded"
    path = tmp_path / f"{second.events[-1][0]}.csv"
    path.write_text(path.read_text().replace("# checksum: \"", "# checksum: \"0"))
    third = TableCache(tmp_path, seed=5, reps=10000)
    assert third.df_table("none", 60, 1) == t
    assert [e[1] for e in third.events] == ["regenerated", "simulated"]
    assert TableCache(tmp_path, seed=5, reps=10000).df_table("none", 60, 1) == t


def test_describe_records_settings(tmp_path):
    d = TableCache(tmp_path, seed=1, reps=12000, cadf_reps=3000).describe()
    assert d["seed"] == 1 and d["reps"] == 12000 and d["cadf_reps"] == 3000
    assert d["format_version"] == FORMAT_VERSION
