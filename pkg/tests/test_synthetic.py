import numpy as np
import pytest
from scipy import stats

from panelur.data import EA
from panelur.rird import real_rate_panel
from panelur.synthetic import (
    COUNTRIES,
    DGPS,
    correlated_pvalues,
    factor_panel,
    make_panel,
    mixed_panel,
    pipeline_series,
    random_walk_panel,
)


@pytest.mark.parametrize("dgp", sorted(DGPS))
def test_shapes_and_determinism(dgp):
    a = make_panel(dgp, n=5, t=40, seed=3)
    b = make_panel(dgp, n=5, t=40, seed=3)
    assert a.values.shape == (5, 40) and a.balanced
    assert a.values.tobytes() == b.values.tobytes()
    assert make_panel(dgp, n=5, t=40, seed=4).values.tobytes() != a.values.tobytes()


def test_unknown_dgp():
    with pytest.raises(ValueError, match="unknown DGP"):
        make_panel("garch", 3, 20)


def test_random_walk_increments():
    p = random_walk_panel(50, 400, seed=1, sigma=2.0)
    d = np.diff(p.values, axis=1)
    assert d.std() == pytest.approx(2.0, rel=0.03)


def test_factor_panel_shares_a_common_shock():
    d = np.diff(factor_panel(10, 400, seed=2, factor_sd=1.5).values, axis=1)
    r = np.corrcoef(d)
    assert r[np.triu_indices(10, 1)].mean() > 0.3


def test_mixed_panel_orders_stationary_units_first():
    p = mixed_panel(6, 300, seed=5, n_stationary=2, phi=0.5)
    sd = p.values.std(axis=1)
    assert sd[:2].max() < sd[2:].min()
    with pytest.raises(ValueError):
        mixed_panel(3, 20, n_stationary=4)


def test_correlated_pvalues():
    P = correlated_pvalues(10, 0.5, reps=4000, seed=7)
    assert P.shape == (4000, 10)
    # uniform margins
    assert stats.kstest(P[:, 0], "uniform").pvalue > 0.01
    z = stats.norm.ppf(P)
    r = np.corrcoef(z.T)[np.triu_indices(10, 1)]
    assert r.mean() == pytest.approx(0.5, abs=0.03)
    with pytest.raises(ValueError):
        correlated_pvalues(theta=1.5)


def test_pipeline_series_layout():
    s = pipeline_series(4, 30, seed=1)
    units = [x.unit_id for x in s]
    assert units == [EA, EA] + [c for c in COUNTRIES[:4] for _ in range(2)]
    assert all(len(x) == 42 for x in s)
    assert all(x.values.min() > 0 for x in s if x.variable == "cpi")
    for mode in ("ex_ante", "ex_post"):
        assert real_rate_panel(s, mode).n_periods == 30
    with pytest.raises(ValueError, match="country"):
        pipeline_series(3, 30, countries=["AA"])
