"""First-generation panel unit root tests (cross-sectionally independent units).

Maddala-Wu Fisher test, Choi's standardised version, Levin-Lin-Chu and
Im-Pesaran-Shin.
"""
from __future__ import annotations

import numpy as np
from scipy import stats

from .data import Panel, PanelError, require_balanced
from .regression import AdfFit, AdfSpec, LrvSpec, _batch_ols, adf_fit, adf_select_lags_batch
from .results import LEVELS, TestResult, UnitDiagnostic
from .tables import CHI2_20_CV, NORMAL_CV, TableCache, default_tables, pvalue_from_table

__all__ = [
    "mw_test",
    "choi_z_test",
    "llc_test",
    "ips_test",
    "maddala_wu",
    "choi_z",
    "unit_adf_fits",
    "unit_adf_pvalues",
    "adf_null_table",
    "llc_raw_batch",
]


def _normal_cv(tail: str) -> dict:
    sign = -1.0 if tail == "left" else 1.0
    return {a: sign * NORMAL_CV[a] for a in LEVELS}


def _chi2_cv(df: int) -> dict:
    if df == 20:
        return dict(CHI2_20_CV)
    return {a: float(stats.chi2.isf(a, df)) for a in LEVELS}


def _require_units(panel: Panel) -> None:
    if panel.n_units < 2:
        raise PanelError("panel tests need at least 2 units")


def unit_adf_fits(panel: Panel, spec: AdfSpec = AdfSpec()) -> dict[str, AdfFit]:
    """ADF fit per unit on its observed stretch; failures name the unit."""
    _require_units(panel)
    fits = {}
    for unit in panel.units:
        try:
            fits[unit] = adf_fit(panel.unit_values(unit), spec)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise PanelError(f"ADF fit failed for unit {unit}: {exc}") from exc
    return fits


def adf_null_table(tables: TableCache, spec: AdfSpec, fit: AdfFit, null_table: str = "search", case=None):
    """Null quantile table for a unit's ADF t-ratio.

    ``"search"`` uses the law of the statistic after the same AIC lag search
    (fixed-lag specs get their fixed-lag table); ``"selected"`` uses the
    fixed-lag table at the order the search picked. The latter ignores the
    pre-test and is liberal in the left tail.
    """
    if null_table not in ("search", "selected"):
        raise ValueError("null_table must be 'search' or 'selected'")
    T = fit.first_index + fit.n_obs
    case = case or spec.deterministics
    if null_table == "search" and spec.lag_selection == "aic":
        return tables.df_table(case, T, f"aic{spec.top_lag}")
    return tables.df_table(case, T, fit.lag)


def unit_adf_pvalues(
    panel: Panel, spec: AdfSpec = AdfSpec(), tables: TableCache | None = None, null_table: str = "search"
):
    """Per-unit ADF t-ratios and their left-tail p-values from simulated DF tables.

    Each unit's p-value comes from the table for its own length; see
    :func:`adf_null_table` for how the lag search enters.
    """
    tables = tables or default_tables()
    fits = unit_adf_fits(panel, spec)
    diags = []
    for unit, fit in fits.items():
        table = adf_null_table(tables, spec, fit, null_table)
        diags.append(UnitDiagnostic(unit, fit.t_stat, fit.lag, pvalue_from_table(fit.t_stat, table), fit.n_obs))
    return fits, diags


def maddala_wu(pvals, per_unit=()) -> TestResult:
    """Fisher combination ``-2 sum ln p_i`` against chi-square with ``2N`` degrees of freedom."""
    p = np.asarray(pvals, dtype=float)
    stat = float(-2.0 * np.log(p).sum())
    df = 2 * len(p)
    return TestResult("MW", stat, float(stats.chi2.sf(stat, df)), _chi2_cv(df), "right", per_unit=per_unit)


def choi_z(pvals, per_unit=()) -> TestResult:
    """Standardised Fisher statistic ``sqrt(N) (P/N - 2) / 2``, right tail."""
    p = np.asarray(pvals, dtype=float)
    n = len(p)
    pmw = -2.0 * np.log(p).sum()
    stat = float(np.sqrt(n) * (pmw / n - 2.0) / 2.0)
    return TestResult("Choi", stat, float(stats.norm.sf(stat)), _normal_cv("right"), "right", per_unit=per_unit)


def mw_test(panel: Panel, spec: AdfSpec = AdfSpec(), tables: TableCache | None = None) -> TestResult:
    _, diags = unit_adf_pvalues(panel, spec, tables)
    return maddala_wu([d.p_value for d in diags], diags)


def choi_z_test(panel: Panel, spec: AdfSpec = AdfSpec(), tables: TableCache | None = None) -> TestResult:
    _, diags = unit_adf_pvalues(panel, spec, tables)
    return choi_z([d.p_value for d in diags], diags)


def ips_test(panel: Panel, spec: AdfSpec = AdfSpec(), tables: TableCache | None = None) -> TestResult:
    """Standardised t-bar with moments matched to each unit's length and lag order."""
    require_balanced(panel)
    tables = tables or default_tables()
    fits = unit_adf_fits(panel, AdfSpec("constant", spec.max_lag, spec.fixed_lag))
    T = panel.n_periods
    t = np.array([f.t_stat for f in fits.values()])
    moments = [tables.ips_moments(T, f.lag) for f in fits.values()]
    mean = np.mean([m.mean for m in moments])
    var = np.mean([m.var for m in moments])
    n = len(t)
    stat = float(np.sqrt(n) * (t.mean() - mean) / np.sqrt(var))
    diags = [UnitDiagnostic(u, f.t_stat, f.lag, None, f.n_obs) for u, f in fits.items()]
    return TestResult("IPS", stat, float(stats.norm.cdf(stat)), _normal_cv("left"), "left", per_unit=diags,
                      diagnostics={"t_bar": float(t.mean()), "mean_E_t": float(mean), "mean_Var_t": float(var)})


# --- Levin-Lin-Chu --------------------------------------------------------------------------


def _lrv_rows(U: np.ndarray, m: int) -> np.ndarray:
    n = U.shape[1]
    total = np.einsum("ij,ij->i", U, U) / n
    for j in range(1, min(m, n - 1) + 1):
        total += 2.0 * (1.0 - j / (m + 1.0)) * np.einsum("ij,ij->i", U[:, j:], U[:, :-j]) / n
    return total


def _llc_unit_components(Y: np.ndarray, max_lag: int, lrv: LrvSpec):
    """Per-series pieces of the LLC procedure for the model without deterministics.

    Returns sums ``sum v~e~``, ``sum v~^2``, ``sum e~^2``, observation counts,
    long-run/short-run SD ratios and selected lags, one entry per row of ``Y``.
    """
    B, T = Y.shape
    dY = np.diff(Y, axis=1)
    lags = adf_select_lags_batch(Y, "none", max_lag)
    sve, svv, see = np.empty(B), np.empty(B), np.empty(B)
    nobs = T - 1 - lags
    sigma = np.empty(B)
    for p in np.unique(lags):
        rows = np.flatnonzero(lags == p)
        d = dY[rows]
        e = d[:, p:]
        v = Y[rows, p:-1]
        if p > 0:
            L = np.stack([d[:, p - j: d.shape[1] - j] for j in range(1, p + 1)], axis=2)
            coef, e, _ = _batch_ols(L, e)
            coef, v, _ = _batch_ols(L, v)
        delta = np.einsum("ij,ij->i", e, v) / np.einsum("ij,ij->i", v, v)
        resid = e - delta[:, None] * v
        s2 = np.einsum("ij,ij->i", resid, resid) / e.shape[1]
        s = np.sqrt(s2)
        et, vt = e / s[:, None], v / s[:, None]
        sve[rows] = np.einsum("ij,ij->i", vt, et)
        svv[rows] = np.einsum("ij,ij->i", vt, vt)
        see[rows] = np.einsum("ij,ij->i", et, et)
        sigma[rows] = s
    lr = _lrv_rows(dY, lrv.lags(T))
    ratio = np.sqrt(lr) / sigma
    return sve, svv, see, nobs, ratio, lags


def _llc_pool(sve, svv, see, nobs, ratio):
    """Pooled t-ratio and correction multiplier; leading axes are panels, last axis units."""
    Sve, Svv, See = sve.sum(-1), svv.sum(-1), see.sum(-1)
    nt = nobs.sum(-1)
    delta = Sve / Svv
    s2 = (See - 2 * delta * Sve + delta ** 2 * Svv) / nt
    std_delta = np.sqrt(s2 / Svv)
    t = delta / std_delta
    mult = nt * ratio.mean(-1) / s2 * std_delta
    return t, mult, delta, std_delta, s2


def llc_raw_batch(Y, max_lag: int = 5, lrv: LrvSpec = LrvSpec()):
    """Raw pooled t-ratios and correction multipliers for a stack of panels ``(R, N, T)``."""
    Y = np.asarray(Y, dtype=float)
    R, N, T = Y.shape
    sve, svv, see, nobs, ratio, _ = _llc_unit_components(Y.reshape(R * N, T), max_lag, lrv)
    t, mult, *_ = _llc_pool(*(a.reshape(R, N) for a in (sve, svv, see, nobs, ratio)))
    return t, mult


def llc_test(
    panel: Panel,
    lrv: LrvSpec = LrvSpec(),
    max_lag: int = 5,
    tables: TableCache | None = None,
) -> TestResult:
    """Levin-Lin-Chu adjusted t-statistic with homogeneous root and no deterministics.

    Step 1 orthogonalises ``dy_t`` and ``y_{t-1}`` on each unit's lagged
    differences (AIC order) and scales by the unit regression SD. Step 2 takes
    the ratio of the long-run SD of ``dy`` (Bartlett) to that SD. Step 3 pools
    and applies ``(t - N T~ S_N sigma^-2 STD(delta) mu*) / sigma*`` with
    adjustments simulated for the panel's own ``N x T``.
    """
    require_balanced(panel)
    _require_units(panel)
    tables = tables or default_tables()
    Y = np.array(panel.values)
    if np.any(np.ptp(Y, axis=1) == 0):
        raise PanelError("LLC: a unit series is constant")
    sve, svv, see, nobs, ratio, lags = _llc_unit_components(Y, max_lag, lrv)
    t, mult, delta, std_delta, s2 = _llc_pool(sve, svv, see, nobs, ratio)
    adj = tables.llc_adjustments(panel.n_units, panel.n_periods, max_lag, lrv)
    stat = float((t - mult * adj.mu_star) / adj.sigma_star)
    diags = [UnitDiagnostic(u, float("nan"), int(p), None, int(n)) for u, p, n in zip(panel.units, lags, nobs)]
    return TestResult(
        "LLC", stat, float(stats.norm.cdf(stat)), _normal_cv("left"), "left", per_unit=diags,
        diagnostics={"delta": float(delta), "t_delta": float(t), "S_N": float(ratio.mean()),
                     "mu_star": adj.mu_star, "sigma_star": adj.sigma_star},
    )
