"""Second-generation panel unit root tests allowing cross-section dependence.

Moon-Perron de-factored pooled tests, Pesaran's CADF/CIPS and Choi's (2006)
combination tests on GLS-demeaned, cross-sectionally demeaned data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import Panel, PanelError, require_balanced
from .firstgen import _normal_cv, _require_units, adf_null_table
from .regression import (
    AdfFit,
    AdfSpec,
    LrvSpec,
    adf_fit,
    demean_cross_section,
    gls_detrend,
    long_run_variance,
    pesaran_cadf_unit,
)
from .results import LEVELS, TestResult, UnitDiagnostic
from .tables import CIPS_N10_CV, GLS_C_BAR, P_CLAMP, TableCache, default_tables, pvalue_from_table, table_critical_values

__all__ = [
    "FactorModel",
    "extract_factors",
    "estimate_num_factors",
    "moon_perron_test",
    "cips_statistic",
    "cips_test",
    "choi2006_pvalues",
    "choi2006_from_pvalues",
    "choi2006_tests",
    "pesaran_cadf_unit",
]


@dataclass(frozen=True)
class FactorModel:
    """Principal-component factors of a ``T x N`` matrix.

    ``factors`` has orthonormal columns; ``defactored`` is ``N x T`` and
    orthogonal to every factor.
    """

    k: int
    factors: np.ndarray
    loadings: np.ndarray
    defactored: np.ndarray
    eigenvalues: np.ndarray


def extract_factors(X, k: int) -> FactorModel:
    """Leading ``k`` principal components of ``X`` (``T x N``) via SVD.

    Signs are fixed so that each factor's largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=float)
    T, N = X.shape
    if not 1 <= k < min(T, N + 1):
        raise ValueError(f"k must satisfy 1 <= k < N (got k={k}, N={N})")
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    u, s, vt = u[:, :k].copy(), s, vt[:k].copy()
    for j in range(k):
        if vt[j, np.argmax(np.abs(vt[j]))] < 0:
            u[:, j] *= -1
            vt[j] *= -1
    loadings = vt.T * s[:k]
    resid = X - u @ loadings.T
    # remove rounding-level leakage so the residuals are orthogonal to the factors
    resid -= u @ (u.T @ resid)
    return FactorModel(k, u, loadings, resid.T, s ** 2)


def estimate_num_factors(X, kmax: int | None = None) -> int:
    """Eigenvalue-ratio estimate: the ``k`` maximising ``mu_k / mu_{k+1}``."""
    X = np.asarray(X, dtype=float)
    mu = np.linalg.svd(X, compute_uv=False) ** 2
    kmax = kmax or max(1, len(mu) // 2)
    kmax = min(kmax, len(mu) - 1)
    ratios = mu[:kmax] / np.maximum(mu[1:kmax + 1], np.finfo(float).tiny)
    return int(np.argmax(ratios)) + 1


def moon_perron_test(panel: Panel, k: int = 1, lrv: LrvSpec = LrvSpec()) -> dict[str, TestResult]:
    """Moon-Perron ``t_a*`` and ``t_b*`` on de-factored pooled data.

    Loadings are the leading ``k`` principal components of the differenced
    panel. After projecting them out of the pooled AR(1) residuals (no
    demeaning), the bias-corrected estimator is
    ``[tr(Y_-1 Q Y') - N T lambda_e] / tr(Y_-1 Q Y_-1')`` with ``lambda_e`` the
    average one-sided long-run covariance of the de-factored residuals, and
    both statistics are left-tailed N(0, 1).
    """
    require_balanced(panel)
    _require_units(panel)
    N = panel.n_units
    if not 1 <= k < N:
        raise PanelError(f"number of factors must satisfy 1 <= k < N (k={k}, N={N})")
    Y = np.array(panel.values)
    Ycur, Ylag = Y[:, 1:], Y[:, :-1]
    T = Ycur.shape[1]
    rho = np.sum(Ylag * Ycur) / np.sum(Ylag * Ylag)
    resid = Ycur - rho * Ylag
    lam = extract_factors((Ycur - Ylag).T, k).loadings
    Q = np.eye(N) - lam @ np.linalg.solve(lam.T @ lam, lam.T)
    e = Q @ resid

    sig2 = np.mean(e * e, axis=1)
    omega2 = np.array([long_run_variance(row, lrv) for row in e])
    lam_e = (omega2 - sig2) / 2.0
    w2 = omega2.mean()
    phi4 = np.mean(omega2 ** 2)
    lam_bar = lam_e.mean()

    num = np.sum(Q * (Ylag @ Ycur.T)) - N * T * lam_bar
    den = np.sum(Q * (Ylag @ Ylag.T))
    rho_plus = num / den
    core = T * np.sqrt(N) * (rho_plus - 1.0)
    t_a = core / np.sqrt(2.0 * phi4 / w2 ** 2)
    t_b = core * np.sqrt(den / (N * T ** 2) * w2 / phi4)
    diag = {"rho_pool": float(rho), "rho_plus": float(rho_plus), "k": k,
            "w2": float(w2), "phi4": float(phi4), "lambda": float(lam_bar)}
    cv = _normal_cv("left")
    return {
        "t_a_star": TestResult("MP t_a*", float(t_a), float(stats.norm.cdf(t_a)), cv, "left", diagnostics=diag),
        "t_b_star": TestResult("MP t_b*", float(t_b), float(stats.norm.cdf(t_b)), cv, "left", diagnostics=diag),
    }


def cips_statistic(panel: Panel, spec: AdfSpec = AdfSpec()) -> tuple[float, dict[str, AdfFit]]:
    """Mean of the per-unit CADF t-ratios, with the fits."""
    require_balanced(panel)
    _require_units(panel)
    ybar = panel.values.mean(axis=0)
    fits = {}
    for i, unit in enumerate(panel.units):
        try:
            fits[unit] = pesaran_cadf_unit(panel.values[i], ybar, spec)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise PanelError(f"CADF fit failed for unit {unit}: {exc}") from exc
    return float(np.mean([f.t_stat for f in fits.values()])), fits


def cips_test(panel: Panel, spec: AdfSpec = AdfSpec(), tables: TableCache | None = None) -> TestResult:
    """Pesaran's CIPS, left tail.

    For ten units (T >= 50) the published N = 10 critical values are used;
    other sizes fall back to simulated null quantiles, which also yield a
    p-value.
    """
    stat, fits = cips_statistic(panel, spec)
    N, T = panel.n_units, panel.n_periods
    p_value = None
    if N == 10 and T >= 50:
        cv, source = dict(CIPS_N10_CV), "embedded"
    else:
        table = (tables or default_tables()).cips_table(N, T, spec)
        cv, source = table_critical_values(table, LEVELS, "left"), "simulated"
        p_value = pvalue_from_table(stat, table)
    diags = [UnitDiagnostic(u, f.t_stat, f.lag, None, f.n_obs) for u, f in fits.items()]
    augmented = bool(np.ptp(panel.values.mean(axis=0)) > 1e-12 * max(1.0, np.ptp(panel.values)))
    return TestResult("CIPS", stat, p_value, cv, "left", per_unit=diags,
                      diagnostics={"critical_values": source, "cross_average_augmentation": augmented})


def choi2006_pvalues(
    panel: Panel,
    spec: AdfSpec = AdfSpec(),
    tables: TableCache | None = None,
    finite_sample: bool = False,
):
    """Cross-section demeaning, GLS demeaning per unit, then no-intercept ADF p-values.

    By default p-values come from the no-intercept DF table, the limit law of
    the GLS-demeaned t-ratio. At moderate ``T`` that table is noticeably
    liberal; ``finite_sample=True`` uses quantiles simulated for the
    GLS-demeaned statistic itself at the panel's length.
    """
    require_balanced(panel)
    _require_units(panel)
    tables = tables or default_tables()
    demeaned = demean_cross_section(panel)
    spec_none = AdfSpec("none", spec.max_lag, spec.fixed_lag)
    diags = []
    for i, unit in enumerate(panel.units):
        z = gls_detrend(demeaned.values[i], GLS_C_BAR)
        try:
            fit = adf_fit(z, spec_none)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise PanelError(f"ADF fit failed for unit {unit}: {exc}") from exc
        if finite_sample:
            table = adf_null_table(tables, spec_none, fit, "search", case="gls")
        else:
            table = tables.df_table("none", len(z), fit.lag)
        diags.append(UnitDiagnostic(unit, fit.t_stat, fit.lag, pvalue_from_table(fit.t_stat, table), fit.n_obs))
    return diags


def choi2006_from_pvalues(pvals, per_unit=()) -> dict[str, TestResult]:
    """Choi's ``Pm`` (right tail), ``Z`` and ``L*`` (left tails) from unit p-values."""
    p = np.clip(np.asarray(pvals, dtype=float), P_CLAMP, 1 - P_CLAMP)
    n = len(p)
    pm = float(-np.sum(np.log(p) + 1.0) / np.sqrt(n))
    z = float(np.sum(stats.norm.ppf(p)) / np.sqrt(n))
    lstar = float(np.sum(np.log(p / (1.0 - p))) / np.sqrt(np.pi ** 2 * n / 3.0))
    return {
        "Pm": TestResult("Choi Pm", pm, float(stats.norm.sf(pm)), _normal_cv("right"), "right", per_unit=per_unit),
        "Z": TestResult("Choi Z", z, float(stats.norm.cdf(z)), _normal_cv("left"), "left", per_unit=per_unit),
        "Lstar": TestResult("Choi L*", lstar, float(stats.norm.cdf(lstar)), _normal_cv("left"), "left",
                            per_unit=per_unit),
    }


def choi2006_tests(
    panel: Panel,
    spec: AdfSpec = AdfSpec(),
    tables: TableCache | None = None,
    finite_sample: bool = False,
) -> dict[str, TestResult]:
    diags = choi2006_pvalues(panel, spec, tables, finite_sample)
    return choi2006_from_pvalues([d.p_value for d in diags], diags)
