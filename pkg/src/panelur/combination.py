"""P-value combination and intersection tests for panels with dependent units.

Inverse-normal combination, its dependence-corrected versions, the Simes
intersection rule, Pesaran's CD statistic, and the covariate-ADF families
that feed per-unit p-values into them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .data import Panel, PanelError, require_balanced
from .firstgen import _normal_cv, _require_units, adf_null_table, unit_adf_fits
from .regression import AdfFit, AdfSpec, LrvSpec, cadf_fit
from .results import LEVELS, TestResult, UnitDiagnostic
from .secondgen import extract_factors
from .tables import P_CLAMP, TableCache, default_tables, pvalue_from_table

__all__ = [
    "ProbitVector",
    "probits",
    "choi_inverse_normal",
    "hartung_rho_hat",
    "hartung_z",
    "demetrescu_z",
    "SimesDecision",
    "SimesResult",
    "simes_test",
    "pesaran_cd",
    "residual_matrix",
    "Variant",
    "unit_pvalues",
    "pcadf_family",
    "scadf_family",
    "KAPPA",
]

KAPPA = 0.2


@dataclass(frozen=True)
class ProbitVector:
    """Normal quantiles of clamped p-values."""

    probits: np.ndarray
    pvalues: np.ndarray

    def __len__(self) -> int:
        return len(self.probits)


def probits(pvals, eps: float = P_CLAMP) -> ProbitVector:
    p = np.asarray(pvals, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("need at least one p-value")
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    z = stats.norm.ppf(np.clip(p, eps, 1.0 - eps))
    z.flags.writeable = False
    return ProbitVector(z, p)


def _as_probits(x) -> ProbitVector:
    return x if isinstance(x, ProbitVector) else probits(x)


def _normal_left(name, stat, diagnostics=None, per_unit=()):
    return TestResult(name, float(stat), float(stats.norm.cdf(stat)), _normal_cv("left"), "left",
                      per_unit=per_unit, diagnostics=diagnostics or {})


def choi_inverse_normal(pvals, per_unit=()) -> TestResult:
    """``Z = sum(Phi^-1(p_i)) / sqrt(N)``, left tail."""
    pv = _as_probits(pvals)
    return _normal_left("Choi inverse normal", pv.probits.sum() / np.sqrt(len(pv)), per_unit=per_unit)


def hartung_rho_hat(pvals) -> dict[str, float]:
    """Moment estimate of the common probit correlation and its floored version.

    ``theta_hat = 1 - var(probits)`` with the ``N - 1`` divisor;
    ``theta_star = max(-1/(N-1), theta_hat)``.
    """
    pv = _as_probits(pvals)
    n = len(pv)
    if n < 2:
        raise ValueError("need at least two p-values")
    theta = 1.0 - float(np.var(pv.probits, ddof=1))
    return {"theta_hat": theta, "theta_star": max(-1.0 / (n - 1), theta)}


def hartung_z(pvals, theta: float, per_unit=()) -> TestResult:
    """Inverse-normal combination rescaled for common correlation ``theta``."""
    pv = _as_probits(pvals)
    n = len(pv)
    scale = 1.0 + theta * (n - 1)
    if not scale > 0:
        raise ValueError(f"1 + theta (N - 1) must be positive (theta={theta}, N={n})")
    stat = pv.probits.sum() / np.sqrt(n * scale)
    return _normal_left("Hartung", stat, {"theta": float(theta)}, per_unit)


def demetrescu_z(pvals, kappa: float = KAPPA, per_unit=()) -> TestResult:
    """Hartung combination with the floored estimate inflated by ``kappa sqrt(2/(N+1)) (1 - theta*)``."""
    pv = _as_probits(pvals)
    n = len(pv)
    th = hartung_rho_hat(pv)
    star = th["theta_star"]
    theta = star + kappa * np.sqrt(2.0 / (n + 1)) * (1.0 - star)
    res = hartung_z(pv, theta, per_unit)
    return TestResult("Demetrescu", res.statistic, res.p_value, res.critical_values, "left",
                      per_unit=per_unit, diagnostics={**th, "theta_adjusted": float(theta), "kappa": kappa})


# --- Simes intersection test ---------------------------------------------------------------


@dataclass(frozen=True)
class SimesDecision:
    """Simes rule at one level; ``accept`` is the TRUE/FALSE report value."""

    ordered: tuple[float, ...]
    alpha: float
    reject: bool
    witness: int | None

    def __post_init__(self):
        if self.reject != (self.witness is not None):
            raise ValueError("reject must hold exactly when a witness exists")

    @property
    def accept(self) -> bool:
        return not self.reject


def simes_test(pvals, alpha_levels: Sequence[float] = LEVELS) -> dict[float, SimesDecision]:
    """Reject the intersection null at level ``a`` if some ``p_(i) <= i a / N``.

    ``witness`` is the first 1-based index satisfying the inequality.
    """
    p = np.sort(np.asarray(pvals, dtype=float).ravel())
    if p.size == 0:
        raise ValueError("need at least one p-value")
    n = p.size
    ranks = np.arange(1, n + 1)
    out = {}
    for a in alpha_levels:
        hits = np.flatnonzero(p <= ranks * a / n)
        witness = int(hits[0]) + 1 if hits.size else None
        out[a] = SimesDecision(tuple(float(v) for v in p), a, witness is not None, witness)
    return out


@dataclass(frozen=True)
class SimesResult:
    test_name: str
    decisions: Mapping[float, SimesDecision]
    per_unit: Sequence[UnitDiagnostic] = ()
    diagnostics: Mapping[str, object] = field(default_factory=dict)

    def accepts(self, level: float) -> bool:
        return self.decisions[level].accept

    def rejects(self, level: float) -> bool:
        return self.decisions[level].reject


# --- cross-section dependence --------------------------------------------------------------


def pesaran_cd(residuals) -> dict[str, float]:
    """Pesaran's CD: ``sqrt(2T / (N(N-1))) sum_{i<j} r_ij``, two-sided N(0, 1) p-value.

    ``residuals`` is a balanced :class:`Panel` or an ``N x T`` array.
    """
    if isinstance(residuals, Panel):
        E = require_balanced(residuals).values
    else:
        E = np.asarray(residuals, dtype=float)
    if E.ndim != 2 or E.shape[0] < 2:
        raise PanelError("CD needs an N x T residual array with N >= 2")
    if not np.all(np.isfinite(E)):
        raise PanelError("CD residuals contain missing values")
    N, T = E.shape
    Z = E - E.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", Z, Z))
    if np.any(norms == 0):
        raise PanelError("CD: a residual series has zero variance")
    Z /= norms[:, None]
    R = Z @ Z.T
    total = (R.sum() - np.trace(R)) / 2.0
    cd = float(np.sqrt(2.0 * T / (N * (N - 1))) * total)
    return {"cd_stat": cd, "p_value": float(2.0 * stats.norm.sf(abs(cd)))}


def residual_matrix(fits: Sequence[AdfFit]) -> np.ndarray:
    """Stack per-unit regression residuals over the periods they all cover.

    Assumes every fit ends at the same period, as on a balanced panel.
    """
    start = max(f.first_index for f in fits)
    return np.vstack([np.asarray(f.residuals)[start - f.first_index:] for f in fits])


# --- pADF / pCADF family -------------------------------------------------------------------


class Variant(str, enum.Enum):
    ADF = "ADF"
    CADF = "CADF"
    CADF_PC = "CADF_PC"


def _variant(v) -> Variant:
    if isinstance(v, Variant):
        return v
    name = str(v)
    for prefix in ("p", "s"):
        if name.startswith(prefix) and name[1:] in Variant.__members__:
            name = name[1:]
    try:
        return Variant[name]
    except KeyError:
        raise ValueError(f"unknown variant {v!r}") from None


def leave_one_out_covariates(dY: np.ndarray) -> np.ndarray:
    """Row ``i`` is the mean of the other rows of ``dY``."""
    n = dY.shape[0]
    return (dY.sum(axis=0, keepdims=True) - dY) / (n - 1)


def first_pc_covariate(dY: np.ndarray) -> np.ndarray:
    """First principal component of the standardised differenced panel (``N x T-1``)."""
    sd = dY.std(axis=1, ddof=1, keepdims=True)
    if np.any(sd == 0):
        raise PanelError("principal component covariate: a differenced series is constant")
    Z = (dY - dY.mean(axis=1, keepdims=True)) / sd
    return extract_factors(Z.T, 1).factors[:, 0]


def unit_pvalues(
    panel: Panel,
    variant,
    spec: AdfSpec = AdfSpec(),
    lrv: LrvSpec = LrvSpec(),
    max_lag_x: int = 5,
    tables: TableCache | None = None,
    finite_sample: bool = True,
) -> tuple[list[UnitDiagnostic], list[AdfFit]]:
    """Per-unit p-values for the plain, leave-one-out-covariate and PC-covariate variants.

    Covariate-ADF p-values are read off the rho^2 surface at each unit's
    estimated ``rho2_hat``. With ``finite_sample`` the surface is simulated at
    the panel's length with the same lag search, and plain ADF p-values
    account for the search too; otherwise the limit-law surface and the
    selected-lag DF table are used, which over-reject noticeably at ``T``
    around 150.

    Also returns the constant-case ADF fits whose residuals feed the CD pre-test.
    """
    variant = _variant(variant)
    _require_units(panel)
    tables = tables or default_tables()
    if variant is not Variant.ADF or spec.deterministics != "constant":
        require_balanced(panel)
    adf_spec = AdfSpec("constant", spec.max_lag, spec.fixed_lag)
    adf = unit_adf_fits(panel, adf_spec)
    if variant is Variant.ADF:
        diags = []
        for unit, fit in adf.items():
            table = adf_null_table(tables, adf_spec, fit, "search" if finite_sample else "selected")
            diags.append(UnitDiagnostic(unit, fit.t_stat, fit.lag, pvalue_from_table(fit.t_stat, table), fit.n_obs))
        return diags, list(adf.values())

    Y = panel.values
    dY = np.diff(Y, axis=1)
    if variant is Variant.CADF:
        if np.max(np.abs(dY.sum(axis=0))) <= 1e-10 * max(1.0, np.max(np.abs(dY))):
            raise PanelError(
                "units sum to zero at every date, so the other units' average difference is "
                "-dy_i / (N - 1) and cannot serve as a covariate; use the leave-one-out group "
                "benchmark or the principal-component covariate"
            )
        X = leave_one_out_covariates(dY)
    else:
        X = np.broadcast_to(first_pc_covariate(dY), dY.shape)
    T = panel.n_periods
    surface = tables.hansen_surface("constant", T if finite_sample else None, adf_spec.top_lag, max_lag_x)
    diags = []
    for i, unit in enumerate(panel.units):
        try:
            fit = cadf_fit(Y[i], X[i], adf_spec, lrv, max_lag_x=max_lag_x)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise PanelError(f"CADF fit failed for unit {unit}: {exc}") from exc
        diags.append(UnitDiagnostic(unit, fit.t_stat, fit.lag, surface.pvalue(fit.t_stat, fit.rho2_hat),
                                    fit.n_obs, fit.rho2_hat, fit.covariate_lag))
    return diags, list(adf.values())


def pcadf_family(
    panel: Panel,
    variant="ADF",
    spec: AdfSpec = AdfSpec(),
    lrv: LrvSpec = LrvSpec(),
    cd_threshold: float = 0.10,
    tables: TableCache | None = None,
    finite_sample: bool = True,
) -> TestResult:
    """Combine per-unit (covariate) ADF p-values, choosing the combination by a CD pre-test.

    If the CD p-value on the ADF residuals is below ``cd_threshold`` the
    dependence-corrected combination is used, otherwise the plain inverse-normal
    one. The branch and the CD outcome are recorded in ``diagnostics``.
    """
    if not 0.0 <= cd_threshold <= 1.0:
        raise ValueError("cd_threshold must lie in [0, 1]")
    v = _variant(variant)
    diags, fits = unit_pvalues(panel, v, spec, lrv, tables=tables, finite_sample=finite_sample)
    cd = pesaran_cd(residual_matrix(fits))
    pv = [d.p_value for d in diags]
    if cd["p_value"] < cd_threshold:
        res, branch = demetrescu_z(pv, per_unit=diags), "hartung"
    else:
        res, branch = choi_inverse_normal(pv, per_unit=diags), "choi"
    extra = {"branch": branch, "cd_stat": cd["cd_stat"], "cd_pvalue": cd["p_value"], "cd_threshold": cd_threshold}
    return TestResult(f"p{v.value}", res.statistic, res.p_value, res.critical_values, "left",
                      per_unit=diags, diagnostics={**res.diagnostics, **extra})


def scadf_family(
    panel: Panel,
    variant="ADF",
    spec: AdfSpec = AdfSpec(),
    lrv: LrvSpec = LrvSpec(),
    alpha_levels: Sequence[float] = LEVELS,
    tables: TableCache | None = None,
    finite_sample: bool = True,
) -> SimesResult:
    """Simes intersection test on the same per-unit p-values as :func:`pcadf_family`."""
    v = _variant(variant)
    diags, _ = unit_pvalues(panel, v, spec, lrv, tables=tables, finite_sample=finite_sample)
    return SimesResult(f"s{v.value}", simes_test([d.p_value for d in diags], alpha_levels), tuple(diags))
