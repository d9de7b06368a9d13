"""Univariate regression machinery shared by the panel tests.

Dickey-Fuller regressions with AIC lag choice, GLS demeaning, cross-section
demeaning, covariate-augmented (Hansen) ADF regressions and Bartlett long-run
variances. Batched variants at the bottom serve the Monte Carlo code; they are
checked against the single-series path in the test-suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .data import Panel, require_balanced

__all__ = [
    "AdfSpec",
    "LrvSpec",
    "OlsResult",
    "AdfFit",
    "CadfFit",
    "SingularDesignError",
    "DegenerateInputError",
    "ols",
    "adf_fit",
    "cadf_fit",
    "pesaran_cadf_unit",
    "gls_detrend",
    "demean_cross_section",
    "long_run_variance",
    "long_run_covariance",
    "adf_tstats_batch",
    "adf_select_lags_batch",
]

_RANK_TOL = 1e-10
DETERMINISTICS = ("none", "constant")


class SingularDesignError(np.linalg.LinAlgError):
    """Regressor matrix without full column rank."""


class DegenerateInputError(ValueError):
    """Series (or covariate) without variation."""


@dataclass(frozen=True)
class AdfSpec:
    """Deterministic terms and lag rule for a Dickey-Fuller regression.

    ``fixed_lag`` set means that many lagged differences are used; otherwise the
    order is chosen by AIC over ``0..max_lag``.
    """

    deterministics: str = "constant"
    max_lag: int = 5
    fixed_lag: int | None = None

    def __post_init__(self):
        if self.deterministics not in DETERMINISTICS:
            raise ValueError(f"deterministics must be one of {DETERMINISTICS}")
        if self.max_lag < 0 or (self.fixed_lag is not None and self.fixed_lag < 0):
            raise ValueError("lag orders must be non-negative")

    @classmethod
    def fixed(cls, p: int, deterministics: str = "constant") -> "AdfSpec":
        return cls(deterministics, max_lag=p, fixed_lag=p)

    @classmethod
    def aic(cls, max_p: int = 5, deterministics: str = "constant") -> "AdfSpec":
        return cls(deterministics, max_lag=max_p)

    @property
    def lag_selection(self) -> str:
        return "aic" if self.fixed_lag is None else "fixed"

    @property
    def top_lag(self) -> int:
        return self.max_lag if self.fixed_lag is None else self.fixed_lag

    @property
    def candidates(self) -> range:
        if self.fixed_lag is not None:
            return range(self.fixed_lag, self.fixed_lag + 1)
        return range(self.max_lag + 1)


@dataclass(frozen=True)
class LrvSpec:
    """Bartlett kernel; ``bandwidth=None`` picks ``floor(4 (T/100)^(2/9))``."""

    kernel: str = "bartlett"
    bandwidth: int | None = None

    def __post_init__(self):
        if self.kernel != "bartlett":
            raise ValueError("only the Bartlett kernel is available")
        if self.bandwidth is not None and self.bandwidth < 0:
            raise ValueError("bandwidth must be >= 0")

    def lags(self, nobs: int) -> int:
        if self.bandwidth is not None:
            return self.bandwidth
        return int(math.floor(4.0 * (nobs / 100.0) ** (2.0 / 9.0)))


@dataclass(frozen=True)
class OlsResult:
    coefficients: np.ndarray
    stderrs: np.ndarray
    residuals: np.ndarray
    sigma2: float
    cov_unscaled: np.ndarray = field(repr=False)

    @property
    def rss(self) -> float:
        return float(self.residuals @ self.residuals)

    @property
    def tvalues(self) -> np.ndarray:
        return self.coefficients / self.stderrs


@dataclass(frozen=True)
class AdfFit:
    """Dickey-Fuller regression of ``dy_t`` on deterministics, ``y_{t-1}`` and lagged ``dy``.

    ``first_index`` is the position in the input series of the first
    dependent observation, so ``residuals[j]`` belongs to ``y[first_index + j]``.
    """

    rho_hat: float
    alpha_hat: float | None
    beta_hats: np.ndarray
    t_stat: float
    rho_stderr: float
    lag: int
    residuals: np.ndarray = field(repr=False)
    n_obs: int
    deterministics: str
    first_index: int
    sigma2: float
    exog: np.ndarray = field(repr=False)
    endog: np.ndarray = field(repr=False)
    ic: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class CadfFit(AdfFit):
    """ADF fit augmented with a stationary covariate and its lags."""

    covariate_lag: int = 0
    b_hats: np.ndarray = field(default=None, repr=False)
    rho2_hat: float = 1.0

    @property
    def delta_hat(self) -> float:
        return self.rho_hat


def ols(y, X) -> OlsResult:
    """Least squares with classical standard errors; refuses rank-deficient designs."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    if n <= k:
        raise ValueError(f"need more observations ({n}) than regressors ({k})")
    q, r = np.linalg.qr(X)
    d = np.abs(np.diag(r))
    if d.max() == 0.0 or d.min() <= _RANK_TOL * d.max():
        raise SingularDesignError("regressor matrix is rank deficient")
    coef = solve_triangular(r, q.T @ y)
    resid = y - X @ coef
    sigma2 = float(resid @ resid) / (n - k)
    rinv = solve_triangular(r, np.eye(k))
    cov_unscaled = rinv @ rinv.T
    se = np.sqrt(sigma2 * np.diag(cov_unscaled))
    return OlsResult(coef, se, resid, sigma2, cov_unscaled)


def _columns(sources: Sequence[tuple[np.ndarray, int]], start: int, const: bool) -> np.ndarray:
    """Stack ``arr[start - j : len - j]`` for every ``(arr, j)``; sources are aligned with ``dy``."""
    n = len(sources[0][0]) - start
    cols = [np.ones(n)] if const else []
    for arr, j in sources:
        cols.append(arr[start - j: len(arr) - j])
    return np.column_stack(cols)


def _aic(rss: float, n: int, k: int) -> float:
    if rss <= 0.0:
        return -np.inf
    return n * math.log(rss / n) + 2 * k


def _select_fit(dy, candidates, const):
    """AIC over candidate regressor sets on a common sample, then refit the winner.

    ``candidates`` is a list of ``(key, sources)``; the winner is refit on the
    longest sample its own lags allow. Ties go to the earlier candidate.
    """
    def depth(sources):
        return max([j for _, j in sources] + [0])

    ic = {}
    if len(candidates) == 1:
        best_key, best_sources = candidates[0]
    else:
        common = max(depth(s) for _, s in candidates)
        yc = dy[common:]
        best, best_key, best_sources = np.inf, None, None
        for key, sources in candidates:
            X = _columns(sources, common, const)
            res = ols(yc, X)
            val = _aic(res.rss, len(yc), X.shape[1])
            ic[key] = val
            if val < best or best_key is None:
                best, best_key, best_sources = val, key, sources
    start = depth(best_sources)
    X = _columns(best_sources, start, const)
    res = ols(dy[start:], X)
    return best_key, res, X, start, ic


def _check_length(y: np.ndarray, top_lag: int) -> None:
    if y.ndim != 1:
        raise ValueError("expected a one-dimensional series")
    if len(y) < top_lag + 10:
        raise ValueError(f"series of length {len(y)} too short for lag {top_lag} (need >= {top_lag + 10})")


def _make_fit(cls, res, X, dy, start, lag, spec, ic, beta_offset=None, **extra):
    const = spec.deterministics == "constant"
    off = 1 if const else 0
    if beta_offset is None:
        beta_offset = off + 1
    return cls(
        rho_hat=float(res.coefficients[off]),
        alpha_hat=float(res.coefficients[0]) if const else None,
        beta_hats=np.array(res.coefficients[beta_offset: beta_offset + lag]),
        t_stat=float(res.coefficients[off] / res.stderrs[off]),
        rho_stderr=float(res.stderrs[off]),
        lag=lag,
        residuals=res.residuals,
        n_obs=len(res.residuals),
        deterministics=spec.deterministics,
        first_index=start + 1,
        sigma2=res.sigma2,
        exog=X,
        endog=dy[start:],
        ic=ic,
        **extra,
    )


def adf_fit(y, spec: AdfSpec = AdfSpec()) -> AdfFit:
    """Fit ``dy_t = [a] + rho y_{t-1} + sum_k beta_k dy_{t-k} + v_t``.

    Under AIC selection every candidate order is fitted on the sample left
    after dropping the first ``max_lag + 1`` observations, and AIC is
    ``n ln(RSS/n) + 2k``. The chosen order is then refit on all observations
    it can use, so the statistic matches a fixed-lag fit of that order.
    """
    y = np.asarray(y, dtype=float)
    _check_length(y, spec.top_lag)
    if np.ptp(y) == 0.0:
        raise DegenerateInputError("series is constant")
    dy = np.diff(y)
    ylev = y[:-1]
    candidates = [(p, [(ylev, 0)] + [(dy, j) for j in range(1, p + 1)]) for p in spec.candidates]
    lag, res, X, start, ic = _select_fit(dy, candidates, spec.deterministics == "constant")
    return _make_fit(AdfFit, res, X, dy, start, lag, spec, ic)


def cadf_fit(
    y,
    x,
    spec: AdfSpec = AdfSpec(),
    lrv: LrvSpec = LrvSpec(),
    max_lag_x: int = 5,
    fixed_lag_x: int | None = None,
) -> CadfFit:
    """Covariate-augmented Dickey-Fuller regression (Hansen 1995).

    Fits ``dy_t = [a] + delta y_{t-1} + sum_{k=1}^p a_k dy_{t-k}
    + sum_{j=0}^q b_j x_{t-j} + e_t`` with ``(p, q)`` chosen jointly by AIC.
    ``x`` is a stationary covariate aligned either with ``y`` (its first value
    is then dropped) or with ``diff(y)``.

    ``rho2_hat`` estimates the squared long-run correlation between
    ``v_t = e_t + sum_j b_j x_{t-j}`` and ``e_t`` from a Bartlett long-run
    covariance, clipped to ``[0, 1]``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    top_x = max_lag_x if fixed_lag_x is None else fixed_lag_x
    _check_length(y, max(spec.top_lag, top_x))
    if len(x) == len(y):
        x = x[1:]
    if len(x) != len(y) - 1:
        raise ValueError("covariate must have len(y) or len(y) - 1 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("covariate contains non-finite values")
    if np.ptp(y) == 0.0:
        raise DegenerateInputError("series is constant")
    if np.ptp(x) == 0.0:
        raise DegenerateInputError("covariate is constant")
    dy = np.diff(y)
    ylev = y[:-1]
    qs = range(max_lag_x + 1) if fixed_lag_x is None else range(fixed_lag_x, fixed_lag_x + 1)
    candidates = []
    for p in spec.candidates:
        for q in qs:
            sources = [(ylev, 0)] + [(dy, j) for j in range(1, p + 1)] + [(x, j) for j in range(q + 1)]
            candidates.append(((p, q), sources))
    (p, q), res, X, start, ic = _select_fit(dy, candidates, spec.deterministics == "constant")
    if res.rss <= 1e-20 * max(float(np.sum((dy - dy.mean()) ** 2)), 1e-300):
        raise DegenerateInputError("covariate reproduces the differenced series exactly")

    off = (1 if spec.deterministics == "constant" else 0) + 1 + p
    b = np.array(res.coefficients[off: off + q + 1])
    e = res.residuals
    v = e + X[:, off: off + q + 1] @ b
    omega = long_run_covariance(np.column_stack([v, e]), lrv, demean=True)
    denom = omega[0, 0] * omega[1, 1]
    if omega[1, 1] <= 1e-12 * max(omega[0, 0], 1e-300):
        rho2 = 0.0
    else:
        rho2 = float(np.clip(omega[0, 1] ** 2 / denom, 0.0, 1.0))
    return _make_fit(CadfFit, res, X, dy, start, p, spec, ic, covariate_lag=q, b_hats=b, rho2_hat=rho2)


def pesaran_cadf_unit(y, ybar, spec: AdfSpec = AdfSpec()) -> AdfFit:
    """Cross-sectionally augmented DF regression for one unit (Pesaran 2007).

    Regresses ``dy_t`` on deterministics, ``y_{t-1}``, ``ybar_{t-1}``,
    ``dybar_t`` and ``p`` lags of both ``dy`` and ``dybar``; returns the fit
    with the t-ratio on ``y_{t-1}``. A numerically constant ``ybar`` (as in a
    panel of deviations from the cross-section mean) leaves a plain ADF fit.
    """
    y = np.asarray(y, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    if y.shape != ybar.shape:
        raise ValueError("y and ybar must be aligned")
    _check_length(y, spec.top_lag)
    if np.ptp(y) == 0.0:
        raise DegenerateInputError("series is constant")
    if np.ptp(ybar) <= 1e-12 * max(1.0, np.ptp(y)):
        # a constant cross-section average carries no information; the regression is a plain ADF
        return adf_fit(y, spec)
    dy, dbar = np.diff(y), np.diff(ybar)
    ylev, barlev = y[:-1], ybar[:-1]
    candidates = []
    for p in spec.candidates:
        sources = [(ylev, 0), (barlev, 0), (dbar, 0)]
        sources += [(dbar, j) for j in range(1, p + 1)] + [(dy, j) for j in range(1, p + 1)]
        candidates.append((p, sources))
    lag, res, X, start, ic = _select_fit(dy, candidates, spec.deterministics == "constant")
    # own-lag coefficients sit after the cross-average block
    off = (1 if spec.deterministics == "constant" else 0) + 3 + lag
    return _make_fit(AdfFit, res, X, dy, start, lag, spec, ic, beta_offset=off)


def gls_detrend(y, c_bar: float = -7.0) -> np.ndarray:
    """Remove a constant estimated by quasi-differenced GLS (Elliott, Rothenberg and Stock).

    With ``a = 1 + c_bar / T`` the constant is the OLS coefficient of
    ``(y_1, y_2 - a y_1, ...)`` on ``(1, 1 - a, ...)``. ``c_bar = -T`` gives
    ``a = 0`` and plain demeaning.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or len(y) < 3:
        raise ValueError("need a series of length >= 3")
    a = 1.0 + c_bar / len(y)
    yq = np.concatenate([y[:1], y[1:] - a * y[:-1]])
    zq = np.concatenate([[1.0], np.full(len(y) - 1, 1.0 - a)])
    return y - (zq @ yq) / (zq @ zq)


def demean_cross_section(panel: Panel) -> Panel:
    require_balanced(panel)
    v = panel.values
    return panel.with_values(v - v.mean(axis=0))


def long_run_variance(u, lrv: LrvSpec = LrvSpec(), demean: bool = False) -> float:
    """Bartlett-weighted sum of autocovariances, ``w_j = 1 - |j| / (m + 1)``."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or len(u) < 4:
        raise ValueError("need a series of length >= 4")
    if demean:
        u = u - u.mean()
    n = len(u)
    m = min(lrv.lags(n), n - 1)
    total = u @ u / n
    for j in range(1, m + 1):
        total += 2.0 * (1.0 - j / (m + 1.0)) * (u[j:] @ u[:-j]) / n
    return float(total)


def long_run_covariance(U, lrv: LrvSpec = LrvSpec(), demean: bool = False) -> np.ndarray:
    """Bartlett long-run covariance of the columns of ``U`` (``T x k``)."""
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if demean:
        U = U - U.mean(axis=0)
    n = U.shape[0]
    m = min(lrv.lags(n), n - 1)
    omega = U.T @ U / n
    for j in range(1, m + 1):
        g = U[j:].T @ U[:-j] / n
        omega += (1.0 - j / (m + 1.0)) * (g + g.T)
    return omega


# --- batched kernels for simulation ----------------------------------------------------------


def _batch_design(Y: np.ndarray, deterministics: str, p: int, start: int):
    dY = np.diff(Y, axis=1)
    n = dY.shape[1] - start
    cols = []
    if deterministics == "constant":
        cols.append(np.ones((Y.shape[0], n)))
    cols.append(Y[:, start:-1])
    for j in range(1, p + 1):
        cols.append(dY[:, start - j: dY.shape[1] - j])
    return np.stack(cols, axis=2), dY[:, start:]


def _batch_ols(X: np.ndarray, y: np.ndarray):
    xtx = np.einsum("bni,bnj->bij", X, X)
    xty = np.einsum("bni,bn->bi", X, y)
    coef = np.linalg.solve(xtx, xty[..., None])[..., 0]
    resid = y - np.einsum("bni,bi->bn", X, coef)
    return coef, resid, xtx


def adf_tstats_batch(Y, deterministics: str = "constant", lag: int = 0) -> np.ndarray:
    """t-ratios on ``y_{t-1}`` for every row of ``Y`` at a fixed lag."""
    Y = np.asarray(Y, dtype=float)
    X, dy = _batch_design(Y, deterministics, lag, lag)
    coef, resid, xtx = _batch_ols(X, dy)
    n, k = X.shape[1], X.shape[2]
    sigma2 = np.einsum("bn,bn->b", resid, resid) / (n - k)
    idx = 1 if deterministics == "constant" else 0
    e = np.zeros(k)
    e[idx] = 1.0
    var = np.linalg.solve(xtx, np.broadcast_to(e, (len(Y), k))[..., None])[:, idx, 0]
    return coef[:, idx] / np.sqrt(sigma2 * var)


def adf_select_lags_batch(Y, deterministics: str = "constant", max_lag: int = 5) -> np.ndarray:
    """AIC-selected lag order for each row of ``Y``, same rule as :func:`adf_fit`."""
    Y = np.asarray(Y, dtype=float)
    best = np.full(len(Y), np.inf)
    lags = np.zeros(len(Y), dtype=int)
    for p in range(max_lag + 1):
        X, dy = _batch_design(Y, deterministics, p, max_lag)
        _, resid, _ = _batch_ols(X, dy)
        n, k = X.shape[1], X.shape[2]
        rss = np.einsum("bn,bn->b", resid, resid)
        aic = n * np.log(rss / n) + 2 * k
        better = aic < best
        best[better] = aic[better]
        lags[better] = p
    return lags


def _batch_tstat(X: np.ndarray, y: np.ndarray, idx: int) -> np.ndarray:
    coef, resid, xtx = _batch_ols(X, y)
    n, k = X.shape[1], X.shape[2]
    sigma2 = np.einsum("bn,bn->b", resid, resid) / (n - k)
    e = np.zeros(k)
    e[idx] = 1.0
    var = np.linalg.solve(xtx, np.broadcast_to(e, (len(y), k))[..., None])[:, idx, 0]
    return coef[:, idx] / np.sqrt(sigma2 * var)


def _batch_cadf_design(Y, dY, Xc, const, p, q, start):
    n = dY.shape[1] - start
    cols = [np.ones((Y.shape[0], n))] if const else []
    cols.append(Y[:, start:-1])
    cols += [dY[:, start - j: dY.shape[1] - j] for j in range(1, p + 1)]
    cols += [Xc[:, start - j: Xc.shape[1] - j] for j in range(q + 1)]
    return np.stack(cols, axis=2), dY[:, start:]


def cadf_tstats_batch(Y, X, deterministics: str = "constant", max_lag: int = 5, max_lag_x: int = 5) -> np.ndarray:
    """t-ratios of :func:`cadf_fit` with joint AIC selection for every row of ``Y``.

    ``X`` holds the covariates aligned with ``diff(Y)``. Selection and the
    final refit follow :func:`cadf_fit` exactly.
    """
    Y = np.asarray(Y, dtype=float)
    Xc = np.asarray(X, dtype=float)
    dY = np.diff(Y, axis=1)
    if Xc.shape != dY.shape:
        raise ValueError("covariates must be aligned with diff(Y)")
    const = deterministics == "constant"
    idx = 1 if const else 0
    common = max(max_lag, max_lag_x)
    keys = [(p, q) for p in range(max_lag + 1) for q in range(max_lag_x + 1)]
    best = np.full(len(Y), np.inf)
    choice = np.zeros(len(Y), dtype=int)
    for c, (p, q) in enumerate(keys):
        D, dy = _batch_cadf_design(Y, dY, Xc, const, p, q, common)
        _, resid, _ = _batch_ols(D, dy)
        n, k = D.shape[1], D.shape[2]
        aic = n * np.log(np.einsum("bn,bn->b", resid, resid) / n) + 2 * k
        better = aic < best
        best[better] = aic[better]
        choice[better] = c
    t = np.empty(len(Y))
    for c in np.unique(choice):
        rows = np.flatnonzero(choice == c)
        p, q = keys[c]
        D, dy = _batch_cadf_design(Y[rows], dY[rows], Xc[rows], const, p, q, max(p, q))
        t[rows] = _batch_tstat(D, dy, idx)
    return t
