"""Null distributions of the non-standard statistics.

Quantile tables are simulated on a fixed 199-point probability grid, cached on
disk and interpolated into p-values. A handful of published critical values
are embedded as constants.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .regression import AdfSpec, LrvSpec, adf_select_lags_batch, adf_tstats_batch, cadf_tstats_batch
from .results import LEVELS

__all__ = [
    "PROB_GRID",
    "P_CLAMP",
    "GLS_C_BAR",
    "FORMAT_VERSION",
    "NORMAL_CV",
    "CHI2_20_CV",
    "CIPS_N10_CV",
    "EMBEDDED_SOURCES",
    "QuantileTable",
    "HansenSurface",
    "IpsMoments",
    "LlcAdjustments",
    "CacheVersionError",
    "CacheChecksumError",
    "simulate_df_quantiles",
    "simulate_ips_moments",
    "simulate_llc_adjustments",
    "simulate_hansen_surface",
    "simulate_hansen_finite",
    "simulate_cips_quantiles",
    "pvalue_from_table",
    "table_critical_values",
    "cache_key",
    "cache_store",
    "cache_load",
    "TableCache",
    "default_tables",
]

logger = logging.getLogger(__name__)

PROB_GRID = np.round(np.linspace(0.005, 0.995, 199), 12)
P_CLAMP = 1e-6
GLS_C_BAR = -7.0
FORMAT_VERSION = 1
BLOCK = 1000
DEFAULT_RHO2_GRID = tuple(np.round(np.linspace(0.0, 1.0, 21), 12).tolist())
FINITE_RHO2_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 12).tolist())

# Upper-tail standard normal quantiles, used with a sign flip for left-tail tests.
NORMAL_CV = {0.01: 2.3263, 0.05: 1.6449, 0.10: 1.2816}
# Upper-tail chi-square quantiles with 20 degrees of freedom (N = 10 Fisher combination).
CHI2_20_CV = {0.01: 37.566, 0.05: 31.410, 0.10: 28.412}
# CIPS critical values, intercept case, N = 10.
CIPS_N10_CV = {0.01: -2.5669, 0.05: -2.3310, 0.10: -2.2062}
EMBEDDED_SOURCES = {
    "normal": "standard normal upper quantiles, 4 decimals",
    "chi2_20": "chi-square(20) upper quantiles, 3 decimals",
    "cips_n10": "Pesaran (2007) CIPS critical values, intercept only, N = 10",
}

FAMILIES = ("df_t", "ips_moments", "llc_adjustments", "cips", "hansen_cadf")


class CacheVersionError(RuntimeError):
    """Cached table written by another format version; it must be regenerated."""


class CacheChecksumError(RuntimeError):
    """Cached table whose contents do not match the stored checksum."""


@dataclass(frozen=True, eq=False)
class QuantileTable:
    family: str
    params: Mapping[str, object]
    probs: np.ndarray
    quants: np.ndarray
    provenance: str = "simulated"
    seed: int | None = None
    reps: int | None = None
    extras: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        probs = np.array(self.probs, dtype=float)
        quants = np.array(self.quants, dtype=float)
        if probs.shape != quants.shape or probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs and quants must be matching non-empty vectors")
        if np.any(np.diff(probs) <= 0) or probs[0] <= 0 or probs[-1] >= 1:
            raise ValueError("probs must be strictly increasing inside (0, 1)")
        if np.any(np.diff(quants) < 0):
            raise ValueError("quants must be nondecreasing")
        probs.setflags(write=False)
        quants.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "quants", quants)
        object.__setattr__(self, "params", dict(sorted(dict(self.params).items())))
        object.__setattr__(self, "extras", dict(self.extras))

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantileTable):
            return NotImplemented
        return (
            self.family == other.family
            and self.params == other.params
            and np.array_equal(self.probs, other.probs)
            and np.array_equal(self.quants, other.quants)
            and self.provenance == other.provenance
            and self.seed == other.seed
            and self.reps == other.reps
            and self.extras == other.extras
        )

    def quantile(self, prob: float) -> float:
        return float(np.interp(prob, self.probs, self.quants))


@dataclass(frozen=True)
class HansenSurface:
    """Quantile tables of the covariate-ADF limit law on a grid of rho^2 values."""

    tables: tuple[QuantileTable, ...]

    def __post_init__(self):
        tables = tuple(sorted(self.tables, key=lambda t: t.params["rho2"]))
        if any(t.family != "hansen_cadf" for t in tables):
            raise ValueError("surface needs hansen_cadf tables")
        grid = [t.params["rho2"] for t in tables]
        if grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValueError("rho^2 grid must include 0 and 1")
        object.__setattr__(self, "tables", tables)

    @property
    def grid(self) -> np.ndarray:
        return np.array([t.params["rho2"] for t in self.tables])

    def at(self, rho2: float) -> QuantileTable:
        for t in self.tables:
            if t.params["rho2"] == rho2:
                return t
        raise KeyError(rho2)

    def pvalue(self, stat: float, rho2: float) -> float:
        grid = self.grid
        rho2 = float(np.clip(rho2, 0.0, 1.0))
        hi = int(np.searchsorted(grid, rho2))
        if hi < len(grid) and grid[hi] == rho2:
            return pvalue_from_table(stat, self.tables[hi])
        lo = hi - 1
        w = (rho2 - grid[lo]) / (grid[hi] - grid[lo])
        p = (1 - w) * pvalue_from_table(stat, self.tables[lo]) + w * pvalue_from_table(stat, self.tables[hi])
        return float(np.clip(p, P_CLAMP, 1 - P_CLAMP))


class IpsMoments(NamedTuple):
    mean: float
    var: float
    reps: int


class LlcAdjustments(NamedTuple):
    mu_star: float
    sigma_star: float
    n_units: int
    n_periods: int
    reps: int


# --- random streams ----------------------------------------------------------------------


def _blocks(seed: int, reps: int, block: int = BLOCK):
    """``(rng, size)`` per block of replications; block ``b`` always gets the same stream."""
    for b, lo in enumerate(range(0, reps, block)):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        yield rng, min(block, reps - lo)


def _gls_demean_rows(Y: np.ndarray, c_bar: float = GLS_C_BAR) -> np.ndarray:
    a = 1.0 + c_bar / Y.shape[1]
    zq = np.concatenate([[1.0], np.full(Y.shape[1] - 1, 1.0 - a)])
    yq = np.concatenate([Y[:, :1], Y[:, 1:] - a * Y[:, :-1]], axis=1)
    return Y - (yq @ zq)[:, None] / (zq @ zq)


def _lag_key(p) -> int | str:
    """Fixed lag ``p``, or ``"aicM"`` for the t-ratio after an AIC search up to ``M``."""
    if isinstance(p, str):
        if not (p.startswith("aic") and p[3:].isdigit()):
            raise ValueError(f"bad lag key {p!r}")
        return p
    return int(p)


def _df_draws(case: str, T: int, p, reps: int, seed: int) -> np.ndarray:
    p = _lag_key(p)
    reg_case = "none" if case == "gls" else case
    out = []
    for rng, size in _blocks(seed, reps):
        Y = np.cumsum(rng.standard_normal((size, T)), axis=1)
        if case == "gls":
            Y = _gls_demean_rows(Y)
        if isinstance(p, int):
            out.append(adf_tstats_batch(Y, reg_case, p))
            continue
        lags = adf_select_lags_batch(Y, reg_case, int(p[3:]))
        t = np.empty(size)
        for lag in np.unique(lags):
            rows = lags == lag
            t[rows] = adf_tstats_batch(Y[rows], reg_case, int(lag))
        out.append(t)
    return np.concatenate(out)


def _quantiles(draws: np.ndarray) -> np.ndarray:
    return np.quantile(draws, PROB_GRID)


# --- simulators ----------------------------------------------------------------------------


def simulate_df_quantiles(case: str, T: int, p, reps: int, seed: int) -> QuantileTable:
    """Quantiles of the ADF t-ratio on driftless random walks of length ``T``.

    ``p`` is a fixed lag, or ``"aicM"`` for the statistic reported after the
    AIC search over lags ``0..M`` (the search is part of the null law).
    ``case`` is ``"none"``, ``"constant"`` or ``"gls"``; the last runs the
    no-intercept regression on GLS-demeaned walks (``c_bar = -7``).
    """
    if reps < 10000:
        raise ValueError("reps must be >= 10000")
    if T < 25:
        raise ValueError("T must be >= 25")
    if case != "gls":
        AdfSpec(case)  # validates the deterministic case
    draws = _df_draws(case, T, p, reps, seed)
    return QuantileTable(
        "df_t", {"case": case, "T": int(T), "p": _lag_key(p)}, PROB_GRID, _quantiles(draws),
        "simulated", seed, reps, {"mean": float(draws.mean()), "var": float(draws.var(ddof=1))},
    )


def simulate_ips_moments(T: int, p: int, reps: int, seed: int) -> IpsMoments:
    """Mean and variance of the constant-case ADF t-ratio at ``(T, p)``."""
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    draws = _df_draws("constant", T, p, reps, seed)
    return IpsMoments(float(draws.mean()), float(draws.var(ddof=1)), reps)


def _llc_null_draws(N: int, T: int, reps: int, seed: int, max_lag: int, lrv: LrvSpec):
    from .firstgen import llc_raw_batch

    t_all, a_all = [], []
    per_block = max(1, BLOCK // 4)
    for rng, size in _blocks(seed, reps, per_block):
        Y = np.cumsum(rng.standard_normal((size, N, T)), axis=2)
        t, a = llc_raw_batch(Y, max_lag, lrv)
        t_all.append(t)
        a_all.append(a)
    return np.concatenate(t_all), np.concatenate(a_all)


def simulate_llc_adjustments(
    N: int, T: int, reps: int, seed: int, max_lag: int = 5, lrv: LrvSpec = LrvSpec()
) -> LlcAdjustments:
    """Mean and SD adjustments for the Levin-Lin-Chu pooled t-ratio (no deterministics).

    Random-walk panels of the tested size ``N x T`` are run through the same
    three-step procedure. With ``t`` the raw pooled t-ratio and
    ``A = N T~ S_N sigma^-2 STD(delta)`` the correction multiplier, the
    adjustments solve ``E[t - A mu*] = 0`` and ``SD[t - A mu*] = sigma*``.
    """
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    t, a = _llc_null_draws(N, T, reps, seed, max_lag, lrv)
    mu = float(t.mean() / a.mean())
    sigma = float((t - a * mu).std(ddof=1))
    return LlcAdjustments(mu, sigma, N, T, reps)


def _wiener_functionals(case: str, reps: int, seed: int, steps: int):
    """Discretised ``int w dW / (int w^2)^(1/2)`` and an independent N(0, 1) per replication."""
    df, z = [], []
    for rng, size in _blocks(seed, reps):
        dW = rng.standard_normal((size, steps)) / np.sqrt(steps)
        W = np.cumsum(dW, axis=1)
        Wlag = np.concatenate([np.zeros((size, 1)), W[:, :-1]], axis=1)
        if case == "constant":
            Wlag = Wlag - Wlag.mean(axis=1, keepdims=True)
        num = np.einsum("ij,ij->i", Wlag, dW)
        den = np.einsum("ij,ij->i", Wlag, Wlag) / steps
        df.append(num / np.sqrt(den))
        z.append(rng.standard_normal(size))
    return np.concatenate(df), np.concatenate(z)


def simulate_hansen_surface(
    rho2_grid: Sequence[float] = DEFAULT_RHO2_GRID,
    reps: int = 20000,
    seed: int = 0,
    case: str = "constant",
    steps: int = 1000,
) -> HansenSurface:
    """Quantiles of ``rho * DF + sqrt(1 - rho^2) * N(0, 1)`` for each ``rho^2`` on the grid.

    ``DF`` is the Dickey-Fuller functional of a standard Wiener process,
    demeaned when ``case="constant"``. The same draws are reused across the
    grid, so the surface is smooth in ``rho^2``.
    """
    grid = np.asarray(rho2_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] != 0.0 or grid[-1] != 1.0:
        raise ValueError("rho2_grid must be ascending and include 0 and 1")
    if steps < 1000:
        raise ValueError("steps must be >= 1000")
    AdfSpec(case)
    df, z = _wiener_functionals(case, reps, seed, steps)
    tables = []
    for r2 in grid:
        draws = np.sqrt(r2) * df + np.sqrt(1.0 - r2) * z
        tables.append(QuantileTable(
            "hansen_cadf", {"case": case, "rho2": float(r2), "steps": int(steps)},
            PROB_GRID, _quantiles(draws), "simulated", seed, reps,
        ))
    return HansenSurface(tuple(tables))


def simulate_hansen_finite(
    T: int,
    rho2_grid: Sequence[float] = FINITE_RHO2_GRID,
    reps: int = 10000,
    seed: int = 0,
    case: str = "constant",
    max_lag: int = 5,
    max_lag_x: int = 5,
) -> HansenSurface:
    """Finite-sample quantiles of the AIC-selected covariate-ADF t-ratio at length ``T``.

    For each grid value ``r`` the differences are ``sqrt(r) e_t + sqrt(1 - r) x_t``
    with ``e`` and ``x`` independent N(0, 1), so ``r`` is the squared long-run
    correlation between ``dy`` and the regression error; the statistic is
    computed exactly as :func:`~panelur.regression.cadf_fit` does, lag search
    included. At ``r = 0`` the regression fits perfectly, so that grid point
    carries the N(0, 1) limit instead. Draws are shared across the grid.
    """
    grid = np.asarray(rho2_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] != 0.0 or grid[-1] != 1.0:
        raise ValueError("rho2_grid must be ascending and include 0 and 1")
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    if T < max(max_lag, max_lag_x) + 10:
        raise ValueError("T too short for the lag search")
    AdfSpec(case)
    draws = {r: [] for r in grid[1:]}
    for rng, size in _blocks(seed, reps):
        e = rng.standard_normal((size, T - 1))
        x = rng.standard_normal((size, T - 1))
        for r in grid[1:]:
            dy = np.sqrt(r) * e + np.sqrt(1.0 - r) * x
            Y = np.concatenate([np.zeros((size, 1)), np.cumsum(dy, axis=1)], axis=1)
            draws[r].append(cadf_tstats_batch(Y, x, case, max_lag, max_lag_x))
    base = {"case": case, "T": int(T), "max_lag": int(max_lag), "max_lag_x": int(max_lag_x)}
    tables = [QuantileTable("hansen_cadf", {**base, "rho2": 0.0}, PROB_GRID, ndtri(PROB_GRID),
                            "simulated", seed, reps, {"limit": True})]
    for r in grid[1:]:
        tables.append(QuantileTable("hansen_cadf", {**base, "rho2": float(r)}, PROB_GRID,
                                    _quantiles(np.concatenate(draws[r])), "simulated", seed, reps))
    return HansenSurface(tuple(tables))


def simulate_cips_quantiles(N: int, T: int, reps: int, seed: int, spec: AdfSpec = AdfSpec()) -> QuantileTable:
    """CIPS null quantiles on independent random-walk panels (fallback for untabulated sizes)."""
    from .data import Panel
    from .secondgen import cips_statistic

    if reps < 200:
        raise ValueError("reps must be >= 200")
    draws = []
    for rng, size in _blocks(seed, reps, 100):
        for _ in range(size):
            Y = np.cumsum(rng.standard_normal((N, T)), axis=1)
            draws.append(cips_statistic(Panel.from_array(Y), spec)[0])
    draws = np.array(draws)
    return QuantileTable(
        "cips", {"N": int(N), "T": int(T), "max_lag": spec.top_lag, "lags": spec.lag_selection},
        PROB_GRID, _quantiles(draws), "simulated", seed, reps,
    )


# --- lookups -------------------------------------------------------------------------------


def _tail_slope(q: np.ndarray, probs: np.ndarray, lo: int, hi: int) -> float:
    dz = ndtri(probs[hi]) - ndtri(probs[lo])
    dq = q[hi] - q[lo]
    return dq / dz if dq > 0 else np.inf


def pvalue_from_table(stat: float, table: QuantileTable | HansenSurface, rho2: float | None = None) -> float:
    """Left-tail probability ``P(S <= stat)`` read off a quantile table.

    Inside the grid the empirical CDF is interpolated linearly. Beyond the
    outermost grid points the tail is extended linearly on the probit scale
    using the slope over the five outermost nodes. The result is clamped to
    ``[1e-6, 1 - 1e-6]``. A :class:`HansenSurface` needs ``rho2`` and
    interpolates linearly between the neighbouring grid tables.
    """
    if isinstance(table, HansenSurface):
        if rho2 is None:
            raise ValueError("rho2 is required for a Hansen surface")
        return table.pvalue(stat, rho2)
    q, probs = table.quants, table.probs
    if not np.isfinite(stat):
        p = 0.0 if stat < 0 else 1.0
    elif stat < q[0]:
        slope = _tail_slope(q, probs, 0, min(4, len(q) - 1))
        p = ndtr(ndtri(probs[0]) + (stat - q[0]) / slope)
    elif stat > q[-1]:
        n = len(q) - 1
        slope = _tail_slope(q, probs, max(n - 4, 0), n)
        p = ndtr(ndtri(probs[-1]) + (stat - q[-1]) / slope)
    else:
        p = np.interp(stat, q, probs)
    return float(np.clip(p, P_CLAMP, 1 - P_CLAMP))


def table_critical_values(table: QuantileTable, levels: Iterable[float] = LEVELS, tail: str = "left") -> dict:
    if tail == "left":
        return {a: table.quantile(a) for a in levels}
    return {a: table.quantile(1 - a) for a in levels}


# --- persistence ---------------------------------------------------------------------------


def _params_str(params: Mapping[str, object]) -> str:
    return ";".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in sorted(params.items()))


def _parse_value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _parse_params(text: str) -> dict:
    if not text:
        return {}
    return {k: _parse_value(v) for k, v in (item.split("=", 1) for item in text.split(";"))}


def cache_key(family: str, params: Mapping[str, object], seed, reps) -> str:
    blob = json.dumps(
        {"family": family, "params": _params_str(params), "seed": seed, "reps": reps,
         "version": FORMAT_VERSION},
        sort_keys=True,
    )
    return f"{family}-{hashlib.sha256(blob.encode()).hexdigest()[:20]}"


def _serialise(tables: Sequence[QuantileTable]) -> str:
    first = tables[0]
    body = io.StringIO()
    body.write("family,params,prob,quantile\n")
    for t in tables:
        ps = _params_str(t.params)
        for pr, qu in zip(t.probs.tolist(), t.quants.tolist()):
            body.write(f'{t.family},"{ps}",{pr!r},{qu!r}\n')
    body_text = body.getvalue()
    meta = {
        "format_version": FORMAT_VERSION,
        "family": first.family,
        "seed": first.seed,
        "reps": first.reps,
        "provenance": first.provenance,
        "extras": {_params_str(t.params): t.extras for t in tables},
        "checksum": hashlib.sha256(body_text.encode()).hexdigest(),
    }
    head = "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in meta.items())
    return head + body_text


def cache_store(tables: QuantileTable | HansenSurface | Sequence[QuantileTable], path) -> Path:
    """Write one or more tables to ``path`` atomically (temporary file, then rename)."""
    if isinstance(tables, QuantileTable):
        tables = [tables]
    elif isinstance(tables, HansenSurface):
        tables = list(tables.tables)
    tables = list(tables)
    if not tables:
        raise ValueError("nothing to store")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = _serialise(tables)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def cache_load(path) -> list[QuantileTable]:
    """Read tables written by :func:`cache_store`, verifying version and checksum."""
    text = Path(path).read_text(encoding="utf-8")
    meta, lines = {}, text.splitlines(keepends=True)
    i = 0
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition(": ")
        try:
            meta[key] = json.loads(value)
        except json.JSONDecodeError:
            raise CacheChecksumError(f"{path}: unreadable metadata line {i + 1}") from None
        i += 1
    if meta.get("format_version") != FORMAT_VERSION:
        raise CacheVersionError(
            f"{path}: format version {meta.get('format_version')} != {FORMAT_VERSION}; regenerate the table"
        )
    body = "".join(lines[i:])
    if hashlib.sha256(body.encode()).hexdigest() != meta.get("checksum"):
        raise CacheChecksumError(f"{path}: checksum mismatch")
    rows: dict[str, tuple[str, list, list]] = {}
    for line in body.splitlines()[1:]:
        family, rest = line.split(",", 1)
        ps, _, nums = rest[1:].partition('",')
        pr, qu = nums.split(",")
        entry = rows.setdefault(ps, (family, [], []))
        entry[1].append(float(pr))
        entry[2].append(float(qu))
    extras = meta.get("extras", {})
    return [
        QuantileTable(family, _parse_params(ps), probs, quants, meta["provenance"], meta["seed"],
                      meta["reps"], extras.get(ps, {}))
        for ps, (family, probs, quants) in rows.items()
    ]


# --- provider ------------------------------------------------------------------------------


class TableCache:
    """Builds tables on demand, memoised in memory and optionally on disk.

    Every table is identified by its family, parameters, seed and number of
    replications; a file written under another format version or with a bad
    checksum is regenerated, never reused. ``events`` records where each
    table came from.
    """

    def __init__(
        self,
        cache_dir=None,
        seed: int = 20240611,
        reps: int = 20000,
        hansen_grid: Sequence[float] = DEFAULT_RHO2_GRID,
        hansen_steps: int = 1000,
        cips_reps: int = 2000,
        cadf_reps: int = 10000,
    ):
        self.cache_dir = None if cache_dir is None else Path(cache_dir)
        self.seed = int(seed)
        self.reps = int(reps)
        self.hansen_grid = tuple(hansen_grid)
        self.hansen_steps = int(hansen_steps)
        self.cips_reps = int(cips_reps)
        self.cadf_reps = int(cadf_reps)
        self.events: list[tuple[str, str]] = []
        self._mem: dict[str, list[QuantileTable]] = {}

    def _get(self, family: str, params: dict, reps: int, build: Callable[[], list[QuantileTable]]):
        key = cache_key(family, params, self.seed, reps)
        if key in self._mem:
            return self._mem[key]
        tables = None
        if self.cache_dir is not None:
            path = self.cache_dir / f"{key}.csv"
            if path.exists():
                try:
                    tables = cache_load(path)
                    self.events.append((key, "loaded"))
                except (CacheVersionError, CacheChecksumError) as exc:
                    logger.warning("%s; regenerating", exc)
                    self.events.append((key, "regenerated"))
        if tables is None:
            tables = build()
            if self.cache_dir is not None:
                cache_store(tables, self.cache_dir / f"{key}.csv")
            self.events.append((key, "simulated"))
        self._mem[key] = tables
        return tables

    def df_table(self, case: str, T: int, p) -> QuantileTable:
        params = {"case": case, "T": int(T), "p": _lag_key(p)}
        return self._get("df_t", params, self.reps,
                         lambda: [simulate_df_quantiles(case, T, p, self.reps, self.seed)])[0]

    def ips_moments(self, T: int, p: int) -> IpsMoments:
        t = self.df_table("constant", T, p)
        return IpsMoments(t.extras["mean"], t.extras["var"], t.reps)

    def llc_adjustments(self, N: int, T: int, max_lag: int = 5, lrv: LrvSpec = LrvSpec()) -> LlcAdjustments:
        bw = "auto" if lrv.bandwidth is None else int(lrv.bandwidth)
        params = {"N": int(N), "T": int(T), "max_lag": int(max_lag), "bandwidth": bw}

        def build():
            t, a = _llc_null_draws(N, T, self.reps, self.seed, max_lag, lrv)
            mu = float(t.mean() / a.mean())
            adj = t - a * mu
            sigma = float(adj.std(ddof=1))
            return [QuantileTable("llc_adjustments", params, PROB_GRID, _quantiles(adj / sigma),
                                  "simulated", self.seed, self.reps,
                                  {"mu_star": mu, "sigma_star": sigma})]

        t = self._get("llc_adjustments", params, self.reps, build)[0]
        return LlcAdjustments(t.extras["mu_star"], t.extras["sigma_star"], N, T, t.reps)

    def hansen_surface(
        self, case: str = "constant", T: int | None = None, max_lag: int = 5, max_lag_x: int = 5
    ) -> HansenSurface:
        """Limit-law surface, or the finite-sample one for length ``T`` when given."""
        if T is not None:
            params = {"case": case, "T": int(T), "max_lag": int(max_lag), "max_lag_x": int(max_lag_x),
                      "grid": ",".join(repr(float(g)) for g in FINITE_RHO2_GRID)}
            return HansenSurface(tuple(self._get(
                "hansen_cadf", params, self.cadf_reps,
                lambda: list(simulate_hansen_finite(T, FINITE_RHO2_GRID, self.cadf_reps, self.seed, case,
                                                    max_lag, max_lag_x).tables))))
        params = {"case": case, "steps": self.hansen_steps,
                  "grid": ",".join(repr(float(g)) for g in self.hansen_grid)}

        def build():
            return list(simulate_hansen_surface(self.hansen_grid, self.reps, self.seed, case,
                                                self.hansen_steps).tables)

        return HansenSurface(tuple(self._get("hansen_cadf", params, self.reps, build)))

    def cips_table(self, N: int, T: int, spec: AdfSpec = AdfSpec()) -> QuantileTable:
        params = {"N": int(N), "T": int(T), "max_lag": spec.top_lag, "lags": spec.lag_selection}
        return self._get("cips", params, self.cips_reps,
                         lambda: [simulate_cips_quantiles(N, T, self.cips_reps, self.seed, spec)])[0]

    def describe(self) -> dict:
        return {
            "seed": self.seed,
            "reps": self.reps,
            "cips_reps": self.cips_reps,
            "cadf_reps": self.cadf_reps,
            "hansen_steps": self.hansen_steps,
            "hansen_grid_points": len(self.hansen_grid),
            "cache_dir": None if self.cache_dir is None else str(self.cache_dir),
            "format_version": FORMAT_VERSION,
        }


_DEFAULT: TableCache | None = None


def default_tables() -> TableCache:
    """Process-wide provider; set ``PANELUR_CACHE_DIR`` to persist tables between runs."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = TableCache(os.environ.get("PANELUR_CACHE_DIR"))
    return _DEFAULT
