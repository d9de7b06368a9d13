"""Real interest rate differentials from CPI and money-market rate series."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import EA, MonthIndex, Panel, PanelError, RawSeries, align_panel

__all__ = [
    "InflationMode",
    "Benchmark",
    "RirdPanel",
    "SummaryRow",
    "compute_inflation",
    "compute_real_rate",
    "real_rate_panel",
    "compute_rird",
    "summary_stats",
    "write_rird_csv",
]


class InflationMode(str, enum.Enum):
    EX_ANTE = "ex_ante"  # expected inflation = current inflation
    EX_POST = "ex_post"  # expected inflation = realised next-month inflation


class Benchmark(str, enum.Enum):
    EURO_AREA = "euro_area"
    GROUP_AVERAGE = "group_average"


@dataclass(frozen=True)
class RirdPanel:
    panel: Panel
    mode: InflationMode | None
    benchmark: Benchmark
    leave_one_out: bool = False

    @property
    def units(self) -> tuple[str, ...]:
        return self.panel.units


@dataclass(frozen=True)
class SummaryRow:
    min: float
    max: float
    mean: float
    sd: float
    n: int


def compute_inflation(cpi: RawSeries, horizon_months: int = 12) -> RawSeries:
    """Annualised log-difference inflation in percent.

    ``100 * (ln CPI_t - ln CPI_{t-h}) * 12 / h``. The first ``h`` months are
    lost; any month whose lagged CPI is unavailable is skipped.
    """
    if horizon_months < 1:
        raise ValueError("horizon_months must be >= 1")
    if cpi.variable != "cpi":
        raise ValueError(f"expected a cpi series, got {cpi.variable!r}")
    if len(cpi) <= horizon_months:
        raise ValueError(f"{cpi.unit_id}: CPI series shorter than the inflation horizon")
    if np.any(cpi.values <= 0):
        raise ValueError(f"{cpi.unit_id}: CPI must be strictly positive")
    level = cpi.as_dict()
    months, values = [], []
    scale = 100.0 * 12.0 / horizon_months
    for m in cpi.months:
        prev = level.get(m.shift(-horizon_months))
        if prev is None:
            continue
        months.append(m)
        values.append(scale * (np.log(level[m]) - np.log(prev)))
    return RawSeries(cpi.unit_id, "inflation", tuple(months), np.array(values))


def compute_real_rate(nominal: RawSeries, inflation: RawSeries, mode: InflationMode | str) -> RawSeries:
    """Fisher real rate ``i_t - E_t[inflation_{t+1}]`` under the chosen expectation scheme."""
    mode = InflationMode(mode)
    if nominal.unit_id != inflation.unit_id:
        raise ValueError(f"unit mismatch: {nominal.unit_id} vs {inflation.unit_id}")
    infl = inflation.as_dict()
    overlap = [m for m in nominal.months if m in infl]
    if len(overlap) < 2:
        raise ValueError(f"{nominal.unit_id}: nominal rate and inflation overlap in fewer than 2 months")
    lead = 0 if mode is InflationMode.EX_ANTE else 1
    months, values = [], []
    for m, i_t in zip(nominal.months, nominal.values):
        expected = infl.get(m.shift(lead))
        if expected is None:
            continue
        months.append(m)
        values.append(i_t - expected)
    return RawSeries(nominal.unit_id, "real_rate", tuple(months), np.array(values))


def real_rate_panel(
    series: Sequence[RawSeries],
    mode: InflationMode | str,
    horizon_months: int = 12,
    window: tuple[MonthIndex, MonthIndex] | None = None,
) -> Panel:
    """Real rates for every unit that has both a ``cpi`` and a ``rate`` series."""
    by_key = {(s.unit_id, s.variable): s for s in series}
    units = []
    for s in series:
        if s.unit_id not in units:
            units.append(s.unit_id)
    real = []
    for unit in units:
        cpi, rate = by_key.get((unit, "cpi")), by_key.get((unit, "rate"))
        if cpi is None or rate is None:
            raise PanelError(f"unit {unit} needs both cpi and rate series")
        real.append(compute_real_rate(rate, compute_inflation(cpi, horizon_months), mode))
    return align_panel(real, "real_rate", window)


def _common_window(panel: Panel, units: Sequence[str]) -> tuple[int, int]:
    spans = [panel.unit_span(u) for u in units]
    lo = max(s[0] for s in spans)
    hi = min(s[1] for s in spans)
    if hi - lo < 1:
        raise PanelError("units share fewer than 2 months")
    return lo, hi


def compute_rird(
    real_rates: Panel,
    benchmark: Benchmark | str,
    mode: InflationMode | str | None = None,
    leave_one_out: bool = False,
) -> RirdPanel:
    """Differentials against the Euro-area rate or the group mean.

    Under ``euro_area`` the ``EA`` row is the benchmark and is dropped from the
    output. Under ``group_average`` the benchmark at each month is the mean of
    the member units (``EA`` excluded), including the unit itself unless
    ``leave_one_out`` is set. The panel is cut to the months all involved units
    cover; a missing cell inside that window is an error.
    """
    benchmark = Benchmark(benchmark)
    mode = None if mode is None else InflationMode(mode)
    members = [u for u in real_rates.units if u != EA]
    if benchmark is Benchmark.EURO_AREA:
        if EA not in real_rates.units:
            raise PanelError("euro_area benchmark requires a unit 'EA'")
        if not members:
            raise PanelError("no member units besides 'EA'")
        involved = members + [EA]
    else:
        if len(members) < 2:
            raise PanelError("group_average benchmark requires at least 2 member units")
        involved = members

    lo, hi = _common_window(real_rates, involved)
    block = real_rates.select(involved)
    vals = block.values[:, lo:hi + 1]
    miss = block.missing[:, lo:hi + 1]
    if miss.any():
        i, j = np.argwhere(miss)[0]
        raise PanelError(f"missing real rate for {involved[i]} at {real_rates.time_axis[lo + j]}")

    r = vals[: len(members)]
    if benchmark is Benchmark.EURO_AREA:
        diff = r - vals[-1]
    elif leave_one_out:
        n = len(members)
        diff = r - (r.sum(axis=0) - r) / (n - 1)
    else:
        diff = r - r.mean(axis=0)
    axis = real_rates.time_axis[lo:hi + 1]
    panel = Panel(tuple(members), axis, diff, np.zeros_like(diff, dtype=bool), "rird")
    return RirdPanel(panel, mode, benchmark, leave_one_out)


def summary_stats(rird: RirdPanel | Panel) -> dict[str, SummaryRow]:
    """Min, max, mean and sample SD per unit plus a pooled ``"Panel"`` row."""
    panel = rird.panel if isinstance(rird, RirdPanel) else rird
    out = {}
    pooled = []
    for i, unit in enumerate(panel.units):
        x = panel.values[i, ~panel.missing[i]]
        if x.size < 2:
            raise ValueError(f"unit {unit} has fewer than 2 observations")
        out[unit] = SummaryRow(float(x.min()), float(x.max()), float(x.mean()), float(x.std(ddof=1)), x.size)
        pooled.append(x)
    x = np.concatenate(pooled)
    out["Panel"] = SummaryRow(float(x.min()), float(x.max()), float(x.mean()), float(x.std(ddof=1)), x.size)
    return out


def write_rird_csv(rird: RirdPanel, path) -> None:
    """``date,unit,rird`` rows, one per observed cell."""
    panel = rird.panel
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "unit", "rird"])
        for i, unit in enumerate(panel.units):
            for j, m in enumerate(panel.time_axis):
                if not panel.missing[i, j]:
                    w.writerow([str(m), unit, repr(float(panel.values[i, j]))])
