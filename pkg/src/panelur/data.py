"""Monthly country panels: CSV ingestion, alignment and validation.

Series are read from a long-format CSV with columns ``date,country,variable,value``
where ``date`` is ``YYYY-MM``. The Euro-area benchmark is an ordinary series
carrying the reserved unit id ``"EA"``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import total_ordering
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "EA",
    "INPUT_VARIABLES",
    "MonthIndex",
    "RawSeries",
    "Panel",
    "IngestionError",
    "BalanceRequired",
    "PanelError",
    "load_csv",
    "dump_csv",
    "align_panel",
    "require_balanced",
]

EA = "EA"
# Variables accepted in input files; the pipeline derives "inflation" and "real_rate".
INPUT_VARIABLES = ("cpi", "rate")
CSV_COLUMNS = ("date", "country", "variable", "value")


class IngestionError(ValueError):
    """Raised when an input file cannot be parsed into series."""


class PanelError(ValueError):
    """Raised when series cannot be arranged into a usable panel."""


class BalanceRequired(PanelError):
    """Raised when an operation needs a panel without missing cells."""

    def __init__(self, missing: Sequence[tuple[str, "MonthIndex"]]):
        self.missing = list(missing)
        shown = ", ".join(f"({u}, {m})" for u, m in self.missing[:20])
        more = "" if len(self.missing) <= 20 else f" and {len(self.missing) - 20} more"
        super().__init__(f"balanced panel required; missing cells: {shown}{more}")


@total_ordering
@dataclass(frozen=True)
class MonthIndex:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"invalid month {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthIndex":
        """Parse ``YYYY-MM``. Day components are rejected rather than dropped."""
        text = text.strip()
        parts = text.split("-")
        if len(parts) != 2 or len(parts[0]) != 4 or len(parts[1]) != 2:
            raise ValueError(f"invalid date {text!r}, expected YYYY-MM")
        try:
            year, month = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"invalid date {text!r}, expected YYYY-MM") from None
        if not 1 <= month <= 12:
            raise ValueError(f"invalid month in {text!r}")
        return cls(year, month)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    @classmethod
    def from_ordinal(cls, k: int) -> "MonthIndex":
        return cls(k // 12, k % 12 + 1)

    def shift(self, months: int) -> "MonthIndex":
        return MonthIndex.from_ordinal(self.ordinal + months)

    def __lt__(self, other: "MonthIndex") -> bool:
        if not isinstance(other, MonthIndex):
            return NotImplemented
        return self.ordinal < other.ordinal

    def __sub__(self, other: "MonthIndex") -> int:
        return self.ordinal - other.ordinal

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: MonthIndex, end: MonthIndex) -> tuple[MonthIndex, ...]:
    return tuple(MonthIndex.from_ordinal(k) for k in range(start.ordinal, end.ordinal + 1))


@dataclass(frozen=True)
class RawSeries:
    """One variable for one unit, as ``(month, value)`` pairs in time order."""

    unit_id: str
    variable: str
    months: tuple[MonthIndex, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.variable:
            raise ValueError("variable name must be non-empty")
        months = tuple(self.months)
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or len(values) != len(months):
            raise ValueError("months and values must have equal length")
        for a, b in zip(months, months[1:]):
            if not a < b:
                raise ValueError(f"{self.unit_id}/{self.variable}: timestamps not strictly increasing at {b}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.unit_id}/{self.variable}: non-finite observation")
        if self.variable == "cpi" and np.any(values <= 0):
            raise ValueError(f"{self.unit_id}: CPI must be strictly positive")
        values.setflags(write=False)
        object.__setattr__(self, "months", months)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.months)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RawSeries):
            return NotImplemented
        return (
            self.unit_id == other.unit_id
            and self.variable == other.variable
            and self.months == other.months
            and np.array_equal(self.values, other.values)
        )

    def as_dict(self) -> dict[MonthIndex, float]:
        return dict(zip(self.months, self.values.tolist()))


@dataclass(frozen=True)
class Panel:
    """N units by T months. Missing cells are flagged in ``missing`` and hold NaN."""

    units: tuple[str, ...]
    time_axis: tuple[MonthIndex, ...]
    values: np.ndarray = field(repr=False)
    missing: np.ndarray = field(repr=False)
    variable: str = "value"

    def __post_init__(self):
        units = tuple(self.units)
        axis = tuple(self.time_axis)
        if len(set(units)) != len(units):
            raise PanelError("unit ids must be unique")
        values = np.array(self.values, dtype=float)
        missing = np.array(self.missing, dtype=bool)
        if values.shape != (len(units), len(axis)) or missing.shape != values.shape:
            raise PanelError("values must be an N x T matrix matching units and time axis")
        for a, b in zip(axis, axis[1:]):
            if b.ordinal - a.ordinal != 1:
                raise PanelError(f"time axis must be consecutive months ({a} -> {b})")
        values[missing] = np.nan
        if not np.all(np.isfinite(values[~missing])):
            raise PanelError("non-finite value in an observed cell")
        values.setflags(write=False)
        missing.setflags(write=False)
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "time_axis", axis)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @classmethod
    def from_array(
        cls,
        values,
        units: Sequence[str] | None = None,
        start: MonthIndex = MonthIndex(2000, 1),
        variable: str = "value",
    ) -> "Panel":
        """Build a panel from an ``N x T`` array; NaN cells become missing."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise PanelError("expected an N x T array")
        n, t = values.shape
        if units is None:
            units = [f"U{i + 1:02d}" for i in range(n)]
        axis = tuple(start.shift(k) for k in range(t))
        return cls(tuple(units), axis, values, np.isnan(values), variable)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_periods(self) -> int:
        return len(self.time_axis)

    @property
    def balanced(self) -> bool:
        return not bool(self.missing.any())

    def missing_cells(self) -> list[tuple[str, MonthIndex]]:
        rows, cols = np.nonzero(self.missing)
        return [(self.units[i], self.time_axis[j]) for i, j in zip(rows, cols)]

    def row(self, unit: str) -> np.ndarray:
        return self.values[self.units.index(unit)]

    def select(self, units: Sequence[str]) -> "Panel":
        idx = [self.units.index(u) for u in units]
        return Panel(tuple(units), self.time_axis, self.values[idx], self.missing[idx], self.variable)

    def with_values(self, values, variable: str | None = None) -> "Panel":
        values = np.asarray(values, dtype=float)
        return Panel(self.units, self.time_axis, values, self.missing | np.isnan(values),
                     variable or self.variable)

    def unit_span(self, unit: str) -> tuple[int, int]:
        """Index range ``[first, last]`` of observed cells for ``unit``."""
        obs = np.flatnonzero(~self.missing[self.units.index(unit)])
        if obs.size == 0:
            raise PanelError(f"unit {unit} has no observations")
        return int(obs[0]), int(obs[-1])

    def unit_values(self, unit: str) -> np.ndarray:
        """Contiguous observed stretch of one unit; interior gaps are an error."""
        first, last = self.unit_span(unit)
        i = self.units.index(unit)
        if self.missing[i, first:last + 1].any():
            gaps = [str(self.time_axis[j]) for j in range(first, last + 1) if self.missing[i, j]]
            raise PanelError(f"unit {unit} has interior missing months: {', '.join(gaps)}")
        return np.array(self.values[i, first:last + 1])

    def to_series(self) -> list[RawSeries]:
        out = []
        for i, unit in enumerate(self.units):
            obs = ~self.missing[i]
            months = tuple(m for m, ok in zip(self.time_axis, obs) if ok)
            out.append(RawSeries(unit, self.variable, months, self.values[i, obs]))
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Panel):
            return NotImplemented
        return (
            self.units == other.units
            and self.time_axis == other.time_axis
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def load_csv(path, schema: Mapping[str, str] | None = None) -> list[RawSeries]:
    """Read a long-format CSV into one :class:`RawSeries` per (country, variable).

    Parameters
    ----------
    path : path-like
        UTF-8, comma separated, header required.
    schema : mapping, optional
        Maps the canonical names ``date``, ``country``, ``variable`` and
        ``value`` to the column names used in the file.

    Returns
    -------
    list of RawSeries
        In order of first appearance in the file, rows sorted by date.
    """
    schema = {c: c for c in CSV_COLUMNS} | dict(schema or {})
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"{path}: file not found")

    records: dict[tuple[str, str], dict[MonthIndex, tuple[float, int]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        absent = [schema[c] for c in CSV_COLUMNS if schema[c] not in header]
        if absent:
            raise IngestionError(f"{path}: missing column(s) {', '.join(absent)}")
        for row in reader:
            lineno = reader.line_num
            try:
                month = MonthIndex.parse(row[schema["date"]])
            except ValueError as exc:
                raise IngestionError(f"row {lineno}: {exc}") from None
            country = row[schema["country"]].strip()
            variable = row[schema["variable"]].strip()
            if not country:
                raise IngestionError(f"row {lineno}: empty country code")
            if variable not in INPUT_VARIABLES:
                raise IngestionError(f"row {lineno}: unknown variable {variable!r}")
            try:
                value = float(row[schema["value"]])
            except (TypeError, ValueError):
                raise IngestionError(f"row {lineno}: non-numeric value {row[schema['value']]!r}") from None
            if not math.isfinite(value):
                raise IngestionError(f"row {lineno}: non-finite value")
            cells = records.setdefault((country, variable), {})
            if month in cells:
                raise IngestionError(
                    f"rows {cells[month][1]} and {lineno}: duplicate entry for "
                    f"({country}, {variable}, {month})"
                )
            cells[month] = (value, lineno)

    out = []
    for (country, variable), cells in records.items():
        months = sorted(cells)
        try:
            out.append(RawSeries(country, variable, tuple(months),
                                 np.array([cells[m][0] for m in months])))
        except ValueError as exc:
            raise IngestionError(str(exc)) from None
    return out


def dump_csv(series: Iterable[RawSeries], path) -> None:
    """Write series in the input CSV layout; values use ``repr`` so reloading is exact."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in series:
            for m, v in zip(s.months, s.values.tolist()):
                writer.writerow([str(m), s.unit_id, s.variable, repr(v)])


def align_panel(
    series: Sequence[RawSeries],
    variable: str,
    window: tuple[MonthIndex, MonthIndex] | None = None,
) -> Panel:
    """Arrange the series of one variable on a shared monthly axis.

    The axis runs over every month from the earliest to the latest observation
    (clipped to ``window``), so months absent from a unit become missing cells.
    Unit order follows the input order.
    """
    chosen = [s for s in series if s.variable == variable]
    if len(chosen) < 2:
        raise PanelError(f"need at least 2 series of {variable!r}, got {len(chosen)}")
    units = [s.unit_id for s in chosen]
    if len(set(units)) != len(units):
        raise PanelError(f"duplicate unit ids among {variable!r} series")

    lo, hi = None, None
    for s in chosen:
        months = s.months
        if window is not None:
            months = tuple(m for m in months if window[0] <= m <= window[1])
        if not months:
            raise PanelError(f"unit {s.unit_id} has no observations inside the window")
        lo = months[0] if lo is None else min(lo, months[0])
        hi = months[-1] if hi is None else max(hi, months[-1])

    axis = month_range(lo, hi)
    values = np.full((len(chosen), len(axis)), np.nan)
    for i, s in enumerate(chosen):
        for m, v in zip(s.months, s.values):
            if lo <= m <= hi:
                values[i, m - lo] = v
    return Panel(tuple(units), axis, values, np.isnan(values), variable)


def require_balanced(panel: Panel) -> Panel:
    """Return ``panel`` untouched when it has no missing cells."""
    if not panel.balanced:
        raise BalanceRequired(panel.missing_cells())
    return panel
