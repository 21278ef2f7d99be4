"""Ingestion of ECDC-style daily case/death feeds into validated series."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError, SchemaError

MAX_GAP_DAYS = 30
SERIES_COLUMNS = ("day_index", "date", "new_cases", "new_deaths", "cum_cases", "cum_deaths")


@dataclass(frozen=True)
class ColumnMap:
    """Names of the CSV columns holding each field (ECDC defaults)."""

    date: str = "dateRep"
    cases: str = "cases"
    deaths: str = "deaths"
    region: str | None = "geoId"


#: Column map for the series CSV this package writes.
SERIES_SCHEMA = ColumnMap(date="date", cases="new_cases", deaths="new_deaths", region=None)


@dataclass(frozen=True)
class RawRecord:
    date: date
    new_cases: int
    new_deaths: int
    region_id: str = ""


@dataclass(frozen=True, eq=False)
class EpidemicSeries:
    """Daily new and cumulative counts indexed by day t = 1..T.

    Arrays are zero-based: ``c[0]`` is day 1.
    """

    c: np.ndarray
    d: np.ndarray
    origin_date: date
    C: np.ndarray = field(init=False)
    D: np.ndarray = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.int64)
        d = np.asarray(self.d, dtype=np.int64)
        if c.shape != d.shape or c.ndim != 1:
            raise DataError("cases and deaths must be 1-d arrays of equal length")
        if len(c) < 3:
            raise DataError(f"series needs at least 3 days, got {len(c)}")
        if (c < 0).any() or (d < 0).any():
            raise DataError("daily counts must be nonnegative")
        for name, arr in (("c", c), ("d", d), ("C", np.cumsum(c)), ("D", np.cumsum(d))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return len(self.c)

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.T + 1)

    @property
    def dates(self) -> list[date]:
        return [self.origin_date + timedelta(days=i) for i in range(self.T)]

    def date_of(self, day: int) -> date:
        return self.origin_date + timedelta(days=int(day) - 1)

    def truncate(self, t_max: int) -> "EpidemicSeries":
        """Days 1..t_max."""
        if not 3 <= t_max <= self.T:
            raise DataError(f"t_max={t_max} outside 3..{self.T}")
        return EpidemicSeries(self.c[:t_max], self.d[:t_max], self.origin_date)

    def window(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """New cases and deaths for days start..stop inclusive."""
        if start < 1 or stop > self.T or start > stop:
            raise DataError(f"window {start}..{stop} outside 1..{self.T}")
        return self.c[start - 1 : stop], self.d[start - 1 : stop]


def parse_date(text: str) -> date:
    """dd/mm/yyyy (ECDC), falling back to ISO-8601."""
    text = text.strip()
    try:
        return datetime.strptime(text, "%d/%m/%Y").date()
    except ValueError:
        return date.fromisoformat(text)


def _parse_int(text: str) -> int:
    text = text.strip()
    if text == "":
        return 0
    value = float(text)
    if value != int(value):
        raise ValueError(f"non-integer count {text!r}")
    return int(value)


def parse_csv(
    text: str | io.TextIOBase,
    schema: ColumnMap | None = None,
    region: str | None = None,
) -> list[RawRecord]:
    """Parse a daily feed into records for one region, sorted by date.

    ``region=None`` keeps every row (single-region files).
    """
    schema = schema or ColumnMap()
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        return []
    header = [h.strip().lstrip("﻿") for h in reader.fieldnames]
    reader.fieldnames = header
    needed = [schema.date, schema.cases, schema.deaths]
    if region is not None:
        if schema.region is None:
            raise ConfigError("region filter requested but schema has no region column")
        needed.append(schema.region)
    missing = [col for col in needed if col not in header]
    if missing:
        raise SchemaError(f"missing column(s) {missing}; header is {header}")

    records = []
    for lineno, row in enumerate(reader, start=2):
        reg = row.get(schema.region, "") if schema.region else ""
        reg = (reg or "").strip()
        if region is not None and reg != region:
            continue
        try:
            day = parse_date(row[schema.date])
        except (ValueError, TypeError) as exc:
            raise ParseError(f"row {lineno}: bad date {row[schema.date]!r}") from exc
        try:
            cases = _parse_int(row[schema.cases])
            deaths = _parse_int(row[schema.deaths])
        except (ValueError, TypeError) as exc:
            raise ParseError(f"row {lineno}: {exc}") from exc
        records.append(RawRecord(day, cases, deaths, reg))
    records.sort(key=lambda r: r.date)
    return records


def trim_to_first_case(records: Sequence[RawRecord]) -> list[RawRecord]:
    """Drop leading records before the first day with a positive case count."""
    for i, rec in enumerate(records):
        if rec.new_cases > 0:
            return list(records[i:])
    return []


def build_series(
    records: Sequence[RawRecord], negative_policy: str = "error"
) -> EpidemicSeries:
    """Contiguous daily series from date-sorted records.

    Missing calendar days are zero-filled; runs of more than 30 missing days
    are rejected. Duplicate dates are summed.
    """
    if negative_policy not in ("error", "clamp_zero"):
        raise ConfigError(f"unknown negative_policy {negative_policy!r}")
    if len(records) < 3:
        raise DataError(f"need at least 3 records, got {len(records)}")
    records = sorted(records, key=lambda r: r.date)
    origin = records[0].date
    T = (records[-1].date - origin).days + 1
    c = np.zeros(T, dtype=np.int64)
    d = np.zeros(T, dtype=np.int64)
    seen = np.zeros(T, dtype=bool)
    for rec in records:
        i = (rec.date - origin).days
        cases, deaths = rec.new_cases, rec.new_deaths
        if cases < 0 or deaths < 0:
            if negative_policy == "error":
                raise DataError(f"negative count on {rec.date.isoformat()}")
            cases, deaths = max(cases, 0), max(deaths, 0)
        c[i] += cases
        d[i] += deaths
        seen[i] = True

    gap = 0
    for i in range(T):
        gap = 0 if seen[i] else gap + 1
        if gap > MAX_GAP_DAYS:
            start = origin + timedelta(days=i - gap + 1)
            raise DataError(f"more than {MAX_GAP_DAYS} consecutive missing days from {start}")
    if c[0] <= 0:
        raise DataError("first day must have a positive case count (conditioning observation)")
    return EpidemicSeries(c, d, origin)


def moving_average(x: Iterable[float], window: int) -> np.ndarray:
    """Centered moving average; near the ends the window is truncated to the
    available observations, so output length equals input length."""
    x = np.asarray(x, dtype=float)
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"window must be a positive odd integer, got {window}")
    if window > len(x):
        raise ConfigError(f"window {window} longer than series ({len(x)})")
    h = window // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(len(x))
    lo = np.maximum(idx - h, 0)
    hi = np.minimum(idx + h + 1, len(x))
    return (csum[hi] - csum[lo]) / (hi - lo)


def series_to_csv(series: EpidemicSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SERIES_COLUMNS)
    for i, day in enumerate(series.dates):
        writer.writerow(
            [i + 1, day.isoformat(), series.c[i], series.d[i], series.C[i], series.D[i]]
        )
    return buf.getvalue()


def read_series_csv(text: str) -> EpidemicSeries:
    """Inverse of :func:`series_to_csv`."""
    return build_series(parse_csv(text, SERIES_SCHEMA))


def load_series(
    path,
    schema: ColumnMap | None = None,
    region: str | None = None,
    negative_policy: str = "error",
    start: date | None = None,
    end: date | None = None,
) -> EpidemicSeries:
    """Read a feed file; the series starts at ``start`` or the first case."""
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    header = text.split("\n", 1)[0]
    if schema is None and "day_index" in header and "new_cases" in header:
        schema = SERIES_SCHEMA
    schema = schema or ColumnMap()
    records = parse_csv(text, schema, region if schema.region else None)
    if start is not None:
        records = [r for r in records if r.date >= start]
    else:
        records = trim_to_first_case(records)
    if end is not None:
        records = [r for r in records if r.date <= end]
    return build_series(records, negative_policy)
