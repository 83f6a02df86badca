"""CSV interchange for observations, calendars and particle clouds.

Observation files have one row per ``(date, instant)``::

    date,instant,load_mw,t_heat_c,delta_cool,daytype,bank_holiday

``load_mw`` may be empty (missing). Calendar files have columns
``date,bank_holiday`` and are authoritative for the bank-holiday flag.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import loadmodel as lm
from .ensemble import WeightedEnsemble, normalize_weights
from .errors import CalendarGap, ParseError, ValidationError

Array = np.ndarray

COLUMNS = ("date", "instant", "load_mw", "t_heat_c", "delta_cool", "daytype", "bank_holiday")
N_INSTANTS = 48


def fmt(x: float) -> str:
    """Shortest exact decimal for a float; empty string for NaN."""
    return "" if np.isnan(x) else repr(float(x))


def _parse_bool(text, row, col):
    t = text.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ParseError(f"not a boolean: {text!r}", row, col)


def _parse_float(text, row, col, allow_missing=False):
    t = text.strip()
    if t == "" or t.lower() == "nan":
        if allow_missing:
            return float("nan")
        raise ParseError("missing value", row, col)
    try:
        v = float(t)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", row, col) from None
    if not np.isfinite(v):
        raise ParseError(f"non-finite value: {text!r}", row, col)
    return v


def _parse_int(text, row, col):
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(f"not an integer: {text!r}", row, col) from None


def _parse_date(text, row, col):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"not an ISO date: {text!r}", row, col) from None


@dataclass
class Dataset:
    """Day-by-instant arrays; row ``n`` is ``dates[n]``, column ``j`` is ``instants[j]``."""

    dates: list
    instants: tuple
    load: Array
    t_heat: Array
    delta_cool: Array
    daytype: Array
    bank_holiday: Array

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def column(self, instant: int) -> int:
        try:
            return self.instants.index(instant)
        except ValueError:
            raise ValidationError(f"instant {instant} not in dataset") from None

    def exogenous(self, day: int, instant: int) -> lm.ExogenousRecord:
        j = self.column(instant)
        return lm.ExogenousRecord(int(self.daytype[day, j]), float(self.t_heat[day, j]),
                                  float(self.delta_cool[day, j]))

    def equals(self, other: "Dataset") -> bool:
        arrays = ("load", "t_heat", "delta_cool", "daytype", "bank_holiday")
        return (self.dates == other.dates and self.instants == other.instants
                and all(np.array_equal(getattr(self, a), getattr(other, a), equal_nan=a == "load")
                        for a in arrays))


def read_calendar(path) -> dict:
    """``{date: bank_holiday}`` from a calendar CSV."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "bank_holiday"} <= set(reader.fieldnames):
            raise ParseError("calendar needs columns date,bank_holiday", 1, None)
        for row_no, row in enumerate(reader, start=2):
            d = _parse_date(row["date"], row_no, "date")
            if d in out:
                raise ParseError(f"duplicate calendar date {d}", row_no, "date")
            out[d] = _parse_bool(row["bank_holiday"], row_no, "bank_holiday")
    return out


def write_calendar(calendar: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "bank_holiday"))
        for d in sorted(calendar):
            w.writerow((d.isoformat(), int(bool(calendar[d]))))


def ingest(paths, calendar_path=None) -> Dataset:
    """Read and validate one or more observation CSVs.

    Raises
    ------
    ParseError
        Malformed cells, duplicate ``(date, instant)`` keys or incomplete days.
    CalendarGap
        A day missing between the first and last date, or absent from the calendar.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    rows = {}
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ParseError(f"missing columns {sorted(missing)} in {path}", 1, None)
            for row_no, row in enumerate(reader, start=2):
                d = _parse_date(row["date"], row_no, "date")
                i = _parse_int(row["instant"], row_no, "instant")
                if not 0 <= i < N_INSTANTS:
                    raise ParseError(f"instant {i} outside 0..47", row_no, "instant")
                if (d, i) in rows:
                    raise ParseError(f"duplicate key ({d}, {i})", row_no, "date")
                daytype = _parse_int(row["daytype"], row_no, "daytype")
                if not 0 <= daytype < lm.N_DAYTYPE:
                    raise ParseError(f"daytype {daytype} outside 0..{lm.N_DAYTYPE - 1}", row_no, "daytype")
                delta = _parse_float(row["delta_cool"], row_no, "delta_cool")
                if delta < 0:
                    raise ParseError("delta_cool must be non-negative", row_no, "delta_cool")
                rows[(d, i)] = (
                    _parse_float(row["load_mw"], row_no, "load_mw", allow_missing=True),
                    _parse_float(row["t_heat_c"], row_no, "t_heat_c"),
                    delta,
                    daytype,
                    _parse_bool(row["bank_holiday"], row_no, "bank_holiday"),
                    row_no,
                )
    if not rows:
        raise ValidationError("no observations")
    dates = sorted({d for d, _ in rows})
    instants = tuple(sorted({i for _, i in rows}))
    for a, b in zip(dates, dates[1:]):
        if (b - a).days != 1:
            raise CalendarGap(f"no rows between {a} and {b}")
    calendar = read_calendar(calendar_path) if calendar_path is not None else None
    if calendar is not None:
        absent = [d for d in dates if d not in calendar]
        if absent:
            raise CalendarGap(f"{len(absent)} dates absent from calendar, first {absent[0]}")
    D, I = len(dates), len(instants)
    load, t_heat, delta = (np.empty((D, I)) for _ in range(3))
    daytype = np.empty((D, I), dtype=np.int64)
    bank = np.empty((D, I), dtype=bool)
    for n, d in enumerate(dates):
        for j, i in enumerate(instants):
            if (d, i) not in rows:
                raise ParseError(f"instant {i} absent on {d}", None, "instant")
            y, th, dc, dtp, bh, _ = rows[(d, i)]
            load[n, j], t_heat[n, j], delta[n, j], daytype[n, j] = y, th, dc, dtp
            bank[n, j] = calendar[d] if calendar is not None else bh
    return Dataset(dates, instants, load, t_heat, delta, daytype, bank)


def emit(dataset: Dataset, path) -> None:
    """Write ``dataset`` in the observation CSV format (round-trips through :func:`ingest`)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for n, d in enumerate(dataset.dates):
            for j, i in enumerate(dataset.instants):
                w.writerow((d.isoformat(), i, fmt(dataset.load[n, j]), fmt(dataset.t_heat[n, j]),
                            fmt(dataset.delta_cool[n, j]), int(dataset.daytype[n, j]),
                            int(dataset.bank_holiday[n, j])))


def calendar_of(dataset: Dataset) -> dict:
    return {d: bool(dataset.bank_holiday[n].any()) for n, d in enumerate(dataset.dates)}


class CausalView:
    """Read access to one instant's series that refuses to look past ``today``."""

    def __init__(self, dataset: Dataset, instant: int):
        self._data = dataset
        self._j = dataset.column(instant)
        self.instant = instant
        self.today = -1

    def advance(self, day: int) -> None:
        if day < self.today:
            raise ValidationError("the causal view cannot move backwards")
        self.today = day

    def load(self, day: int) -> float:
        if day > self.today:
            raise ValidationError(f"load of day {day} requested while at day {self.today}")
        return float(self._data.load[day, self._j])

    def exogenous(self, day: int) -> lm.ExogenousRecord:
        # temperatures and calendar are treated as known in advance
        return self._data.exogenous(day, self.instant)


def write_cloud(ens: WeightedEnsemble, path) -> None:
    """Particle cloud as CSV: the 18 extended-state columns plus ``weight``."""
    if ens.n_x != lm.N_X:
        raise ValidationError(f"cloud has {ens.n_x} columns, expected {lm.N_X}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(lm.STATE_NAMES + ("weight",))
        for x, wt in zip(ens.particles, ens.weights):
            w.writerow([repr(float(v)) for v in x] + [repr(float(wt))])


def read_cloud(path) -> WeightedEnsemble:
    """Load a particle cloud; weights are renormalised and sign constraints checked."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != lm.STATE_NAMES + ("weight",):
            raise ParseError("unexpected particle-cloud header", 1, None)
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields", row_no, None)
            rows.append([_parse_float(v, row_no, c) for v, c in zip(row, header)])
    if len(rows) < 2:
        raise ValidationError("a particle cloud needs at least two particles")
    arr = np.asarray(rows)
    X, w = arr[:, :-1], arr[:, -1]
    for col, (lo, hi) in enumerate(lm.BOUNDS):
        bad = np.flatnonzero(~((X[:, col] > lo) & (X[:, col] < hi)))
        if bad.size:
            raise ParseError(f"{lm.STATE_NAMES[col]} outside its support", int(bad[0]) + 2,
                             lm.STATE_NAMES[col])
    return WeightedEnsemble(X, normalize_weights(w))
