"""Forecast accuracy, interval coverage, outlier tallies and report files."""

from __future__ import annotations

import csv
import datetime as dt
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, fmt
from .errors import ParseError, ZeroActual
from .filter import ForecastRecord

Array = np.ndarray


@dataclass(frozen=True)
class StepRow:
    instant: int
    day: int
    action: str
    ess: float
    ess_ratio: float
    cv: float
    entropy: float
    relative_entropy: float


def steps_from_results(results) -> list:
    rows = []
    for res in results:
        for r in res.steps:
            rep = r.report
            vals = ((rep.ess, rep.ess_ratio, rep.cv, rep.entropy, rep.relative_entropy)
                    if rep is not None else (float("nan"),) * 5)
            rows.append(StepRow(res.instant, r.n, r.action.value, *vals))
    return rows


def forecasts_from_results(results) -> list:
    return [r for res in results for r in res.forecasts]


def mape(predicted, actual) -> float:
    """Mean absolute percentage error, in percent."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if np.any(a == 0):
        raise ZeroActual("MAPE is undefined for a zero actual")
    if a.size == 0:
        return float("nan")
    return float(100.0 * np.mean(np.abs(p - a) / np.abs(a)))


def coverage(lo, hi, values) -> float:
    """Percentage of ``values`` inside the closed intervals ``[lo, hi]``."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return float("nan")
    inside = (np.asarray(lo) <= v) & (v <= np.asarray(hi))
    return float(100.0 * inside.mean())


@dataclass(frozen=True)
class MapeSlice:
    horizon: int
    per_instant: dict
    aggregate: float
    n_pairs: int


def _pairs(records, dataset: Dataset, tau: int, exclude_bank_holidays=False, exclude=frozenset()):
    """Forecast/actual pairs at horizon ``tau`` with a known actual, grouped by instant."""
    out = defaultdict(list)
    for r in records:
        if r.horizon != tau:
            continue
        j = dataset.column(r.instant)
        y = dataset.load[r.target, j]
        if np.isnan(y):
            continue
        if exclude_bank_holidays and dataset.bank_holiday[r.target, j]:
            continue
        if (r.target, r.instant) in exclude:
            continue
        out[r.instant].append((r, y))
    return out


def compute_mape(records, dataset: Dataset, tau: int, exclude_bank_holidays: bool = False,
                 exclude=frozenset()) -> MapeSlice:
    """Per-instant MAPE at horizon ``tau`` and its mean over instants.

    ``exclude`` holds ``(day, instant)`` cells to drop, e.g. outlier days.
    """
    groups = _pairs(records, dataset, tau, exclude_bank_holidays, exclude)
    per = {i: mape([r.state_mean for r, _ in g], [y for _, y in g]) for i, g in sorted(groups.items())}
    agg = float(np.mean(list(per.values()))) if per else float("nan")
    return MapeSlice(tau, per, agg, sum(len(g) for g in groups.values()))


def compute_coverage(records, dataset: Dataset, tau: int, truth: dict | None = None) -> tuple:
    """``(observation coverage, state coverage)`` in percent at horizon ``tau``.

    State coverage needs ``truth``: ``{(day, instant): noise-free load}``; NaN otherwise.
    """
    groups = _pairs(records, dataset, tau)
    pairs = [p for g in groups.values() for p in g]
    obs = coverage([r.obs_lo for r, _ in pairs], [r.obs_hi for r, _ in pairs], [y for _, y in pairs])
    state = float("nan")
    if truth is not None:
        sel = [r for r in records if r.horizon == tau and (r.target, r.instant) in truth]
        state = coverage([r.state_lo for r in sel], [r.state_hi for r in sel],
                         [truth[(r.target, r.instant)] for r in sel])
    return obs, state


def ci_lengths(records, tau: int) -> tuple:
    """Mean ``(state, observation)`` interval lengths at horizon ``tau``."""
    sel = [r for r in records if r.horizon == tau]
    if not sel:
        return float("nan"), float("nan")
    return (float(np.mean([r.state_hi - r.state_lo for r in sel])),
            float(np.mean([r.obs_hi - r.obs_lo for r in sel])))


def outlier_cells(steps) -> set:
    return {(s.day, s.instant) for s in steps if s.action == "OutlierSkipped"}


def outlier_crosstab(steps, dataset: Dataset) -> dict:
    """Assimilation cells classified by bank holiday x outlier (four cells, missing loads skipped)."""
    table = Counter({(bh, out): 0 for bh in (False, True) for out in (False, True)})
    for s in steps:
        if s.action == "Missing":
            continue
        bh = bool(dataset.bank_holiday[s.day, dataset.column(s.instant)])
        table[(bh, s.action == "OutlierSkipped")] += 1
    return dict(table)


@dataclass
class MetricsReport:
    horizons: list
    mape: list
    mape_without_bank_holidays: list
    obs_coverage: list
    state_coverage: list
    state_ci_length: list
    obs_ci_length: list
    outliers_by_instant: dict
    outliers_by_date: dict
    crosstab: dict
    steps: list = field(default_factory=list)
    instants: tuple = ()
    dates: list = field(default_factory=list)
    level: float = 0.9


def build_report(records, steps, dataset: Dataset, tau_max: int = 5, level: float = 0.9,
                 truth: dict | None = None, exclude_outliers: bool = False) -> MetricsReport:
    exclude = outlier_cells(steps) if exclude_outliers else frozenset()
    horizons = list(range(1, tau_max + 1))
    cov = [compute_coverage(records, dataset, t, truth) for t in horizons]
    lens = [ci_lengths(records, t) for t in horizons]
    by_instant = {i: 0 for i in dataset.instants}
    by_date = Counter()
    for s in steps:
        if s.action == "OutlierSkipped":
            by_instant[s.instant] += 1
            by_date[s.day] += 1
    return MetricsReport(
        horizons=horizons,
        mape=[compute_mape(records, dataset, t, False, exclude) for t in horizons],
        mape_without_bank_holidays=[compute_mape(records, dataset, t, True, exclude) for t in horizons],
        obs_coverage=[c[0] for c in cov],
        state_coverage=[c[1] for c in cov],
        state_ci_length=[x[0] for x in lens],
        obs_ci_length=[x[1] for x in lens],
        outliers_by_instant=by_instant,
        outliers_by_date=dict(sorted(by_date.items())),
        crosstab=outlier_crosstab(steps, dataset),
        steps=list(steps),
        instants=tuple(dataset.instants),
        dates=list(dataset.dates),
        level=level,
    )


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_reports(report: MetricsReport, out_dir) -> list:
    """Write the CSV tables and ``summary.txt``; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    p = lambda name: os.path.join(out_dir, name)  # noqa: E731
    files = []

    rows = [(i, s.horizon, fmt(s.per_instant[i]), fmt(b.per_instant.get(i, float("nan"))))
            for s, b in zip(report.mape, report.mape_without_bank_holidays) for i in sorted(s.per_instant)]
    _write(p("mape_per_instant.csv"), ("instant", "horizon", "mape", "mape_without_bank_holidays"), rows)

    rows = [(t, fmt(m.aggregate), fmt(b.aggregate), m.n_pairs, fmt(oc), fmt(sc), fmt(sl), fmt(ol))
            for t, m, b, oc, sc, sl, ol in zip(report.horizons, report.mape, report.mape_without_bank_holidays,
                                               report.obs_coverage, report.state_coverage,
                                               report.state_ci_length, report.obs_ci_length)
            if m.n_pairs > 0]
    _write(p("horizon_sweep.csv"), ("horizon", "mape", "mape_without_bank_holidays", "pairs",
                                    "obs_coverage", "state_coverage", "state_ci_length", "obs_ci_length"), rows)

    _write(p("outliers_by_instant.csv"), ("instant", "outliers"),
           [(i, c) for i, c in sorted(report.outliers_by_instant.items()) if report.steps])
    _write(p("outlier_calendar.csv"), ("date", "outliers"),
           [(report.dates[d].isoformat(), c) for d, c in report.outliers_by_date.items()])
    _write(p("outlier_crosstab.csv"), ("bank_holiday", "outlier", "count"),
           [(int(bh), int(o), report.crosstab[(bh, o)]) for bh in (False, True) for o in (False, True)]
           if report.steps else [])
    _write(p("degeneracy.csv"), ("instant", "date", "action", "ess_ratio", "relative_entropy", "cv", "outlier"),
           [(s.instant, report.dates[s.day].isoformat(), s.action, fmt(s.ess_ratio), fmt(s.relative_entropy),
             fmt(s.cv), int(s.action == "OutlierSkipped")) for s in report.steps])
    files += [p(n) for n in ("mape_per_instant.csv", "horizon_sweep.csv", "outliers_by_instant.csv",
                             "outlier_calendar.csv", "outlier_crosstab.csv", "degeneracy.csv")]

    lines = [f"instants: {len(report.instants)}", f"interval level: {report.level}"]
    for t, m, b, oc in zip(report.horizons, report.mape, report.mape_without_bank_holidays, report.obs_coverage):
        if m.n_pairs:
            lines.append(f"horizon {t}: MAPE {m.aggregate:.4f}% (without bank holidays {b.aggregate:.4f}%), "
                         f"observation coverage {oc:.3f}%")
    lines.append(f"outliers: {sum(report.outliers_by_instant.values())}")
    with open(p("summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    files.append(p("summary.txt"))
    return files


def _day_index(dataset: Dataset):
    return {d: n for n, d in enumerate(dataset.dates)}


def read_forecasts(path, dataset: Dataset) -> list:
    idx = _day_index(dataset)
    out = []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.DictReader(fh), start=2):
            try:
                issue = idx[dt.date.fromisoformat(row["issue_date"])]
                target = idx[dt.date.fromisoformat(row["target_date"])]
                f = {k: float(row[k]) for k in ("mean", "state_lo", "state_hi", "obs_lo", "obs_hi")}
                out.append(ForecastRecord(issue, int(row["horizon"]), f["mean"], f["state_lo"], f["state_hi"],
                                          f["obs_lo"], f["obs_hi"], instant=int(row["instant"]), target=target))
            except (KeyError, ValueError) as err:
                raise ParseError(f"bad forecast row: {err}", row_no, None) from None
    return out


def read_steps(path, dataset: Dataset) -> list:
    idx = _day_index(dataset)
    out = []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.DictReader(fh), start=2):
            try:
                nums = [float(row[k]) if row[k] else float("nan")
                        for k in ("ess", "ess_ratio", "cv", "entropy", "relative_entropy")]
                out.append(StepRow(int(row["instant"]), idx[dt.date.fromisoformat(row["date"])],
                                   row["action"], *nums))
            except (KeyError, ValueError) as err:
                raise ParseError(f"bad step row: {err}", row_no, None) from None
    return out
