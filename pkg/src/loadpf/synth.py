"""Synthetic datasets drawn from the load model with known parameters."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import loadmodel as lm
from .data import Dataset, fmt

Array = np.ndarray

HOLIDAYS = ((1, 1), (5, 1), (5, 8), (7, 14), (8, 15), (11, 1), (11, 11), (12, 25))
WEEKDAY_TYPE = (0, 1, 1, 1, 2, 3, 4)  # Mon, Tue-Thu, Fri, Sat, Sun
HOLIDAY, BEFORE_HOLIDAY, AFTER_HOLIDAY, SUMMER_BREAK = 5, 6, 7, 8
KAPPA = (1.0, 1.03, 1.01, 0.9, 0.8, 0.78, 0.97, 0.95, 0.88)


def is_bank_holiday(d: dt.date) -> bool:
    return (d.month, d.day) in HOLIDAYS


def daytype_of(d: dt.date) -> int:
    """Nine classes: weekday groups, bank holidays and their neighbours, August weekdays."""
    if is_bank_holiday(d):
        return HOLIDAY
    weekday = d.weekday()
    if weekday < 5:
        if is_bank_holiday(d + dt.timedelta(days=1)):
            return BEFORE_HOLIDAY
        if is_bank_holiday(d - dt.timedelta(days=1)):
            return AFTER_HOLIDAY
        if d.month == 8:
            return SUMMER_BREAK
    return WEEKDAY_TYPE[weekday]


def make_calendar(start: dt.date, n_days: int):
    dates = [start + dt.timedelta(days=k) for k in range(n_days)]
    return dates, np.array([daytype_of(d) for d in dates]), np.array([is_bank_holiday(d) for d in dates])


def temperatures(dates, instants, rng, cool_threshold=20.0):
    """Seasonal heating temperature with AR(1) weather noise and a daily cycle."""
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
    seasonal = 11.0 - 8.0 * np.cos(2 * np.pi * (doy - 20.0) / 365.25)
    noise = np.empty(len(dates))
    noise[0] = 2.5 * rng.standard_normal()
    for k in range(1, len(dates)):
        noise[k] = 0.8 * noise[k - 1] + 1.5 * rng.standard_normal()
    inst = np.asarray(instants, dtype=float)
    daily = 3.0 * np.sin(2 * np.pi * (inst - 18.0) / 48.0)
    t_heat = seasonal[:, None] + noise[:, None] + daily[None, :]
    return t_heat, np.maximum(t_heat - cool_threshold, 0.0)


def instant_truth(instant: int):
    """Ground-truth parameters and day-0 state for one half-hour."""
    shape = 1.0 + 0.25 * np.sin(2 * np.pi * (instant - 12.0) / 48.0)
    params = lm.LoadParams(sigma_s=3.0, sigma_g=0.3, g_cool=400.0, u_heat=14.5,
                           sigma=400.0 * shape, kappa=tuple(lm.enforce_kappa_constraint(np.array(KAPPA))))
    state = lm.LoadDynamicState(s=45000.0 * shape, g_heat=-1200.0 * shape, sigma_s_n=120.0, sigma_g_n=8.0)
    return params, state


@dataclass
class SyntheticRun:
    dataset: Dataset
    states: Array  # (days, instants, 4): s, g_heat, sigma_s_n, sigma_g_n
    signal: Array  # (days, instants) noise-free load
    params: dict


def generate(n_days: int = 730, instants=(0, 12, 24, 36), seed: int = 0,
             start: dt.date = dt.date(2021, 1, 1), missing_rate: float = 0.0) -> SyntheticRun:
    """Draw a dataset from the load model; instant ``i`` uses its own seed stream."""
    instants = tuple(sorted(int(i) for i in instants))
    dates, daytype, bank = make_calendar(start, n_days)
    weather = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(10_000,)))
    t_heat, delta_cool = temperatures(dates, instants, weather)
    I = len(instants)
    load = np.empty((n_days, I))
    states = np.empty((n_days, I, 4))
    sig = np.empty((n_days, I))
    params = {}
    for j, i in enumerate(instants):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        p, s0 = instant_truth(i)
        params[i] = p
        ex = [lm.ExogenousRecord(int(daytype[n]), float(t_heat[n, j]), float(delta_cool[n, j]))
              for n in range(n_days)]
        states[:, j], load[:, j] = lm.synthesize(p, s0, ex, rng)
        kappa = np.asarray(p.kappa)[daytype]
        sig[:, j] = lm.signal(states[:, j, 0], states[:, j, 1], p.g_cool, p.u_heat, kappa,
                              t_heat[:, j], delta_cool[:, j])
        if missing_rate > 0:
            load[rng.random(n_days) < missing_rate, j] = np.nan
    ds = Dataset(dates, instants, load, t_heat, delta_cool,
                 np.repeat(daytype[:, None], I, axis=1), np.repeat(bank[:, None], I, axis=1))
    return SyntheticRun(ds, states, sig, params)


def write_truth(run: SyntheticRun, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "instant", "s", "g_heat", "sigma_s_n", "sigma_g_n", "signal"))
        for n, d in enumerate(run.dataset.dates):
            for j, i in enumerate(run.dataset.instants):
                w.writerow((d.isoformat(), i, *map(fmt, run.states[n, j]), fmt(run.signal[n, j])))


def read_truth(path) -> dict:
    """``{(date, instant): noise-free load}`` from a truth file."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[(dt.date.fromisoformat(row["date"]), int(row["instant"]))] = float(row["signal"])
    return out
