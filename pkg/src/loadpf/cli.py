"""Command-line entry point: ``loadpf {synth,init,forecast,metrics,oracle}``.

Exit status is 0 on success, 2 on invalid input and 1 on any other model error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import config as cfgmod
from . import data, harness, metrics, synth
from .errors import LoadPFError, ValidationError


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    for f in dataclasses.fields(cfgmod.RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="VALUE",
                       help=f"overrides config key {f.name}")


def _run_config(args) -> cfgmod.RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(cfgmod.RunConfig)}
    return cfgmod.load(args.config, overrides)


def _dataset(args):
    return data.ingest(args.data, args.calendar)


def cmd_synth(args) -> int:
    instants = tuple(int(v) for v in args.instants.split(","))
    run = synth.generate(args.days, instants, args.seed, missing_rate=args.missing_rate)
    data.emit(run.dataset, args.out)
    if args.calendar_out:
        data.write_calendar(data.calendar_of(run.dataset), args.calendar_out)
    if args.truth_out:
        synth.write_truth(run, args.truth_out)
    print(f"wrote {run.dataset.n_days} days x {len(instants)} instants to {args.out}")
    return 0


def cmd_init(args) -> int:
    cfg = _run_config(args)
    ds = _dataset(args)
    os.makedirs(args.out_dir, exist_ok=True)
    for i in cfg.instants if cfg.instants is not None else ds.instants:
        ens = harness.initial_ensemble(ds, i, cfg)
        path = os.path.join(args.out_dir, f"cloud_{i:02d}.csv")
        data.write_cloud(ens, path)
        print(f"instant {i}: {ens.M} particles -> {path}")
    return 0


def _load_clouds(cloud_dir, instants) -> dict:
    out = {}
    for i in instants:
        path = os.path.join(cloud_dir, f"cloud_{i:02d}.csv")
        if os.path.exists(path):
            out[i] = data.read_cloud(path)
    return out


def cmd_forecast(args) -> int:
    cfg = _run_config(args)
    ds = _dataset(args)
    instants = cfg.instants if cfg.instants is not None else ds.instants
    initial = _load_clouds(args.clouds, instants) if args.clouds else {}
    results = harness.run_forecast(ds, cfg, initial)
    harness.write_forecasts(results, ds, args.out)
    if args.steps_out:
        harness.write_steps(results, ds, args.steps_out)
    n = sum(len(r.forecasts) for r in results)
    print(f"wrote {n} forecasts for {len(results)} instants to {args.out}")
    return 0


def cmd_metrics(args) -> int:
    ds = _dataset(args)
    records = metrics.read_forecasts(args.forecasts, ds)
    steps = metrics.read_steps(args.steps, ds) if args.steps else []
    truth = None
    if args.truth:
        idx = {d: n for n, d in enumerate(ds.dates)}
        truth = {(idx[d], i): v for (d, i), v in synth.read_truth(args.truth).items() if d in idx}
    report = metrics.build_report(records, steps, ds, args.tau_max, args.level, truth, args.exclude_outliers)
    for path in metrics.emit_reports(report, args.out_dir):
        print(path)
    return 0


def cmd_oracle(args) -> int:
    from .oracle import LocalLevel, kalman_filter
    from . import filter as pf

    model = LocalLevel(q=args.q, r=args.r, m0=0.0, p0=args.p0)
    rates = []
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        _, y = model.simulate(args.steps, rng)
        kf = kalman_filter(model, y)
        fs = pf.run(model, y, [None] * len(y), args.particles, pf.FilterConfig(), rng)
        hit = 0
        for rec in fs.degeneracy_log:
            ess = rec.report.ess if rec.report is not None else args.particles
            bound = 3.0 * np.sqrt(kf.filt_var[rec.n]) / np.sqrt(ess)
            hit += abs(rec.filtered_mean[0] - kf.filt_mean[rec.n]) <= bound
        rates.append(hit / len(y))
        print(f"seed {seed}: {100 * rates[-1]:.1f}% of steps within 3 sd/sqrt(ESS) of the Kalman mean")
    ok = min(rates) >= 0.95
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadpf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset from the load model")
    p.add_argument("--out", required=True)
    p.add_argument("--calendar-out")
    p.add_argument("--truth-out")
    p.add_argument("--days", type=int, default=730)
    p.add_argument("--instants", default="0,12,24,36")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    for name, func, helptext in (("init", cmd_init, "run the MCMC warm-up and write particle clouds"),
                                 ("forecast", cmd_forecast, "filter and forecast every instant")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--data", required=True, nargs="+")
        p.add_argument("--calendar")
        _add_run_flags(p)
        if name == "init":
            p.add_argument("--out-dir", required=True)
        else:
            p.add_argument("--clouds", help="directory of cloud_II.csv initial ensembles")
            p.add_argument("--out", required=True)
            p.add_argument("--steps-out")
        p.set_defaults(func=func)

    p = sub.add_parser("metrics", help="MAPE, coverage and outlier reports")
    p.add_argument("--data", required=True, nargs="+")
    p.add_argument("--calendar")
    p.add_argument("--forecasts", required=True)
    p.add_argument("--steps")
    p.add_argument("--truth")
    p.add_argument("--tau-max", type=int, default=5)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--exclude-outliers", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("oracle", help="cross-check the particle filter against the Kalman filter")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--particles", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--p0", type=float, default=4.0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except LoadPFError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
