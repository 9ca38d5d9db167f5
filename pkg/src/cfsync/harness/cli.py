"""Command-line interface.

Subcommands: crb, ml, cluster, pilots, run <experiment>, audit.  Flags
mirror the experiment-config fields; --config points at a JSON file with
the same keys (flags win on conflict).  CFSYNC_OUTDIR overrides the output
directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .. import clustering, mle, pilots, waveform
from ..geometry import SystemModel
from ..types import InfeasibleError, Scenario
from .experiments import (ExperimentConfig, fig5_noise_power, fig5_setup,
                          run_experiment, _fig5_crb, _fig5_trial_rx)
from .serialize import (audit_files, save_assignment, save_plan, write_rows,
                        write_summary)

SCENARIO_FLAGS = {
    "aps": ("num_aps", int),
    "noise-sigma2": ("noise_sigma2", float),
    "pilot-len": ("pilot_len", int),
    "eta": ("to_bound_chips", int),
    "fmax-norm": ("cfo_bound_norm", float),
    "sinr-min-db": ("sinr_min_db", float),
    "ls": ("overhead_budget", int),
    "swap-iterations": ("swap_iterations", int),
}


def _out_dir(args) -> Path:
    env = os.environ.get("CFSYNC_OUTDIR")
    out = args.out or env or "out"
    return Path(out)


def _scenario_from_args(args, overrides: dict | None = None) -> Scenario:
    fields = dict(overrides or {})
    for flag, (field_name, _cast) in SCENARIO_FLAGS.items():
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            fields[field_name] = value
    fields.setdefault("rng_seed", args.seed)
    fields["rng_seed"] = args.seed if args.seed is not None else fields["rng_seed"]
    return Scenario(**fields)


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    for flag, (_field, cast) in SCENARIO_FLAGS.items():
        parser.add_argument(f"--{flag}", type=cast)
    parser.add_argument("--seed", type=int, default=0)


def cmd_crb(args) -> int:
    scenario = _scenario_from_args(args)
    pilot = scenario.pilot()
    channel, offset, window, _grid = fig5_setup(scenario)
    sigma2 = (args.noise_sigma2 if args.noise_sigma2 is not None
              else fig5_noise_power(pilot, channel, window, args.snr_db))
    report = _fig5_crb(pilot, channel, offset, window, sigma2, scenario,
                       args.contaminated)
    doc = {
        "snr_db": args.snr_db,
        "noise_sigma2": sigma2,
        "contaminated": args.contaminated,
        "crb_to_chips2": report.crb_to_chips,
        "crb_cfo_norm2": report.crb_cfo_norm,
        "crb_to_s2": report.crb_to_chips * scenario.chip_interval_s ** 2,
        "crb_cfo_hz2": report.crb_cfo_norm / scenario.chip_interval_s ** 2,
        "fisher_condition": report.condition_number,
    }
    print(json.dumps(doc, indent=2))
    return 0


def cmd_ml(args) -> int:
    scenario = _scenario_from_args(args)
    pilot = scenario.pilot()
    channel, offset, window, grid = fig5_setup(scenario)
    sigma2 = fig5_noise_power(pilot, channel, window, args.snr_db)
    seq = np.random.SeedSequence([args.seed, 97])
    rng = np.random.default_rng(seq)
    y = _fig5_trial_rx(pilot, channel, offset, window, sigma2, scenario,
                       args.contaminated, rng, seq.spawn(1)[0])
    est = mle.ml_estimate(y, grid, pilot,
                          channel.delay_chips(scenario.chip_interval_s), window)
    doc = {
        "true_to_chips": offset.to_chips,
        "true_cfo_norm": offset.cfo_norm,
        "est_to_chips": est.to_chips_hat,
        "est_cfo_norm": est.cfo_norm_hat,
        "sq_err_to": (est.to_chips_hat - offset.to_chips) ** 2,
        "sq_err_cfo": (est.cfo_norm_hat - offset.cfo_norm) ** 2,
        "objective": est.objective_value,
    }
    print(json.dumps(doc, indent=2))
    return 0


def cmd_cluster(args) -> int:
    scenario = _scenario_from_args(args)
    system = SystemModel.from_scenario(scenario)
    dis = clustering.max_intra_distance(scenario.sinr_min_db, system.pilot,
                                        scenario, system.window)
    plan = clustering.adaptive_clusters(system.locations, dis,
                                        scenario.overhead_budget, args.seed)
    out = _out_dir(args) / "plan.json"
    save_plan(out, plan, system.locations, dis_max_km=dis.dis_max_km,
              budget=scenario.overhead_budget)
    print(f"clusters: {plan.num_clusters}  max distance bound: "
          f"{dis.dis_max_km:.4f} km  -> {out}")
    return 0


def cmd_pilots(args) -> int:
    scenario = _scenario_from_args(args)
    try:
        res = pilots.optimize_all(scenario, args.seed)
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return 2
    out_dir = _out_dir(args)
    system = SystemModel.from_scenario(scenario, args.seed)
    save_plan(out_dir / "plan.json", res.plan, system.locations,
              budget=scenario.overhead_budget)
    save_assignment(out_dir / "assignment.json", res.assignment)
    print(f"clusters: {res.plan.num_clusters}  pilots: {res.assignment.num_pilots}  "
          f"overhead: {res.overhead}/{scenario.overhead_budget}  "
          f"sum_crb: {res.sum_crb:.6e}  -> {out_dir}")
    return 0


def cmd_run(args) -> int:
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
    doc = dict(overrides)
    doc["experiment"] = args.experiment
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.trials is not None:
        doc["num_trials"] = args.trials
    if args.num_seeds is not None:
        doc["num_seeds"] = args.num_seeds
    if args.sweep:
        doc["sweep"] = [float(x) for x in args.sweep.split(",")]
    if args.budgets:
        doc["budgets"] = [int(x) for x in args.budgets.split(",")]
    scen = doc.setdefault("scenario", {})
    for flag, (field_name, _cast) in SCENARIO_FLAGS.items():
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            scen[field_name] = value
    config = ExperimentConfig.from_dict(doc)
    rows = run_experiment(config)
    out_dir = _out_dir(args)
    csv_path = out_dir / f"{config.experiment}.csv"
    write_rows(csv_path, rows)
    write_summary(out_dir / f"{config.experiment}_summary.json",
                  config.experiment, config.seed, config.to_dict(),
                  [str(csv_path)])
    print(f"{len(rows)} rows -> {csv_path}")
    return 0


def cmd_audit(args) -> int:
    report = audit_files(args.plan, args.assignment, budget=args.ls)
    print(report.text())
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfsync",
        description="pilot-burst synchronization experiments for cell-free "
                    "massive MIMO")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("crb", help="bounds for the reference multipath link")
    _add_scenario_flags(p)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--contaminated", action="store_true")
    p.set_defaults(fn=cmd_crb)

    p = sub.add_parser("ml", help="one estimator run on a synthesized burst")
    _add_scenario_flags(p)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--contaminated", action="store_true")
    p.set_defaults(fn=cmd_ml)

    p = sub.add_parser("cluster", help="adaptive cluster classification")
    _add_scenario_flags(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_cluster)

    p = sub.add_parser("pilots", help="joint cluster and pilot-sharing search")
    _add_scenario_flags(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_pilots)

    p = sub.add_parser("run", help="run a figure experiment to CSV")
    p.add_argument("experiment", choices=["fig3", "fig4", "fig5", "fig6", "fig7"])
    _add_scenario_flags(p)
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--trials", type=int)
    p.add_argument("--num-seeds", type=int)
    p.add_argument("--sweep", help="comma-separated sweep values")
    p.add_argument("--budgets", help="comma-separated overhead budgets (fig7)")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("audit", help="re-validate plan/assignment files")
    p.add_argument("--plan", required=True)
    p.add_argument("--assignment", required=True)
    p.add_argument("--ls", type=int, help="overhead budget to check against")
    p.set_defaults(fn=cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
