"""Command-line experiment runner.

Subcommands:

* ``run`` - execute one scenario; emits CSV
  (``scenario,seed,metric,value,threshold,pass``) plus a JSON summary
  next to it.  Exit status is nonzero iff any record fails.
* ``reproduce-paper`` - run the two golden reactor scenarios with their
  published parameters.

Flags may alternatively come from a JSON config file with the same field
names (``--config``); explicit flags override file values.
"""

import argparse
import json
import os
import sys

from .experiments import (ExperimentConfig, SCENARIOS, records_to_csv,
                          records_to_json, run_scenario)
from .linalg import ToleranceConfig

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqgtransfer",
        description="Imitation and transfer learning experiments for "
                    "output-feedback LQG control")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment scenario")
    run_p.add_argument("--config", help="JSON file with the flag values")
    run_p.add_argument("--scenario", choices=SCENARIOS)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--n-sources", type=int, dest="n_sources")
    run_p.add_argument("--t-source", type=int, dest="t_source")
    run_p.add_argument("--t-target", type=int, dest="t_target")
    run_p.add_argument("--out", dest="out")
    run_p.add_argument("--tol-rank", type=float, dest="tol_rank")
    run_p.add_argument("--tol-res", type=float, dest="tol_res")

    rep_p = sub.add_parser("reproduce-paper",
                           help="run the golden reactor scenarios with "
                                "their published parameters")
    rep_p.add_argument("--out", dest="out", default="results")
    rep_p.add_argument("--seed", type=int, default=0)
    return parser


_DEFAULTS = {
    "scenario": None,
    "seed": 0,
    "n_sources": 5,
    "t_source": 11,
    "t_target": 0,
    "out": "results.csv",
    "tol_rank": 1e-9,
    "tol_res": 1e-7,
}


def _merged_options(args) -> dict:
    opts = dict(_DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_opts = json.load(fh)
        unknown = set(file_opts) - set(_DEFAULTS)
        if unknown:
            raise SystemExit(f"unknown config fields: {sorted(unknown)}")
        opts.update(file_opts)
    for key in _DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if not opts["scenario"]:
        raise SystemExit("a scenario is required (flag --scenario or config file)")
    return opts


def _config_from(opts: dict) -> ExperimentConfig:
    return ExperimentConfig(
        scenario=opts["scenario"],
        seed=int(opts["seed"]),
        n_sources=int(opts["n_sources"]),
        t_source=int(opts["t_source"]),
        t_target=int(opts["t_target"]),
        tolerances=ToleranceConfig(rank_tol=float(opts["tol_rank"]),
                                   residual_tol=float(opts["tol_res"])),
        output_path=str(opts["out"]),
    )


def _emit(records, cfg: ExperimentConfig) -> int:
    csv_path = cfg.output_path
    base, ext = os.path.splitext(csv_path)
    if ext.lower() != ".csv":
        csv_path = csv_path + ".csv"
        base = cfg.output_path
    json_path = base + ".json"
    os.makedirs(os.path.dirname(os.path.abspath(csv_path)), exist_ok=True)
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(records_to_csv(records))
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(records_to_json(records, cfg))
    failed = [r for r in records if not r.passed]
    for r in sorted(records, key=lambda r: (r.seed, r.metric)):
        status = "pass" if r.passed else "FAIL"
        print(f"[{status}] {r.scenario} seed={r.seed} {r.metric}: "
              f"{r.value:.6g} (threshold {r.threshold:.6g})")
    print(f"wrote {csv_path} and {json_path}; "
          f"{len(records) - len(failed)}/{len(records)} passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        cfg = _config_from(_merged_options(args))
        return _emit(run_scenario(cfg), cfg)

    # reproduce-paper: the two golden scenarios, published parameters
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    status = 0
    single = ExperimentConfig(scenario="reactor-single", seed=args.seed,
                              n_sources=5, t_source=11,
                              output_path=os.path.join(outdir, "reactor-single"))
    status |= _emit(run_scenario(single), single)
    multi = ExperimentConfig(scenario="reactor-multi", seed=args.seed,
                             n_sources=10, t_source=11,
                             output_path=os.path.join(outdir, "reactor-multi"))
    status |= _emit(run_scenario(multi), multi)
    return status


if __name__ == "__main__":
    sys.exit(main())
