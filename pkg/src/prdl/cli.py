"""Command-line entry point.

Subcommands:
  run         execute an experiment described by a TOML config
  gen         draw a seeded synthetic scenario and save it as .npz
  bounds      print the penalty upper bounds and coupling weight for a scenario
  complexity  print per-iteration flop estimates for a solver on a scenario
  report      render figures from a finished experiment directory
"""

from __future__ import annotations

import argparse
import json
import sys

from prdl import harness, scenario, tuning
from prdl.harness import ExperimentConfig


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="prdl",
        description="Joint phase retrieval and dictionary learning from "
        "magnitude-only measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a TOML config")
    p_run.add_argument("config", help="path to a flat TOML config file")
    p_run.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_run.add_argument("--output-dir", help="output directory (overrides config)")
    p_run.add_argument("--n-trials", type=int, help="number of Monte-Carlo trials")
    p_run.add_argument("--n-inits", type=int, help="initializations per trial")
    p_run.add_argument("--workers", type=int, help="concurrent trial workers")

    p_gen = sub.add_parser("gen", help="generate a synthetic scenario")
    p_gen.add_argument("case", type=int, choices=(1, 2, 3))
    p_gen.add_argument("--N", type=int, required=True, help="signal dimension")
    p_gen.add_argument("--P", type=int, required=True, help="number of atoms")
    p_gen.add_argument("--I", type=int, required=True, help="number of snapshots")
    p_gen.add_argument("--M1", type=int, required=True, help="spatial measurements")
    p_gen.add_argument("--L", type=int, required=True, help="nonzeros per column")
    p_gen.add_argument("--snr-db", type=float, default=15.0)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("-o", "--output", required=True, help="output .npz path")

    p_bounds = sub.add_parser(
        "bounds", help="print penalty upper bounds for a saved scenario"
    )
    p_bounds.add_argument("scenario", help="path to a scenario .npz")

    p_cx = sub.add_parser(
        "complexity", help="per-iteration flop estimates on a saved scenario"
    )
    p_cx.add_argument("solver", choices=harness.SOLVERS)
    p_cx.add_argument("scenario", help="path to a scenario .npz")

    p_rep = sub.add_parser("report", help="render figures from experiment output")
    p_rep.add_argument("output_dir")
    p_rep.add_argument("--format", default="png", help="image format (default png)")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)

    if args.command == "run":
        config = ExperimentConfig.from_toml(
            args.config,
            seed=args.seed,
            output_dir=args.output_dir,
            n_trials=args.n_trials,
            n_inits=args.n_inits,
            workers=args.workers,
        )
        summary = harness.run_experiment(config)
        json.dump(summary["results"], sys.stdout, indent=2, sort_keys=True)
        print()
        return 0

    if args.command == "gen":
        scn = scenario.generate(
            args.case, args.N, args.P, args.I, args.M1, args.L,
            args.snr_db, args.seed,
        )
        scenario.save(scn, args.output)
        print(f"wrote {args.output}")
        return 0

    if args.command == "bounds":
        scn = scenario.load(args.scenario)
        inst = scn.inst
        mu = tuning.mu_default(inst)
        from prdl.harness import _with_penalties

        print(f"lambda_max = {tuning.lambda_max(inst):.9g}")
        print(f"mu_default = {mu:.9g}")
        print(f"rho_max    = {tuning.rho_max(_with_penalties(inst, mu=mu)):.9g}")
        return 0

    if args.command == "complexity":
        scn = scenario.load(args.scenario)
        parts = harness.estimate_complexity(args.solver, scn.inst)
        for key in ("gradient", "hessian", "line_search", "operator", "total"):
            print(f"{key:12s} {parts[key]:d}")
        return 0

    if args.command == "report":
        from prdl import report

        created = report.render(args.output_dir, fmt=args.format)
        for path in created:
            print(f"wrote {path}")
        return 0

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
