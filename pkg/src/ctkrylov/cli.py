"""Command-line experiment runner.

Subcommands:
  run      execute an experiment config (CSV + manifest + image exports)
  compare  tabulate two finished runs side by side
  report   render PNG convergence figures from run manifests
  phantom  export a phantom or sinogram of a built-in problem

Exit codes: 0 success, 1 solver failure, 2 configuration/input errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import ct
from .experiment import (ConfigParseError, compare_runs, default_out_dir,
                         load_manifest, parse_config, run_experiment)


def _cmd_run(args) -> int:
    try:
        config = parse_config(args.config)
    except ConfigParseError as exc:
        print(f"config error in {args.config}: {exc}", file=sys.stderr)
        return 2
    config.out_dir = Path(args.out) if args.out else default_out_dir()
    config.include_timings = args.timings
    try:
        manifests = run_experiment(config, seed=args.seed)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report which solver failed
        print(f"solver failed: {exc}", file=sys.stderr)
        return 1
    for m in manifests:
        print(m)
    return 0


def _cmd_compare(args) -> int:
    try:
        a = load_manifest(args.manifest_a)
        b = load_manifest(args.manifest_b)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(compare_runs(a, b))
    return 0


def _cmd_report(args) -> int:
    try:
        manifests = [load_manifest(p) for p in args.manifests]
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    from .plots import render_report

    out = Path(args.out) if args.out else default_out_dir()
    for path in render_report(manifests, out):
        print(path)
    return 0


def _cmd_phantom(args) -> int:
    if args.name not in ct.BUILTIN_PROBLEMS:
        print(f"unknown problem {args.name!r}; choose from {ct.BUILTIN_PROBLEMS}",
              file=sys.stderr)
        return 2
    prob = ct.build_test_problem(args.name, matched=False, seed=args.seed)
    if args.what == "phantom":
        data, shape = prob.x_true, (prob.grid.ny, prob.grid.nx)
    elif args.what == "sinogram":
        data, shape = prob.b_noisy, (len(prob.geometry.angles), prob.geometry.det_count)
    else:
        data, shape = prob.b_clean, (len(prob.geometry.angles), prob.geometry.det_count)
    out = Path(args.out)
    if out.suffix == ".csv":
        ct.write_csv_image(out, data, shape)
    else:
        ct.write_pgm(out, data, shape)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctkrylov", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the experiment config file")
    p_run.add_argument("--out", help="output directory (default: $CTKRYLOV_OUT or .)")
    p_run.add_argument("--seed", type=int, default=None, help="override the problem seed")
    p_run.add_argument("--timings", action="store_true",
                       help="include wall-clock timings in the CSV (breaks byte-determinism)")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="compare two run manifests")
    p_cmp.add_argument("manifest_a")
    p_cmp.add_argument("manifest_b")
    p_cmp.set_defaults(func=_cmd_compare)

    p_rep = sub.add_parser("report", help="render convergence figures from manifests")
    p_rep.add_argument("manifests", nargs="+", help="one or more run manifests")
    p_rep.add_argument("--out", help="figure output directory")
    p_rep.set_defaults(func=_cmd_report)

    p_ph = sub.add_parser("phantom", help="export a phantom or sinogram")
    p_ph.add_argument("name", help=f"one of {', '.join(ct.BUILTIN_PROBLEMS)}")
    p_ph.add_argument("--out", required=True, help="output file (.pgm or .csv)")
    p_ph.add_argument("--what", choices=("phantom", "sinogram", "sinogram-clean"),
                      default="phantom")
    p_ph.add_argument("--seed", type=int, default=0)
    p_ph.set_defaults(func=_cmd_phantom)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
