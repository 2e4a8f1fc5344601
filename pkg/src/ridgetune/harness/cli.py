"""Command-line entry point: illustrate, simulate, report, fit."""

from __future__ import annotations

import argparse
import logging
import sys

from ..exceptions import RidgeTuneError
from .config import DEFAULT_SEED, GCV_MODES, RunConfig
from .illustrate import DEFAULT_REPS


def _methods(text: str) -> list:
    return [m.strip() for m in text.split(",") if m.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ridgetune", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("illustrate", help="one-covariate example datasets and repeated generator")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="run simulation scenarios")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON run configuration")
    src.add_argument("--scenario", action="append", help="N,K,a,ey,noise (repeatable) or 'all'")
    p.add_argument("--reps", type=int)
    p.add_argument("--full-scale", action="store_true", help="1000 replicates per scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--methods", type=_methods)
    p.add_argument("--gcv-mode", choices=GCV_MODES)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("report", help="aggregate a record store into tables")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--methods", type=_methods)

    p = sub.add_parser("fit", help="fit one method to a CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--outcome", required=True)
    p.add_argument("--method", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--prior-or", type=float)
    p.add_argument("--json", dest="json_out")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--gcv-mode", choices=GCV_MODES, default="insample")
    return ap


def _simulate_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_json(args.config)
    else:
        cfg = RunConfig(scenarios=args.scenario)
    overrides = dict(reps=args.reps, master_seed=args.seed, methods=args.methods, gcv_mode=args.gcv_mode,
                     workers=args.workers, out=args.out)
    kw = cfg.to_dict()
    kw.update({k: v for k, v in overrides.items() if v is not None})
    if args.full_scale:
        kw["full_scale"] = True
    return RunConfig(**kw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "illustrate":
            from .illustrate import run_illustrate

            s = run_illustrate(args.seed, args.reps, args.out, args.workers)
            print(f"boundary fraction (D, lambda* = 1e-6): {s['boundary_fraction_D']:.3f} over {s['reps']} reps")
            print(f"separation fraction: {s['separation_fraction']:.3f}")
        elif args.command == "simulate":
            from .simulate import run_simulation

            m = run_simulation(_simulate_config(args), resume=args.resume)
            print(f"stored {len(m['scenarios'])} scenario(s) in {args.out or m['config']['out']}")
        elif args.command == "report":
            from .report import write_report

            for p in write_report(args.in_dir, args.out, args.methods):
                print(p)
        elif args.command == "fit":
            from .fitcmd import run_fit

            _, text, path = run_fit(args.data, args.outcome, args.method, args.lam, args.prior_or,
                                    args.json_out, args.seed, args.gcv_mode)
            print(text)
            print(f"json: {path}")
    except (RidgeTuneError, ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
