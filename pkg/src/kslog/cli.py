"""Command line entry point: ``kslog {admissible,run,sweep,verify}``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import config as config_mod
from .diagnostics import fmt
from .harness import InadmissibleParameters, run_experiment, sweep, verify_artifacts, write_sweep
from .params import DomainError, ModelParams, admissibility, b_minus, b_plus, chi_threshold_global
from .solver import SolverAbort

EXIT_OK = 0
EXIT_CHECKS = 1
EXIT_USAGE = 2
EXIT_INADMISSIBLE = 3
EXIT_ABORT = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(x: bool) -> str:
    return "true" if x else "false"


def cmd_admissible(args) -> int:
    if not args.a > 0 or not args.chi > 0 or (args.b is not None and not args.b > 0):
        print("error: chi, a and b must be positive", file=sys.stderr)
        return EXIT_USAGE
    print(f"b_plus = {fmt(b_plus(args.a, args.chi))}")
    print(f"b_minus = {fmt(b_minus(args.a, args.chi))}")
    if args.b is None:
        print("discriminant = n/a")
        print("coercivity = n/a")
        print(f"admissible_b_range = ({fmt(b_plus(args.a, args.chi))}, inf)")
    else:
        rep = admissibility(ModelParams(args.chi, args.a, args.b))
        print(f"discriminant = {fmt(rep.discriminant)}")
        print(f"coercivity = {fmt(rep.coercivity)}")
        print(f"admissible = {_bool(rep.admissible)}")
        if rep.frontier:
            print("frontier = true")
    for n in (2, 3, 4):
        thr = chi_threshold_global(n)
        side = "below" if args.chi <= thr else "above"
        ratio = args.chi / thr if math.isfinite(thr) else 0.0
        print(f"threshold_n{n} = {fmt(thr)} chi_{side} ratio = {fmt(ratio)}")
    return EXIT_OK


def _load(path) -> config_mod.ExperimentConfig:
    return config_mod.load(path)


def cmd_run(args) -> int:
    cfg = _load(args.config)
    outdir = Path(args.out) if args.out else None
    try:
        _, rows, summary = run_experiment(cfg, force=args.force, outdir=outdir)
    except InadmissibleParameters as exc:
        print(f"refusing to run: {exc} (use --force to override)", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except SolverAbort as exc:
        print(f"solver aborted at t = {fmt(exc.t)}: {exc}", file=sys.stderr)
        return EXIT_ABORT
    for line in summary.lines():
        print(line)
    return EXIT_CHECKS if summary.checks_failed else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    outdir = Path(args.out or cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = sweep(cfg, force=args.force, outdir=outdir, workers=args.workers)
    write_sweep(outdir / "sweep.csv", cfg, rows)
    print(f"wrote {len(rows)} rows to {outdir / 'sweep.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    rows = verify_artifacts(Path(args.dir))
    failed = [r for r in rows if not r.passed]
    print(f"checks = {len(rows)} failed = {len(failed)}")
    for r in failed[:20]:
        print(f"FAIL {r.check} {r.phi_id} {r.psi_id} slack = {fmt(r.slack)}")
    return EXIT_CHECKS if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kslog", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("admissible", help="report admissibility of (chi, a, b)")
    p.add_argument("--chi", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float)
    p.set_defaults(func=cmd_admissible)

    for name, func, help_ in (("run", cmd_run, "simulate one configuration"),
                              ("sweep", cmd_sweep, "run a k or chi sweep")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--force", action="store_true", help="run inadmissible parameters anyway")
        if name == "sweep":
            p.add_argument("--workers", type=int, help="worker processes (default KSLG_THREADS or cpu count)")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="rerun weak-form checks on an output directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (config_mod.ConfigError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
