"""Command-line entry point.

Usage::

    wpdgmres [run] --config sweep.ini [--strict] [--out DIR] [--seed N] [--threads N]
    wpdgmres inspect-pencil --config sweep.ini [--top 200]

Exit status: 0 success, 2 some run did not converge, 3 bound violation
with --strict, 4 configuration error.
"""
import argparse
import logging
import sys

from .errors import ConfigurationError, WpdError
from .experiment import emit_plots, inspect_pencil, load_config, run_experiment

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_BOUND_VIOLATION = 3
EXIT_CONFIG = 4


def build_parser():
    p = argparse.ArgumentParser(prog="wpdgmres", description=__doc__.split("\n")[0])
    p.add_argument("command", nargs="?", default="run", choices=("run", "inspect-pencil"))
    p.add_argument("--config", help="INI experiment file (defaults apply when omitted)")
    p.add_argument("--strict", action="store_true", help="exit with 3 on any bound violation")
    p.add_argument("--out", help="output directory (overrides [run] output_dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    p.add_argument("--threads", type=int, help="worker threads for independent runs")
    p.add_argument("--top", type=int, default=200, help="eigenvalues listed by inspect-pencil")
    p.add_argument("--no-plots", action="store_true", help="skip plot script generation")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {}
    if args.out is not None:
        overrides[("run", "output_dir")] = args.out
    if args.seed is not None:
        overrides[("run", "seed")] = args.seed
    if args.threads is not None:
        overrides[("run", "threads")] = args.threads
    try:
        cfg = load_config(args.config, overrides=overrides)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "inspect-pencil":
            for eta, mags in inspect_pencil(cfg, top=args.top):
                print(f"eta = {eta:g}: {len(mags)} eigenvalues, |mu_1| = {mags[0] if len(mags) else 0:.6g}")
            return EXIT_OK
        records = run_experiment(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WpdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    if not args.no_plots:
        emit_plots(records, cfg.output_dir)
    print(f"{'eta':>6} {'H':>22} {'weight':>15} {'m':>4} {'iter':>5} "
          f"{'theta_th':>10} {'theta_exp':>10} {'bound':>6}")
    for r in records:
        bound = "-" if r.bound is None else ("ok" if r.bound.passed else "FAIL")
        print(f"{r.eta:>6g} {r.preconditioner:>22} {r.weight:>15} {r.m:>4d} "
              f"{r.report.iterations:>5d} {r.theta_th:>10.3e} {r.report.theta_exp:>10.3e} {bound:>6}")
    violated = [r for r in records if not r.bound_satisfied]
    failed = [r for r in records if not r.report.converged]
    for r in violated:
        print(f"bound violation: {r.group} m={r.m}", file=sys.stderr)
    if args.strict and violated:
        return EXIT_BOUND_VIOLATION
    if failed:
        print(f"{len(failed)} run(s) did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
