"""Command line interface.

    dampedwave run <config.json | bundled-name> [...] [--out DIR] [--workers N]
    dampedwave verify-constants --dim D
    dampedwave spectral --dim D [--N N] [--cache DIR]
    dampedwave plots <run-dir>
    dampedwave list

Exit codes: 0 success, 1 invalid input, 2 a numerical check failed,
3 blow-up candidate.  ``DAMPEDWAVE_WORKERS`` sets the default number of
parallel runs.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .scenarios import (EXIT_CHECK, EXIT_OK, EXIT_VALIDATION, WORKERS_ENV,
                        bundled_scenarios, run_many)

log = logging.getLogger("dampedwave")


def _cmd_run(args):
    results = run_many(args.configs, out_root=args.out, workers=args.workers)
    for cfg, (code, run_dir) in zip(args.configs, results):
        print(f"{cfg}: exit {code}" + (f" -> {run_dir}" if run_dir else ""))
    return max(code for code, _ in results)


def _cmd_constants(args):
    from .constants import SUPPORTED_DIMS, format_table, verify_constants
    if args.dim not in SUPPORTED_DIMS:
        log.error("--dim must be one of %s", SUPPORTED_DIMS)
        return EXIT_VALIDATION
    rows = verify_constants(args.dim)
    print(format_table(args.dim, rows))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_CHECK


def _cmd_spectral(args):
    from .spectral import NEG_TOL, LinearizedOperator, load_or_build_pack
    from .grid import RadialGrid
    if args.dim < 4:
        log.error("--dim must be at least 4")
        return EXIT_VALIDATION
    pack = load_or_build_pack(args.dim, args.N, cache_dir=args.cache)
    grid = RadialGrid.from_spec(pack.grid_spec)
    n_neg = LinearizedOperator(grid).count_below(-NEG_TOL * pack.kappa**2)
    print(f"D = {args.dim}  N = {args.N}  kappa = {pack.kappa:.12g}  "
          f"negative eigenvalues = {n_neg}")
    if args.cache:
        print(f"cache: {args.cache}")
    return EXIT_OK if n_neg == 1 else EXIT_CHECK


def _cmd_plots(args):
    from .plots import emit_plots
    for p in emit_plots(args.run_dir):
        print(p)
    return EXIT_OK


def _cmd_list(args):
    for name, path in bundled_scenarios().items():
        print(f"{name:<24} {path}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="dampedwave",
                                description="Radial damped focusing wave simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run scenario files or bundled scenarios")
    r.add_argument("configs", nargs="+", help="JSON file or bundled scenario name")
    r.add_argument("--out", help="output directory (one subdirectory per scenario)")
    r.add_argument("--workers", type=int, default=None,
                   help=f"parallel runs (default ${WORKERS_ENV} or 1)")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("verify-constants", help="closed forms against quadrature")
    c.add_argument("--dim", type=int, required=True)
    c.set_defaults(func=_cmd_constants)

    s = sub.add_parser("spectral", help="negative eigenvalue of the linearized operator")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--N", type=int, default=2048, help="reference grid size")
    s.add_argument("--cache", help="directory for the cached spectral data")
    s.set_defaults(func=_cmd_spectral)

    pl = sub.add_parser("plots", help="(re)draw the SVG plots of a run directory")
    pl.add_argument("run_dir")
    pl.set_defaults(func=_cmd_plots)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(func=_cmd_list)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
