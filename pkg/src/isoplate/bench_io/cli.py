"""Command line entry point: ``isoplate <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .. import stiefel
from ..solver import SolverError
from . import benchmarks
from .config import ConfigError, load_config
from .export import ExportError, export_csv

log = logging.getLogger("isoplate")


def _common(p: argparse.ArgumentParser, *, mesh=True):
    p.add_argument("--tau", type=float, help="pseudo-time step")
    p.add_argument("--tol", type=float, help="outer stopping tolerance on |dE|/tau")
    p.add_argument("--eta0", type=float, help="penalty on jumps of values")
    p.add_argument("--eta1", type=float, help="penalty on jumps of normal derivatives")
    if mesh:
        p.add_argument("--nx", type=int, help="quads along x1 (overrides the mesh family)")
        p.add_argument("--ny", type=int, help="quads along x2")
        p.add_argument("--split", choices=("crisscross", "two_triangle"))
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--tau-backoff", action="store_true", help="halve tau once when the energy goes up")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isoplate", description="Proximal Galerkin solver for isometric plate bending.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("weak-force", "square plate, f = 0.025 e3, tau = 2"),
                       ("strong-force", "square plate, f = e3, tau = 0.05")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--max-cells", type=int, default=14400, help="largest mesh of the 400 ... 14,400 family")
    p = sub.add_parser("buckling", help="compressed strip with quasi-static loading")
    _common(p)
    p.add_argument("--paper-scale", dest="full_scale", action="store_true", help="3,740 cells and 1,000 load steps")
    p.add_argument("--delta-t", type=float, help="load step")
    p = sub.add_parser("run", help="run a config file")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("stiefel-check", help="geometry property suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100)
    return ap


def _apply_overrides(rc, args):
    s = rc.solver
    s = dataclasses.replace(
        s,
        tau=args.tau if args.tau is not None else s.tau,
        tol=args.tol if args.tol is not None else s.tol,
        tau_backoff=args.tau_backoff or s.tau_backoff,
    )
    kw = {"solver": s}
    if args.eta0 is not None:
        kw["eta0"] = args.eta0
    if args.eta1 is not None:
        kw["eta1"] = args.eta1
    if getattr(args, "nx", None) is not None:
        kw["nx"] = args.nx
        kw["ny"] = args.ny if args.ny is not None else args.nx
    elif getattr(args, "ny", None) is not None:
        kw["ny"] = args.ny
    if getattr(args, "split", None):
        kw["split"] = args.split
    changed = bool(set(kw) - {"solver"}) or s != rc.solver
    rc = dataclasses.replace(rc, **kw)
    if changed:
        rc.source = None  # the copied config must describe what actually ran
    return rc.validate()


def _print_reports(results):
    print("cells,dofs,E_h,D_h,outer_iters,newton_total,wall_s")
    for r in results:
        print(",".join(r.report.row()))


def _volume_force(args, factory, default_out):
    if args.nx is not None or args.ny is not None:
        configs = [_apply_overrides(factory(args.nx or args.ny), args)]
    else:
        configs = [_apply_overrides(factory(n), args) for n in benchmarks.SQUARE_FAMILY if 4 * n * n <= args.max_cells]
    if not configs:
        raise ConfigError(f"--max-cells {args.max_cells} excludes every mesh (smallest has 400 cells)")
    results = []
    out = Path(args.out or default_out)
    for rc in configs:
        log.info("%s: %d cells", rc.name, rc.cells)
        results.append(benchmarks.run(rc, out))
    export_csv([r.report for r in results], out / "report.csv")
    _print_reports(results)
    return results


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * getattr(args, "verbose", 0)
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(message)s")

    if args.command == "stiefel-check":
        res = stiefel.property_suite(args.seed, args.samples)
        for name, ok, detail in res:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return 0 if all(ok for _, ok, _ in res) else 1

    stage = "config"
    try:
        if args.command == "weak-force":
            stage = "solve"
            _volume_force(args, benchmarks.weak_force, "out/weak-force")
        elif args.command == "strong-force":
            stage = "solve"
            _volume_force(args, benchmarks.strong_force, "out/strong-force")
        elif args.command == "buckling":
            rc = _apply_overrides(benchmarks.buckling(args.full_scale), args)
            if args.delta_t is not None:
                rc = dataclasses.replace(rc, delta_t=args.delta_t, source=None).validate()
            stage = "solve"
            res = benchmarks.run(rc, Path(args.out or "out/buckling"))
            _print_reports([res])
        elif args.command == "run":
            rc = _apply_overrides(load_config(args.config), args)
            stage = "solve"
            out = Path(args.out or rc.out)
            res = benchmarks.run(rc, out)
            if rc.source is not None:
                # keep the original file byte for byte
                (out / f"{rc.name}.cfg").write_text(Path(args.config).read_text())
            _print_reports([res])
    except ConfigError as exc:
        print(f"isoplate: configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"isoplate: solver failed during {stage}: {exc}", file=sys.stderr)
        return 3
    except (ExportError, OSError) as exc:
        print(f"isoplate: output failed: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
