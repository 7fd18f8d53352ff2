"""Benchmark setups and the runner that turns a RunConfig into outputs."""

from __future__ import annotations

import dataclasses
import logging
import time
from pathlib import Path

import numpy as np

from .. import forms, mesh as meshmod, solver
from ..dgspace import DGSpace
from .config import RunConfig, f_vector
from .export import BenchmarkReport, IterationLogWriter, export_csv, export_vtk

logger = logging.getLogger("isoplate")

# square meshes of the volume-force tables: 10x10 ... 60x60 quads, four cells each
SQUARE_FAMILY = (10, 20, 40, 60)
FIGURE_TIMES = (0.05, 0.1, 0.25, 0.6, 0.75, 1.0)


def weak_force(nx: int = 10, **kw) -> RunConfig:
    rc = RunConfig(name=f"weak-force-{4 * nx * nx}", nx=nx, ny=nx, f=(0.0, 0.0, 0.025),
                   solver=solver.SolverConfig(tau=2.0, tol=1e-4))
    return dataclasses.replace(rc, **kw)


def strong_force(nx: int = 10, **kw) -> RunConfig:
    rc = RunConfig(name=f"strong-force-{4 * nx * nx}", nx=nx, ny=nx, f=(0.0, 0.0, 1.0),
                   solver=solver.SolverConfig(tau=0.05, tol=1e-4))
    return dataclasses.replace(rc, **kw)


def buckling(full_scale: bool = False, **kw) -> RunConfig:
    # desk scale: 32 x 8 quads -> 1,024 cells; full scale: 55 x 17 quads -> 3,740 cells
    nx, ny, dt = (55, 17, 1e-3) if full_scale else (32, 8, 1e-2)
    rc = RunConfig(
        name="buckling-full" if full_scale else "buckling",
        bounds=((-2.0, 2.0), (0.0, 1.0)), nx=nx, ny=ny, dirichlet=("left", "right"),
        boundary="compressed_strip", amount=1.4, f=(0.0, 0.0, 1e-5),
        solver=solver.SolverConfig(tau=0.05, tol=1e-3, outer_max=500),
        continuation=True, delta_t=dt, snapshots=FIGURE_TIMES,
    )
    return dataclasses.replace(rc, **kw)


@dataclasses.dataclass
class RunResult:
    config: RunConfig
    report: BenchmarkReport
    state: solver.DGState
    log: solver.IterationLog  # last proximal loop (last load step for continuation)
    problem: solver.PlateProblem
    out_dir: Path | None
    snapshots: list = dataclasses.field(default_factory=list)
    energy_increases: int = 0
    step_logs: list = dataclasses.field(default_factory=list)  # (t, IterationLog) per load step


def build_problem(rc: RunConfig, t: float = 1.0):
    m = meshmod.build_structured(rc.nx, rc.ny, rc.bounds, rc.split)
    m = meshmod.classify_edges(m, meshmod.side_predicate(rc.bounds, rc.dirichlet))
    space = DGSpace(m)
    problem = solver.PlateProblem(space, f_vector(rc), rc.params(), rc.data_at(t))
    return space, problem


def _prepare_out(rc: RunConfig, out_dir) -> Path | None:
    if out_dir is None:
        return None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{rc.name}.cfg").write_text(rc.source if rc.source is not None else rc.to_text())
    return out


def run(rc: RunConfig, out_dir=None) -> RunResult:
    """Execute one configuration. With ``out_dir`` set, the config copy, CSV
    report, iteration log and (if enabled) VTK snapshots land there."""
    rc.validate()
    out = _prepare_out(rc, out_dir)
    t0 = time.perf_counter()
    space, problem = build_problem(rc, 0.0 if rc.continuation else 1.0)
    state = solver.initial_state(space)
    logw = IterationLogWriter(out / f"{rc.name}.log") if out else None
    increases = 0
    newton_total = 0
    outer_total = 0
    snaps, step_logs = [], []
    try:
        if logw:
            logw.comment(f"{rc.name}: {space.mesh.n_cells} cells, {space.dofmap.total} dofs, tau={rc.solver.tau:g}")
        if rc.continuation:

            def on_step(t, st, lg):
                nonlocal increases, newton_total, outer_total
                increases += lg.energy_increases
                newton_total += lg.newton_total
                outer_total += lg.outer_iterations
                step_logs.append((t, lg))
                if logw:
                    logw.comment(f"t={t:.6g}")
                    for r in lg.records:
                        logw.record(r)
                logger.info("t=%.4f done: outer %d, newton %d, max|y3| %.3f", t, lg.outer_iterations,
                            lg.newton_total, np.abs(st.y.cellwise()[:, 2]).max())

            snaps, state = solver.continuation_drive(problem, state, rc.solver, rc.data_at, rc.delta_t,
                                                     rc.snapshots, on_step=on_step)
            problem = problem.with_data(rc.data_at(1.0))
            log = step_logs[-1][1]
        else:
            state, log = solver.proximal_loop(
                problem, state, rc.solver, on_iteration=(lambda s, r: logw.record(r)) if logw else None
            )
            increases = log.energy_increases
            newton_total = log.newton_total
            outer_total = log.outer_iterations
    finally:
        if logw:
            logw.close()
    wall = time.perf_counter() - t0
    n = space.mesh.n_cells
    report = BenchmarkReport(n, space.dofmap.total, problem.reported_energy(state.y),
                             forms.isometry_defect(space, state.y), outer_total, newton_total, wall)
    if out and rc.vtk:
        if rc.continuation:
            for s in snaps:
                export_vtk(space, s.state.y, out / f"{rc.name}_t{s.t:.2f}.vtk", f"{rc.name} t={s.t:g}")
        else:
            export_vtk(space, state.y, out / f"{rc.name}.vtk", rc.name)
    if out:
        export_csv([report], out / f"{rc.name}.csv")
    return RunResult(rc, report, state, log, problem, out, snaps, increases, step_logs)


def sweep(configs, out_dir=None, csv_name="report.csv"):
    """Run a list of configurations and write one combined CSV."""
    results = [run(rc, out_dir) for rc in configs]
    if out_dir is not None:
        export_csv([r.report for r in results], Path(out_dir) / csv_name)
    return results

