import math

import numpy as np
import pytest

from isoplate import forms, solver
from isoplate.bench_io import benchmarks, cli, config, export
from isoplate.dgspace import DGSpace, FEFunction, V, flat_deformation
from isoplate import mesh as ms

FLAT_CFG = """\
[run]
name = flat
[mesh]
bounds = 0 1 0 1
nx = 2
ny = 2
dirichlet = left bottom
[data]
boundary = flat
f = 0 0 0
[solver]
tau = 1
[output]
vtk = yes
"""


def test_parse_family():
    assert config.parse_family("flat") == ("flat", 0.0)
    assert config.parse_family(" compressed_strip( 1.4 ) ") == ("compressed_strip", 1.4)
    for bad in ("clamped", "flat(1)", "compressed_strip", "compressed_strip(x)"):
        with pytest.raises(config.ConfigError):
            config.parse_family(bad)


def test_config_parse_and_round_trip():
    rc = config.parse_config(FLAT_CFG)
    assert rc.name == "flat" and rc.cells == 16 and rc.dirichlet == ("left", "bottom")
    assert rc.solver.tau == 1.0 and rc.solver.tol == 1e-4
    again = config.parse_config(rc.to_text())
    assert dataclass_equal(rc, again)
    b = benchmarks.buckling()
    again = config.parse_config(b.to_text())
    assert dataclass_equal(b, again)
    assert again.data_at(0.5).y_D(np.array([[2.0, 0.3]]))[0, 0] == pytest.approx(2.0 - 0.7)


def dataclass_equal(a, b):
    skip = {"source"}
    return all(getattr(a, k) == getattr(b, k) for k in a.__dataclass_fields__ if k not in skip)


@pytest.mark.parametrize("text", [
    "[mesh]\nnx = 0\n",
    "[mesh]\nsplit = quad\n",
    "[mesh]\ndirichlet = north\n",
    "[mesh]\nbounds = 1 0 0 1\n",
    "[data]\nf = 0 1\n",
    "[data]\nboundary = clamped\n",
    "[solver]\ntau = -1\n",
    "[solver]\nnewton_max = many\n",
    "[forms]\neta0 = 0\n",
    "[continuation]\nenabled = yes\ndelta_t = 0.3\n",
    "[continuation]\nenabled = maybe\n",
    "[bogus]\nx = 1\n",
    "[mesh]\nnz = 3\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(config.ConfigError):
        config.parse_config(text)


def test_load_config_missing(tmp_path):
    with pytest.raises(config.ConfigError):
        config.load_config(tmp_path / "nope.cfg")


def test_csv_round_trip(tmp_path):
    reps = [export.BenchmarkReport(400, 10800, -9.8e-3, 1.23e-14, 4, 12, 2.5),
            export.BenchmarkReport(1600, 43200, -9.49e-3, 0.0, 3, 9, 20.0)]
    p = export.export_csv(reps, tmp_path / "r.csv")
    back = export.read_csv(p)
    assert [(r.cells, r.dofs, r.outer_iters, r.newton_total) for r in back] == [(400, 10800, 4, 12), (1600, 43200, 3, 9)]
    assert back[0].E_h == -9.8e-3 and back[0].D_h == 1.23e-14
    assert p.read_text().splitlines()[0] == ",".join(export.CSV_HEADER)
    export.export_csv([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().strip() == ",".join(export.CSV_HEADER)
    with pytest.raises(ValueError):
        export.BenchmarkReport(400, 10000, 0, 0, 1, 1, 0)
    with pytest.raises(export.ExportError):
        export.export_csv(reps, tmp_path / "missing" / "r.csv")


def test_vtk_structure(tmp_path):
    b = ((0.0, 1.0), (0.0, 1.0))
    space = DGSpace(ms.classify_edges(ms.build_structured(2, 1, b), ms.side_predicate(b, ["left"])))
    y = space.interpolate(V, flat_deformation)
    p = export.export_vtk(space, y, tmp_path / "flat.vtk")
    s = export.read_vtk_summary(p)
    n = space.mesh.n_cells
    assert s["points"] == 6 * n and s["coordinates"].shape == (6 * n, 3) and s["cells"] == 4 * n
    assert s["sections"] == ["POINTS", "CELLS", "CELL_TYPES", "POINT_DATA", "VECTORS", "SCALARS", "SCALARS"]
    assert np.abs(s["displacement"]).max() == 0 and np.abs(s["y3"]).max() == 0
    # lifted plate: displacement is the lift everywhere
    c = y.cellwise().copy()
    c[:, 2] += 0.5
    c[:, 0] += 0.3
    s = export.read_vtk_summary(export.export_vtk(space, FEFunction(V, c.reshape(-1)), tmp_path / "l.vtk"))
    np.testing.assert_allclose(s["y3"], 0.5)
    np.testing.assert_allclose(s["horizontal_displacement"], 0.3)
    np.testing.assert_allclose(s["displacement"], [[0.3, 0, 0.5]] * (6 * n))


def test_iteration_log(tmp_path):
    rec = solver.IterationRecord(1, -1.0, -0.5, 1e-3, 1e-14, 0.2, 3, 2.0)
    with export.IterationLogWriter(tmp_path / "a.log") as w:
        w.comment("hello")
        w.record(rec)
    lines = (tmp_path / "a.log").read_text().splitlines()
    assert lines[0] == export.IterationLogWriter.HEADER and lines[1] == "# hello"
    assert lines[2].split()[0] == "1" and float(lines[2].split()[1]) == -0.5


def test_cli_stiefel_check(capsys):
    assert cli.main(["stiefel-check", "--samples", "20"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 8


def test_cli_run_flat(tmp_path, capsys):
    cfg = tmp_path / "flat.cfg"
    cfg.write_text(FLAT_CFG)
    out = tmp_path / "o"
    assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
    reports = export.read_csv(out / "flat.csv")
    assert reports[0].outer_iters == 1 and abs(reports[0].E_h) < 1e-10 and reports[0].D_h < 1e-14
    assert (out / "flat.cfg").read_text() == FLAT_CFG
    assert export.read_vtk_summary(out / "flat.vtk")["cells"] == 4 * 16
    assert len((out / "flat.log").read_text().splitlines()) == 3
    # overrides are recorded in the copied config
    assert cli.main(["run", str(cfg), "--out", str(out), "--tau", "0.5"]) == 0
    assert "tau = 0.5" in (out / "flat.cfg").read_text()


def test_cli_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[mesh]\nsplit = hex\n")
    assert cli.main(["run", str(cfg)]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert cli.main(["weak-force", "--max-cells", "100", "--out", str(tmp_path)]) == 2


def test_cli_solver_failure(tmp_path, capsys):
    cfg = tmp_path / "hard.cfg"
    cfg.write_text(FLAT_CFG.replace("f = 0 0 0", "f = 0 0 1").replace("tau = 1", "tau = 0.05\nouter_max = 1"))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path)]) == 3
    assert "solver failed during solve" in capsys.readouterr().err


def test_cli_output_failure(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = tmp_path / "flat.cfg"
    cfg.write_text(FLAT_CFG)
    assert cli.main(["run", str(cfg), "--out", str(blocker / "sub")]) == 4


def test_cli_weak_force_smallest(tmp_path, capsys):
    assert cli.main(["weak-force", "--max-cells", "400", "--out", str(tmp_path)]) == 0
    rows = export.read_csv(tmp_path / "report.csv")
    assert len(rows) == 1 and rows[0].cells == 400 and rows[0].dofs == 10800
    assert rows[0].E_h < 0 and rows[0].D_h < 1e-10
    assert (tmp_path / "weak-force-400.vtk").exists()
    assert capsys.readouterr().out.splitlines()[0].startswith("cells,dofs")


def test_benchmark_factories():
    assert [benchmarks.weak_force(n).cells for n in benchmarks.SQUARE_FAMILY] == [400, 1600, 6400, 14400]
    assert benchmarks.buckling(full_scale=True).cells == 3740
    assert benchmarks.buckling().cells == 1024
    assert math.isclose(benchmarks.strong_force().f[2], 1.0)


def test_cli_flags_parse():
    args = cli.build_parser().parse_args(["buckling", "--paper-scale", "--delta-t", "0.05", "--tau-backoff"])
    assert args.full_scale and args.delta_t == 0.05 and args.tau_backoff
    rc = cli._apply_overrides(benchmarks.buckling(args.full_scale), args)
    assert rc.cells == 3740 and rc.solver.tau_backoff and rc.source is None
