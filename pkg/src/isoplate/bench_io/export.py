"""Writers for VTK snapshots, CSV reports and iteration logs."""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

import numpy as np

from ..dgspace import DGSpace, FEFunction

CSV_HEADER = ("cells", "dofs", "E_h", "D_h", "outer_iters", "newton_total", "wall_s")

# P2 node order is (v0, v1, v2, m01, m12, m20); four linear pieces per cell
_SUBTRIANGLES = np.array([[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]])


class ExportError(OSError):
    pass


@dataclasses.dataclass
class BenchmarkReport:
    cells: int
    dofs: int
    E_h: float
    D_h: float
    outer_iters: int
    newton_total: int
    wall_s: float

    def __post_init__(self):
        if self.dofs != 27 * self.cells:
            raise ValueError(f"dofs {self.dofs} != 27 x cells {self.cells}")

    def row(self) -> list[str]:
        return [
            str(self.cells),
            str(self.dofs),
            f"{self.E_h:.2e}",
            f"{self.D_h:.2e}",
            str(self.outer_iters),
            str(self.newton_total),
            f"{self.wall_s:.3e}",
        ]


def export_csv(reports, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in reports:
                w.writerow(r.row())
    except OSError as exc:
        raise ExportError(f"cannot write CSV {path}: {exc}") from exc
    return path


def read_csv(path) -> list[BenchmarkReport]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        BenchmarkReport(
            int(r["cells"]), int(r["dofs"]), float(r["E_h"]), float(r["D_h"]),
            int(r["outer_iters"]), int(r["newton_total"]), float(r["wall_s"]),
        )
        for r in rows
    ]


def vtk_fields(space: DGSpace, y: FEFunction):
    """Deformed node positions and point data on the 6 P2 nodes of every cell."""
    x = space.node_coordinates().reshape(-1, 2)  # (6n, 2)
    pos = y.cellwise().transpose(0, 2, 1).reshape(-1, 3)  # nodal values are the coefficients
    disp = pos - np.column_stack([x, np.zeros(len(x))])
    horiz = np.hypot(disp[:, 0], disp[:, 1])
    return pos, disp, horiz, pos[:, 2]


def export_vtk(space: DGSpace, y: FEFunction, path, title: str = "isoplate deformation") -> Path:
    """Legacy ASCII unstructured grid with 6 points and 4 triangles per cell."""
    path = Path(path)
    pos, disp, horiz, y3 = vtk_fields(space, y)
    n = space.mesh.n_cells
    tris = (6 * np.arange(n)[:, None, None] + _SUBTRIANGLES[None]).reshape(-1, 3)
    npts, ntri = len(pos), len(tris)
    out = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {npts} double",
    ]
    out += [f"{a:.12g} {b:.12g} {c:.12g}" for a, b, c in pos]
    out.append(f"CELLS {ntri} {4 * ntri}")
    out += [f"3 {a} {b} {c}" for a, b, c in tris]
    out.append(f"CELL_TYPES {ntri}")
    out += ["5"] * ntri
    out.append(f"POINT_DATA {npts}")
    out.append("VECTORS displacement double")
    out += [f"{a:.12g} {b:.12g} {c:.12g}" for a, b, c in disp]
    out.append("SCALARS horizontal_displacement double 1")
    out.append("LOOKUP_TABLE default")
    out += [f"{v:.12g}" for v in horiz]
    out.append("SCALARS y3 double 1")
    out.append("LOOKUP_TABLE default")
    out += [f"{v:.12g}" for v in y3]
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise ExportError(f"cannot write VTK {path}: {exc}") from exc
    return path


def read_vtk_summary(path) -> dict:
    """Structural check of a legacy file written by :func:`export_vtk`.

    Returns the section order, point coordinates, counts and point data; raises ValueError when the counts
    and the section lengths disagree.
    """
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise ValueError("missing VTK header")
    if lines[2].strip() != "ASCII" or lines[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise ValueError("not an ASCII unstructured grid")
    sections, i = [], 4
    counts = {}
    points = None
    while i < len(lines):
        words = lines[i].split()
        key = words[0]
        if key == "POINTS":
            npts = int(words[1])
            counts["points"] = npts
            points = np.array([[float(v) for v in ln.split()] for ln in lines[i + 1 : i + 1 + npts]])
            i += 1 + npts
        elif key == "CELLS":
            ncell, size = int(words[1]), int(words[2])
            block = [ln.split() for ln in lines[i + 1 : i + 1 + ncell]]
            if sum(len(b) for b in block) != size:
                raise ValueError("CELLS size mismatch")
            counts["cells"] = ncell
            i += 1 + ncell
        elif key == "CELL_TYPES":
            if int(words[1]) != counts.get("cells"):
                raise ValueError("CELL_TYPES count mismatch")
            i += 1 + int(words[1])
        elif key == "POINT_DATA":
            if int(words[1]) != counts.get("points"):
                raise ValueError("POINT_DATA count mismatch")
            i += 1
        elif key in ("VECTORS", "SCALARS"):
            name = words[1]
            i += 1
            if key == "SCALARS":
                i += 1  # lookup table line
            vals = np.array([[float(v) for v in ln.split()] for ln in lines[i : i + counts["points"]]])
            counts[name] = vals
            i += counts["points"]
        else:
            raise ValueError(f"unexpected line {lines[i]!r}")
        sections.append(key)
    return {"sections": sections, "coordinates": points, **counts}


class IterationLogWriter:
    """Plain-text iteration log, one line per outer step."""

    HEADER = "# k E_h dE/tau D_h |mu|_L2 newton_steps tau"

    def __init__(self, path):
        self.path = Path(path)
        try:
            self._fh = open(self.path, "w")
        except OSError as exc:
            raise ExportError(f"cannot open log {self.path}: {exc}") from exc
        self._fh.write(self.HEADER + "\n")

    def comment(self, text: str) -> None:
        self._fh.write(f"# {text}\n")
        self._fh.flush()

    def record(self, rec) -> None:
        self._fh.write(
            f"{rec.k} {rec.reported_energy:.10e} {rec.increment:.4e} {rec.defect:.4e} "
            f"{rec.mu_norm:.4e} {rec.newton_steps} {rec.tau:g}\n"
        )
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
