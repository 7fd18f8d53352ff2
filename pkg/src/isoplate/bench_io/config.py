"""Run configuration: INI-style sections parsed with :mod:`configparser`.

Example::

    [mesh]
    bounds = 0 4 0 4
    nx = 10
    ny = 10
    split = crisscross
    dirichlet = left bottom

    [data]
    boundary = flat
    f = 0 0 0.025

    [forms]
    eta0 = 100
    eta1 = 100

    [solver]
    tau = 2
    tol = 1e-4

    [continuation]
    enabled = no

    [output]
    dir = out/weak
    vtk = yes
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from pathlib import Path

import numpy as np

from .. import forms
from ..solver import SolverConfig


class ConfigError(ValueError):
    pass


_SIDES = ("left", "right", "bottom", "top")
_FAMILY = re.compile(r"^\s*(flat|compressed_strip)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def parse_family(text: str) -> tuple[str, float]:
    """``flat`` or ``compressed_strip(amount)`` -> (name, amount)."""
    m = _FAMILY.match(text)
    if not m:
        raise ConfigError(f"unknown boundary data family {text!r}; use flat or compressed_strip(amount)")
    name, arg = m.group(1), m.group(2)
    if name == "flat":
        if arg:
            raise ConfigError("flat takes no argument")
        return name, 0.0
    if not arg:
        raise ConfigError("compressed_strip needs an amount, e.g. compressed_strip(1.4)")
    try:
        return name, float(arg)
    except ValueError:
        raise ConfigError(f"bad compressed_strip amount {arg!r}") from None


def boundary_data(name: str, amount: float, t: float = 1.0) -> forms.BoundaryData:
    if name == "flat":
        return forms.BoundaryData.flat()
    return forms.BoundaryData.compressed_strip(amount * t)


def _floats(text, n=None, what="value"):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{what}: expected {n} numbers, got {len(vals)}")
    return vals


@dataclasses.dataclass
class RunConfig:
    name: str = "run"
    bounds: tuple = ((0.0, 4.0), (0.0, 4.0))
    nx: int = 10
    ny: int = 10
    split: str = "crisscross"
    dirichlet: tuple = ("left", "bottom")
    boundary: str = "flat"
    amount: float = 0.0
    f: tuple = (0.0, 0.0, 0.0)
    eta0: float = 100.0
    eta1: float = 100.0
    solver: SolverConfig = dataclasses.field(default_factory=SolverConfig)
    continuation: bool = False
    delta_t: float = 1e-2
    snapshots: tuple = ()
    out: str = "out"
    vtk: bool = True
    source: str | None = None  # text of the file this was parsed from

    def validate(self) -> "RunConfig":
        (x0, x1), (y0, y1) = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ConfigError(f"mesh.bounds must be increasing, got {self.bounds}")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("mesh.nx and mesh.ny must be positive")
        if self.split not in ("crisscross", "two_triangle"):
            raise ConfigError(f"mesh.split must be crisscross or two_triangle, got {self.split!r}")
        bad = set(self.dirichlet) - set(_SIDES)
        if bad:
            raise ConfigError(f"mesh.dirichlet: unknown sides {sorted(bad)}")
        if not self.dirichlet:
            raise ConfigError("mesh.dirichlet: at least one clamped side is needed")
        if len(self.f) != 3:
            raise ConfigError("data.f must have three components")
        if self.eta0 <= 0 or self.eta1 <= 0:
            raise ConfigError("forms.eta0 and forms.eta1 must be positive")
        if self.continuation:
            n = round(1.0 / self.delta_t)
            if self.delta_t <= 0 or abs(n * self.delta_t - 1.0) > 1e-9:
                raise ConfigError("continuation.delta_t must divide 1")
            if any(not 0.0 <= t <= 1.0 for t in self.snapshots):
                raise ConfigError("continuation.snapshots must lie in [0, 1]")
        return self

    @property
    def cells(self) -> int:
        return (4 if self.split == "crisscross" else 2) * self.nx * self.ny

    def params(self) -> forms.PenaltyParams:
        return forms.PenaltyParams(self.eta0, self.eta1)

    def data_at(self, t: float = 1.0) -> forms.BoundaryData:
        return boundary_data(self.boundary, self.amount, t)

    def to_text(self) -> str:
        """Serialize back to the config format (used when no source text exists)."""
        (x0, x1), (y0, y1) = self.bounds
        s = self.solver
        fam = "flat" if self.boundary == "flat" else f"{self.boundary}({self.amount:g})"
        yes = lambda b: "yes" if b else "no"  # noqa: E731
        lines = [
            "[run]", f"name = {self.name}", "",
            "[mesh]", f"bounds = {x0:g} {x1:g} {y0:g} {y1:g}", f"nx = {self.nx}", f"ny = {self.ny}",
            f"split = {self.split}", f"dirichlet = {' '.join(self.dirichlet)}", "",
            "[data]", f"boundary = {fam}", f"f = {' '.join(f'{v:g}' for v in self.f)}", "",
            "[forms]", f"eta0 = {self.eta0:g}", f"eta1 = {self.eta1:g}", "",
            "[solver]", f"tau = {s.tau:g}", f"tol = {s.tol:g}", f"mu_tol = {s.mu_tol:g}",
            f"newton_tol = {s.newton_tol:g}", f"cell_tol = {s.cell_tol:g}", f"newton_max = {s.newton_max}",
            f"outer_max = {s.outer_max}", f"tau_backoff = {yes(s.tau_backoff)}", "",
            "[continuation]", f"enabled = {yes(self.continuation)}", f"delta_t = {self.delta_t:g}",
            f"snapshots = {' '.join(f'{t:g}' for t in self.snapshots)}", "",
            "[output]", f"dir = {self.out}", f"vtk = {yes(self.vtk)}", "",
        ]
        return "\n".join(lines)


_KNOWN = {
    "run": {"name"},
    "mesh": {"bounds", "nx", "ny", "split", "dirichlet"},
    "data": {"boundary", "f"},
    "forms": {"eta0", "eta1"},
    "solver": {"tau", "tol", "mu_tol", "newton_tol", "cell_tol", "newton_max", "outer_max", "tau_backoff"},
    "continuation": {"enabled", "delta_t", "snapshots"},
    "output": {"dir", "vtk"},
}


def parse_config(text: str, name: str = "run") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for sec in cp.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - _KNOWN[sec]
        if extra:
            raise ConfigError(f"[{sec}]: unknown keys {sorted(extra)}")

    def get(sec, key, conv, default):
        if not cp.has_option(sec, key):
            return default
        raw = cp.get(sec, key)
        try:
            return conv(raw)
        except (ValueError, configparser.Error):
            raise ConfigError(f"[{sec}] {key}: bad value {raw!r}") from None

    def getbool(sec, key, default):
        if not cp.has_option(sec, key):
            return default
        try:
            return cp.getboolean(sec, key)
        except ValueError:
            raise ConfigError(f"[{sec}] {key}: expected yes/no") from None

    rc = RunConfig(name=get("run", "name", str.strip, name))
    if cp.has_option("mesh", "bounds"):
        b = _floats(cp.get("mesh", "bounds"), 4, "mesh.bounds")
        rc.bounds = ((b[0], b[1]), (b[2], b[3]))
    rc.nx = get("mesh", "nx", int, rc.nx)
    rc.ny = get("mesh", "ny", int, rc.ny)
    rc.split = get("mesh", "split", str.strip, rc.split)
    rc.dirichlet = tuple(get("mesh", "dirichlet", lambda s: s.replace(",", " ").split(), list(rc.dirichlet)))
    if cp.has_option("data", "boundary"):
        rc.boundary, rc.amount = parse_family(cp.get("data", "boundary"))
    if cp.has_option("data", "f"):
        rc.f = tuple(_floats(cp.get("data", "f"), 3, "data.f"))
    rc.eta0 = get("forms", "eta0", float, rc.eta0)
    rc.eta1 = get("forms", "eta1", float, rc.eta1)

    d = SolverConfig()
    try:
        rc.solver = SolverConfig(
            tau=get("solver", "tau", float, d.tau),
            tol=get("solver", "tol", float, d.tol),
            mu_tol=get("solver", "mu_tol", float, d.mu_tol),
            newton_tol=get("solver", "newton_tol", float, d.newton_tol),
            cell_tol=get("solver", "cell_tol", float, d.cell_tol),
            newton_max=get("solver", "newton_max", int, d.newton_max),
            outer_max=get("solver", "outer_max", int, d.outer_max),
            tau_backoff=getbool("solver", "tau_backoff", d.tau_backoff),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[solver] {exc}") from None
    rc.continuation = getbool("continuation", "enabled", False)
    rc.delta_t = get("continuation", "delta_t", float, rc.delta_t)
    if cp.has_option("continuation", "snapshots"):
        rc.snapshots = tuple(_floats(cp.get("continuation", "snapshots"), None, "continuation.snapshots"))
    rc.out = get("output", "dir", str.strip, rc.out)
    rc.vtk = getbool("output", "vtk", rc.vtk)
    rc.source = text
    return rc.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, name=path.stem)


def f_vector(rc: RunConfig) -> np.ndarray:
    return np.asarray(rc.f, dtype=float)
