"""Configuration, benchmark definitions, exporters and the command line."""

from .benchmarks import RunResult, buckling, run, strong_force, sweep, weak_force
from .config import ConfigError, RunConfig, load_config, parse_config
from .export import BenchmarkReport, IterationLogWriter, export_csv, export_vtk, read_csv

__all__ = [
    "RunConfig",
    "ConfigError",
    "parse_config",
    "load_config",
    "BenchmarkReport",
    "export_csv",
    "read_csv",
    "export_vtk",
    "IterationLogWriter",
    "RunResult",
    "run",
    "sweep",
    "weak_force",
    "strong_force",
    "buckling",
]
