"""Simulation and stationarity diagnostics for DCC-GARCH models."""

from dcclab.errors import DccLabError, DomainError, NumericError, StructureError
from dcclab.innovations import InnovationSpec
from dcclab.model import DccSpec, build_scalar, detect_structure, benchmark_spec, validate
from dcclab.simulator import SimConfig, ensemble, moment_diagnostics, simulate
from dcclab.stationarity import compute_constants, full_report

__version__ = "0.1.0"

__all__ = [
    "DccLabError",
    "DomainError",
    "NumericError",
    "StructureError",
    "InnovationSpec",
    "DccSpec",
    "build_scalar",
    "detect_structure",
    "benchmark_spec",
    "validate",
    "SimConfig",
    "ensemble",
    "moment_diagnostics",
    "simulate",
    "compute_constants",
    "full_report",
]
