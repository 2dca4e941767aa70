"""Exact solver for multiple-choice vector bin packing via arc-flow graphs."""

from .graph import (
    ArcFlowGraph,
    build_graph,
    build_type_graph,
    compress_final,
    enumerate_patterns,
    export_dot,
    psi_labels,
    stitch,
)
from .instance import Instance, generate_instance, make_instance, parse_instance, read_instance
from .model import assemble, default_J, emit_interchange
from .pipeline import run
from .solution import PackingSolution, extract, validate
from .solver import BackendConfig, SolveReport, solve, solve_oracle

__version__ = "0.1.0"

__all__ = [
    "ArcFlowGraph", "BackendConfig", "Instance", "PackingSolution", "SolveReport",
    "assemble", "build_graph", "build_type_graph", "compress_final", "default_J",
    "emit_interchange", "enumerate_patterns", "export_dot", "extract", "generate_instance",
    "make_instance", "parse_instance", "psi_labels", "read_instance", "run", "solve",
    "solve_oracle", "stitch", "validate",
]
