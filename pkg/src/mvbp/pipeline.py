"""End-to-end solve: build, stitch, compress, assemble, solve, extract, validate."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .graph import ArcFlowGraph, GraphStats, build_graph, compress_final
from .instance import Instance
from .model import FlowModel, assemble
from .solution import PackingSolution, ValidationReport, extract, validate
from .solver import OPTIMAL, BackendConfig, SolveReport, solve


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    instance: Instance
    graph: ArcFlowGraph
    stats: GraphStats
    model: FlowModel
    report: SolveReport | None = None
    solution: PackingSolution | None = None
    validation: ValidationReport | None = None

    @property
    def optimal(self) -> bool:
        return self.report is not None and self.report.status == OPTIMAL


def build(instance: Instance, exact_caps: bool = False, J=None):
    """Graph, stats and model for ``instance`` (no solve)."""
    try:
        stitched = build_graph(instance, exact_caps=exact_caps)
        graph, stats = compress_final(stitched, exact_caps=exact_caps)
    except Exception as exc:
        raise StageError("graph", exc) from exc
    try:
        model = assemble(graph, instance, J)
    except Exception as exc:
        raise StageError("model", exc) from exc
    return graph, stats, model


def run(
    instance: Instance,
    config: BackendConfig | None = None,
    exact_caps: bool = False,
    J=None,
) -> PipelineResult:
    """Solve ``instance`` to optimality and extract a validated packing.

    With ``exact_caps`` off the graph may hold paths carrying more copies of
    an item than its demand; the model is unaffected and the extractor drops
    the surplus. Turning it on gives graphs whose paths are exactly the valid
    patterns, at the price of much larger graphs on instances with many small
    items.
    """
    t0 = time.perf_counter()
    graph, stats, model = build(instance, exact_caps, J)
    result = PipelineResult(instance, graph, stats, model)
    try:
        report = solve(model, config)
    except Exception as exc:
        raise StageError("solve", exc) from exc
    result.report = report
    if report.status == OPTIMAL:
        try:
            result.solution = extract(graph, report, instance)
        except Exception as exc:
            raise StageError("extract", exc) from exc
        result.validation = validate(result.solution, instance, model.J)
    report.time_total = time.perf_counter() - t0
    return result
