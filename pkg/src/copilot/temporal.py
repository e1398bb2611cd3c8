"""Temporal consistency of a task graph, ignoring resource capacities.

Windows, durations and precedence edges form a system of difference
constraints over task start/end time points.  The system is satisfiable iff
the induced distance graph has no negative cycle; when it does, the cycle's
edges name exactly the constraints that cannot hold together, which is what
gets surfaced to the operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .model import Status, TaskGraph

ORIGIN = "origin"


@dataclass(frozen=True)
class _Edge:
    src: str
    dst: str
    weight: float
    label: str


@dataclass(frozen=True)
class ConsistencyResult:
    consistent: bool
    witness: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.consistent


def _start(iid: str) -> str:
    return f"start:{iid}"


def _end(iid: str) -> str:
    return f"end:{iid}"


def build_edges(
    graph: TaskGraph,
    now: float = 0.0,
    started: Mapping[str, float] | None = None,
    exclude: set[str] | None = None,
) -> list[_Edge]:
    """Difference constraints as edges: x_j - x_i <= w becomes i -> j (w)."""
    started = started or {}
    exclude = exclude or set()
    edges: list[_Edge] = []
    active_ids = [
        iid
        for iid, t in sorted(graph.tasks.items())
        if t.status not in (Status.SUCCEEDED, Status.FAILED) and iid not in exclude
    ]
    live = set(active_ids)
    for iid in active_ids:
        task = graph.tasks[iid]
        dur = task.def_.duration
        # rigid duration: end - start == dur
        edges.append(_Edge(_start(iid), _end(iid), dur, f"duration({iid}) = {dur:g}"))
        edges.append(_Edge(_end(iid), _start(iid), -dur, f"duration({iid}) = {dur:g}"))
        if iid in started:
            s = started[iid]
            edges.append(_Edge(ORIGIN, _start(iid), s, f"started({iid}) = {s:g}"))
            edges.append(_Edge(_start(iid), ORIGIN, -s, f"started({iid}) = {s:g}"))
        else:
            lb = max(task.def_.earliest_start, now)
            label = (
                f"earliest_start({iid}) = {task.def_.earliest_start:g}"
                if task.def_.earliest_start >= now
                else f"not started before now = {now:g}"
            )
            edges.append(_Edge(_start(iid), ORIGIN, -lb, label))
        le = task.latest_end
        edges.append(_Edge(ORIGIN, _end(iid), le, f"latest_end({iid}) = {le:g}"))
        for pred in sorted(graph.preds(iid)):
            if pred not in live:
                continue  # completed predecessors constrain nothing further
            edges.append(
                _Edge(_start(iid), _end(pred), 0.0, f"{pred} precedes {iid}")
            )
    return edges


def check_consistency(
    graph: TaskGraph,
    now: float = 0.0,
    started: Mapping[str, float] | None = None,
    exclude: set[str] | None = None,
) -> ConsistencyResult:
    """Bellman-Ford negative-cycle detection over the distance graph.

    All distances start at 0 (implicit super-source) so disconnected negative
    cycles are still found.  The witness lists the human-readable constraint
    labels along the offending cycle, deduplicated in cycle order.
    """
    edges = build_edges(graph, now, started, exclude)
    if not edges:
        return ConsistencyResult(True)
    nodes = sorted({e.src for e in edges} | {e.dst for e in edges})
    dist = {n: 0.0 for n in nodes}
    pred_edge: dict[str, _Edge] = {}
    relaxed_node: str | None = None
    for i in range(len(nodes)):
        relaxed_node = None
        for e in edges:
            if dist[e.src] + e.weight < dist[e.dst] - 1e-9:
                dist[e.dst] = dist[e.src] + e.weight
                pred_edge[e.dst] = e
                relaxed_node = e.dst
        if relaxed_node is None:
            return ConsistencyResult(True)
    # still relaxing after |V| passes: walk predecessors back onto the cycle
    node = relaxed_node
    assert node is not None
    for _ in range(len(nodes)):
        node = pred_edge[node].src
    cycle_edges: list[_Edge] = []
    cursor = node
    while True:
        e = pred_edge[cursor]
        cycle_edges.append(e)
        cursor = e.src
        if cursor == node:
            break
    cycle_edges.reverse()
    witness: list[str] = []
    for e in cycle_edges:
        if e.label not in witness:
            witness.append(e.label)
    return ConsistencyResult(False, tuple(witness))
