"""Brute-force oracles, independent of the scheduler implementation.

Feasibility is decided by exhaustive depth-first enumeration of integer start
times.  On all-integer instances the planner's placements are maxima and sums
of integers, so integral schedules lose no generality; the enumerator shares
no placement logic with the scheduler it is checking.
"""

from __future__ import annotations

from copilot.model import Status, TaskGraph


def _topo(graph: TaskGraph) -> list[str]:
    order: list[str] = []
    seen: set[str] = set()

    def visit(iid: str) -> None:
        if iid in seen:
            return
        seen.add(iid)
        for p in sorted(graph.preds(iid)):
            visit(p)
        order.append(iid)

    for iid in sorted(graph.tasks):
        visit(iid)
    return order


def enumerate_starts(
    graph: TaskGraph,
    operator_capacity: int | None = 1,
    pit_crew_capacity: int | None = 4,
    now: int = 0,
    node_limit: int = 2_000_000,
) -> dict[str, int] | None:
    """First feasible integer start assignment, or None.

    Pass capacity None to ignore that resource (temporal-only feasibility).
    Raises RuntimeError if the search tree exceeds node_limit; keeps broken
    generators from silently eating minutes.
    """
    order = [
        iid
        for iid in _topo(graph)
        if graph.tasks[iid].status not in (Status.SUCCEEDED, Status.FAILED)
    ]
    starts: dict[str, int] = {}
    usage: dict[str, dict[int, int]] = {"operator": {}, "pit_crew": {}}
    caps = {"operator": operator_capacity, "pit_crew": pit_crew_capacity}
    nodes = [0]

    def fits(resource: str | None, s: int, dur: int) -> bool:
        if resource is None or caps[resource] is None:
            return True
        table = usage[resource]
        return all(table.get(t, 0) < caps[resource] for t in range(s, s + dur))

    def claim(resource: str | None, s: int, dur: int, delta: int) -> None:
        if resource is None or caps[resource] is None:
            return
        table = usage[resource]
        for t in range(s, s + dur):
            table[t] = table.get(t, 0) + delta

    def dfs(i: int) -> bool:
        nodes[0] += 1
        if nodes[0] > node_limit:
            raise RuntimeError("oracle node limit exceeded")
        if i == len(order):
            return True
        iid = order[i]
        task = graph.tasks[iid]
        dur = int(task.def_.duration)
        lo = max(int(task.def_.earliest_start), now)
        for p in graph.preds(iid):
            if p in starts:
                lo = max(lo, starts[p] + int(graph.tasks[p].def_.duration))
        hi = int(task.latest_end) - dur
        resource = task.def_.gate.resource
        for s in range(lo, hi + 1):
            if not fits(resource, s, dur):
                continue
            starts[iid] = s
            claim(resource, s, dur, +1)
            if dfs(i + 1):
                return True
            claim(resource, s, dur, -1)
            del starts[iid]
        return False

    return dict(starts) if dfs(0) else None
