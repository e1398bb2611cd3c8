"""Shared instance builders for planner/executor tests."""

from __future__ import annotations

import random

from copilot.model import Dep, Gate, Phase, Scope, Status, Task, TaskDef, TaskGraph
from copilot.planner import Capacities


def make_task(
    iid: str,
    duration: float,
    earliest: float = 0.0,
    latest: float | None = None,
    gate: Gate = Gate.NONE,
    phase: Phase = Phase.SETUP,
    robot: str | None = None,
    label: str | None = None,
) -> Task:
    if latest is None:
        latest = earliest + duration + 1000.0
    robot = robot if robot is not None else iid.split(".", 1)[0]
    def_id = iid.split(".", 1)[1] if "." in iid else iid
    d = TaskDef(
        id=def_id,
        label=label or def_id.replace("_", " "),
        duration=duration,
        earliest_start=earliest,
        latest_end=latest,
        gate=gate,
        phase=phase,
    )
    return Task(instance_id=iid, def_=d, robot=robot)


def make_graph(tasks: list[Task], edges: dict[str, set[str]] | None = None) -> TaskGraph:
    return TaskGraph(tasks={t.instance_id: t for t in tasks}, edges=edges or {})


def random_instance(rng: random.Random) -> tuple[TaskGraph, Capacities]:
    """Small integer instance: <= 6 tasks, every number <= 20."""
    n = rng.randint(1, 6)
    tasks: list[Task] = []
    for i in range(n):
        dur = rng.randint(1, 8)
        es = rng.randint(0, min(12, 20 - dur))
        le = rng.randint(es + dur, 20)
        roll = rng.random()
        if roll < 0.30:
            gate = rng.choice([Gate.PRE_OPERATOR, Gate.SIGNOFF_OPERATOR, Gate.GONOGO])
        elif roll < 0.50:
            gate = rng.choice([Gate.PRE_PITCREW, Gate.SIGNOFF_PITCREW])
        else:
            gate = Gate.NONE
        phase = Phase.DEPLOYMENT if gate == Gate.GONOGO else Phase.SETUP
        tasks.append(
            make_task(
                f"r{i % 3}.t{i}",
                duration=dur,
                earliest=es,
                latest=le,
                gate=gate,
                phase=phase,
            )
        )
    edges: dict[str, set[str]] = {}
    for i in range(n):
        preds = {tasks[j].instance_id for j in range(i) if rng.random() < 0.3}
        if preds:
            edges[tasks[i].instance_id] = preds
    caps = Capacities(operator=1, pit_crew=rng.choice([1, 2]))
    return make_graph(tasks, edges), caps


def link(graph: TaskGraph, pred: str, succ: str) -> None:
    graph.edges.setdefault(succ, set()).add(pred)


def set_status(graph: TaskGraph, iid: str, status: Status) -> None:
    graph.tasks[iid].status = status
