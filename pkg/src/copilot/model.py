"""Mission templates and generated task graphs.

A mission is described once as a template (base-station tasks plus a per-robot
task list) and instantiated for a concrete roster.  Everything downstream --
planner, executor, store -- works on the generated :class:`TaskGraph`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from heapq import heappush, heappop
from pathlib import Path
from typing import Any, Iterable

try:
    from importlib import resources as _resources
except ImportError:  # pragma: no cover
    _resources = None

SCHEMA_VERSION = 1

# Robot key used for base-station task instances.  Sorts ahead of typical
# robot ids ("base" < "spotN"), which the ordering tie-break relies on.
BASE = "base"


class Scope(str, Enum):
    SAME_ROBOT = "same_robot"
    BASE = "base"
    ALL_ROBOTS = "all_robots"


class Gate(str, Enum):
    NONE = "none"
    PRE_OPERATOR = "pre_operator"
    PRE_PITCREW = "pre_pitcrew"
    SIGNOFF_OPERATOR = "signoff_operator"
    SIGNOFF_PITCREW = "signoff_pitcrew"
    GONOGO = "gonogo"

    @property
    def is_pre(self) -> bool:
        """True when the gate blocks execution start (vs. completion)."""
        return self in (Gate.PRE_OPERATOR, Gate.PRE_PITCREW, Gate.GONOGO)

    @property
    def resource(self) -> str | None:
        """Which human the gate occupies: 'operator', 'pit_crew' or None."""
        if self in (Gate.PRE_OPERATOR, Gate.SIGNOFF_OPERATOR, Gate.GONOGO):
            return "operator"
        if self in (Gate.PRE_PITCREW, Gate.SIGNOFF_PITCREW):
            return "pit_crew"
        return None


class Phase(str, Enum):
    SETUP = "setup"
    DEPLOYMENT = "deployment"
    EXPLORATION = "exploration"


class Status(str, Enum):
    PENDING = "pending"
    AWAITING_GATE = "awaiting_gate"
    ACTIVE = "active"
    SUCCEEDED = "succeeded"
    FAILED = "failed"

TERMINAL = (Status.SUCCEEDED, Status.FAILED)


class TemplateError(ValueError):
    """Template document rejected; `field` names the offending element."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    """Dependency cycle; `members` lists the instance ids on the cycle."""

    def __init__(self, members: list[str]):
        self.members = members
        super().__init__("dependency cycle: " + " -> ".join(members + members[:1]))


@dataclass(frozen=True)
class Dep:
    task: str
    scope: Scope


@dataclass(frozen=True)
class TaskDef:
    id: str
    label: str
    duration: float
    earliest_start: float
    latest_end: float
    deps: tuple[Dep, ...] = ()
    gate: Gate = Gate.NONE
    phase: Phase = Phase.SETUP


@dataclass(frozen=True)
class Resources:
    operator_capacity: int = 1
    pit_crew_capacity: int = 4


@dataclass(frozen=True)
class MissionTemplate:
    base_tasks: tuple[TaskDef, ...]
    robot_tasks: tuple[TaskDef, ...]
    setup_window: tuple[float, float]
    exploration_window: tuple[float, float]
    resources: Resources = Resources()

    def def_by_id(self, def_id: str) -> TaskDef:
        for d in self.base_tasks + self.robot_tasks:
            if d.id == def_id:
                return d
        raise KeyError(def_id)


@dataclass
class Task:
    """One instance of a TaskDef, bound to a robot (or the base station)."""

    instance_id: str
    def_: TaskDef
    robot: str
    status: Status = Status.PENDING
    attempts: int = 0
    deadline_extension: float = 0.0

    @property
    def latest_end(self) -> float:
        return self.def_.latest_end + self.deadline_extension

    def sort_key(self) -> tuple[str, str]:
        return (self.robot, self.def_.id)


@dataclass
class TaskGraph:
    tasks: dict[str, Task]
    # edges[b] = set of instance ids that must succeed before b may start
    edges: dict[str, set[str]] = field(default_factory=dict)

    def preds(self, instance_id: str) -> set[str]:
        return self.edges.get(instance_id, set())

    def succs(self, instance_id: str) -> set[str]:
        return {b for b, preds in self.edges.items() if instance_id in preds}

    def __len__(self) -> int:
        return len(self.tasks)


# ---------------------------------------------------------------------------
# template loading

_GATES = {g.value for g in Gate}
_SCOPES = {s.value for s in Scope}
_PHASES = {p.value for p in Phase}


def _num(doc: dict, path: str, key: str) -> float:
    v = doc.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise TemplateError(f"{path}.{key}", f"expected a number, got {v!r}")
    return float(v)


def _parse_def(doc: Any, path: str) -> TaskDef:
    if not isinstance(doc, dict):
        raise TemplateError(path, "task entry must be an object")
    for key in ("id", "label"):
        if not isinstance(doc.get(key), str) or not doc.get(key):
            raise TemplateError(f"{path}.{key}", "required non-empty string")
    duration = _num(doc, path, "duration")
    if duration <= 0:
        raise TemplateError(f"{path}.duration", "duration must be positive")
    earliest = _num(doc, path, "earliest_start")
    latest = _num(doc, path, "latest_end")
    if earliest + duration > latest:
        raise TemplateError(
            f"{path}.latest_end",
            f"window shorter than duration: {earliest} + {duration} > {latest}",
        )
    gate = doc.get("gate", "none")
    if gate not in _GATES:
        raise TemplateError(f"{path}.gate", f"unknown gate {gate!r}")
    phase = doc.get("phase", "setup")
    if phase not in _PHASES:
        raise TemplateError(f"{path}.phase", f"unknown phase {phase!r}")
    if gate == Gate.GONOGO.value and phase != Phase.DEPLOYMENT.value:
        raise TemplateError(f"{path}.phase", "gonogo-gated tasks belong to the deployment phase")
    deps: list[Dep] = []
    for i, dep in enumerate(doc.get("deps", [])):
        if not isinstance(dep, dict) or "task" not in dep:
            raise TemplateError(f"{path}.deps[{i}]", "dependency must be {task, scope}")
        scope = dep.get("scope", "same_robot")
        if scope not in _SCOPES:
            raise TemplateError(f"{path}.deps[{i}].scope", f"unknown scope {scope!r}")
        deps.append(Dep(task=dep["task"], scope=Scope(scope)))
    return TaskDef(
        id=doc["id"],
        label=doc["label"],
        duration=duration,
        earliest_start=earliest,
        latest_end=latest,
        deps=tuple(deps),
        gate=Gate(gate),
        phase=Phase(phase),
    )


def _window(doc: Any, path: str) -> tuple[float, float]:
    if (
        not isinstance(doc, (list, tuple))
        or len(doc) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in doc)
    ):
        raise TemplateError(path, "window must be [start, end]")
    lo, hi = float(doc[0]), float(doc[1])
    if hi < lo:
        raise TemplateError(path, f"window end {hi} before start {lo}")
    return (lo, hi)


def parse_template(doc: Any) -> MissionTemplate:
    """Validate a template document (already JSON-decoded)."""
    if not isinstance(doc, dict):
        raise TemplateError("$", "template must be a JSON object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise TemplateError("schema", f"unsupported schema {doc.get('schema')!r}")
    base, robot = [], []
    for kind, out in (("base_tasks", base), ("robot_tasks", robot)):
        entries = doc.get(kind)
        if not isinstance(entries, list):
            raise TemplateError(kind, "expected a list of task definitions")
        for i, entry in enumerate(entries):
            out.append(_parse_def(entry, f"{kind}[{i}]"))
    ids: set[str] = set()
    for d in base + robot:
        if d.id in ids:
            raise TemplateError(f"tasks.{d.id}", "duplicate task id")
        ids.add(d.id)
    base_ids = {d.id for d in base}
    robot_ids = {d.id for d in robot}
    # dependency sanity: references must exist and scopes must point at the
    # right kind of definition
    for kind, defs in (("base_tasks", base), ("robot_tasks", robot)):
        for d in defs:
            for i, dep in enumerate(d.deps):
                where = f"{kind}.{d.id}.deps[{i}]"
                if dep.task not in ids:
                    raise TemplateError(where, f"dangling dependency {dep.task!r}")
                if dep.scope == Scope.SAME_ROBOT:
                    if kind == "base_tasks" or dep.task not in robot_ids:
                        raise TemplateError(
                            where, "same_robot dependencies link robot tasks only"
                        )
                elif dep.scope == Scope.BASE:
                    if dep.task not in base_ids:
                        raise TemplateError(where, f"{dep.task!r} is not a base task")
                elif dep.scope == Scope.ALL_ROBOTS:
                    if dep.task not in robot_ids:
                        raise TemplateError(where, f"{dep.task!r} is not a robot task")
    phases = doc.get("phases")
    if not isinstance(phases, dict):
        raise TemplateError("phases", "expected {setup_window, exploration_window}")
    setup = _window(phases.get("setup_window"), "phases.setup_window")
    exploration = _window(phases.get("exploration_window"), "phases.exploration_window")
    res_doc = doc.get("resources", {})
    if not isinstance(res_doc, dict):
        raise TemplateError("resources", "expected an object")
    resources = Resources(
        operator_capacity=int(res_doc.get("operator_capacity", 1)),
        pit_crew_capacity=int(res_doc.get("pit_crew_capacity", 4)),
    )
    if resources.operator_capacity < 1 or resources.pit_crew_capacity < 1:
        raise TemplateError("resources", "capacities must be >= 1")
    return MissionTemplate(
        base_tasks=tuple(base),
        robot_tasks=tuple(robot),
        setup_window=setup,
        exploration_window=exploration,
        resources=resources,
    )


def load_template(path: str | Path) -> MissionTemplate:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TemplateError("$", f"not valid JSON: {e}") from e
    return parse_template(doc)


def template_to_doc(template: MissionTemplate) -> dict:
    """Inverse of parse_template; used to embed templates in event logs."""

    def def_doc(d: TaskDef) -> dict:
        out: dict[str, Any] = {
            "id": d.id,
            "label": d.label,
            "duration": d.duration,
            "earliest_start": d.earliest_start,
            "latest_end": d.latest_end,
        }
        if d.deps:
            out["deps"] = [{"task": x.task, "scope": x.scope.value} for x in d.deps]
        if d.gate != Gate.NONE:
            out["gate"] = d.gate.value
        if d.phase != Phase.SETUP:
            out["phase"] = d.phase.value
        return out

    return {
        "schema": SCHEMA_VERSION,
        "base_tasks": [def_doc(d) for d in template.base_tasks],
        "robot_tasks": [def_doc(d) for d in template.robot_tasks],
        "phases": {
            "setup_window": list(template.setup_window),
            "exploration_window": list(template.exploration_window),
        },
        "resources": {
            "operator_capacity": template.resources.operator_capacity,
            "pit_crew_capacity": template.resources.pit_crew_capacity,
        },
    }


def default_template() -> MissionTemplate:
    """The shipped mission template (30 min setup, 60 min exploration)."""
    data = (
        _resources.files("copilot").joinpath("data/default_mission.json").read_text()
    )
    return parse_template(json.loads(data))


# ---------------------------------------------------------------------------
# task generation

def instance_id(robot: str, def_id: str) -> str:
    return f"{robot}.{def_id}"


def generate_tasks(template: MissionTemplate, robots: Iterable[str]) -> TaskGraph:
    """Instantiate the template for a roster.

    Base tasks appear once (robot key "base"); every robot task appears once
    per robot.  Dependency edges are wired per scope: same_robot within a
    robot's instances, base onto the single base instance, all_robots fanning
    in from every robot's instance.
    """
    roster = list(robots)
    seen: set[str] = set()
    for r in roster:
        if not r or not isinstance(r, str):
            raise GraphError(f"bad robot id {r!r}")
        if r == BASE:
            raise GraphError(f"robot id {BASE!r} is reserved")
        if r in seen:
            raise GraphError(f"duplicate robot id {r!r}")
        seen.add(r)

    tasks: dict[str, Task] = {}
    for d in template.base_tasks:
        t = Task(instance_id=instance_id(BASE, d.id), def_=d, robot=BASE)
        tasks[t.instance_id] = t
    for r in roster:
        for d in template.robot_tasks:
            t = Task(instance_id=instance_id(r, d.id), def_=d, robot=r)
            tasks[t.instance_id] = t

    edges: dict[str, set[str]] = {}
    for t in tasks.values():
        preds: set[str] = set()
        for dep in t.def_.deps:
            if dep.scope == Scope.SAME_ROBOT:
                preds.add(instance_id(t.robot, dep.task))
            elif dep.scope == Scope.BASE:
                preds.add(instance_id(BASE, dep.task))
            else:  # ALL_ROBOTS
                preds.update(instance_id(r, dep.task) for r in roster)
        if preds:
            edges[t.instance_id] = preds
    return TaskGraph(tasks=tasks, edges=edges)


def topological_order(graph: TaskGraph) -> list[str]:
    """Kahn's algorithm with a (robot, def id) heap for a stable order."""
    indeg = {iid: len(graph.preds(iid)) for iid in graph.tasks}
    heap: list[tuple[str, str, str]] = []
    for iid, task in graph.tasks.items():
        if indeg[iid] == 0:
            heappush(heap, (*task.sort_key(), iid))
    out: list[str] = []
    while heap:
        _, _, iid = heappop(heap)
        out.append(iid)
        for succ in sorted(graph.succs(iid)):
            indeg[succ] -= 1
            if indeg[succ] == 0:
                heappush(heap, (*graph.tasks[succ].sort_key(), succ))
    if len(out) != len(graph.tasks):
        remaining = {iid for iid in graph.tasks if iid not in set(out)}
        members = _find_cycle(graph, remaining)
        raise CycleError(members)
    return out


def _find_cycle(graph: TaskGraph, candidates: set[str]) -> list[str]:
    # walk predecessors within the leftover set until a node repeats
    start = min(candidates)
    seen: list[str] = []
    node = start
    while node not in seen:
        seen.append(node)
        node = min(p for p in graph.preds(node) if p in candidates)
    cycle = seen[seen.index(node):]
    # rotate so the lexicographically smallest member leads; stable for tests
    low = cycle.index(min(cycle))
    return cycle[low:] + cycle[:low]


def clone_graph(graph: TaskGraph) -> TaskGraph:
    tasks = {iid: replace(t) for iid, t in graph.tasks.items()}
    edges = {iid: set(preds) for iid, preds in graph.edges.items()}
    return TaskGraph(tasks=tasks, edges=edges)
