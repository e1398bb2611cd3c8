"""Event-sourced mission state: append-only log, fold, queries.

The log is newline-delimited JSON, one record per line with fields
{seq, at, wall, kind, payload}.  `at` is the mission clock in seconds,
`wall` a Unix timestamp.  State is a pure fold over the log: the in-memory
snapshot is maintained incrementally on append and can always be reproduced
from the file alone.

A mission begins with an operator-command event whose payload carries the
full template document and robot roster, so a log is self-contained: replay
rebuilds the task graph without any external file.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .model import (
    MissionTemplate,
    Status,
    Task,
    TaskGraph,
    generate_tasks,
    parse_template,
)

EVENT_KINDS = frozenset(
    {
        "task-status",
        "gate",
        "plan",
        "relaxation",
        "robot-health",
        "course-entry",
        "artifact",
        "cursor-sample",
        "view-switch",
        "operator-command",
    }
)


@dataclass(frozen=True)
class Event:
    seq: int
    at: float
    wall: float
    kind: str
    payload: dict

    def to_json(self) -> str:
        record = {
            "seq": self.seq,
            "at": self.at,
            "wall": self.wall,
            "kind": self.kind,
            "payload": self.payload,
        }
        return json.dumps(record, separators=(",", ":"))


class CorruptRecordError(ValueError):
    def __init__(self, seq: int, reason: str) -> None:
        super().__init__(f"corrupt record at seq {seq}: {reason}")
        self.seq = seq


def _parse_record(line: str, expected_seq: int) -> Event:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptRecordError(expected_seq, f"not valid JSON ({exc.msg})") from None
    if not isinstance(record, dict):
        raise CorruptRecordError(expected_seq, "record is not an object")
    missing = {"seq", "at", "wall", "kind", "payload"} - record.keys()
    if missing:
        raise CorruptRecordError(expected_seq, f"missing fields {sorted(missing)}")
    if record["seq"] != expected_seq:
        raise CorruptRecordError(
            expected_seq, f"sequence gap (found seq {record['seq']})"
        )
    if record["kind"] not in EVENT_KINDS:
        raise CorruptRecordError(expected_seq, f"unknown kind {record['kind']!r}")
    return Event(
        seq=record["seq"],
        at=float(record["at"]),
        wall=float(record["wall"]),
        kind=record["kind"],
        payload=record["payload"],
    )


def read_log(path: str | Path) -> list[Event]:
    events: list[Event] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip() == "":
                continue
            events.append(_parse_record(line, len(events)))
    return events


def write_log(events: Iterable[Event], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(event.to_json() + "\n")


# -- snapshot fold -----------------------------------------------------------


@dataclass
class MissionSnapshot:
    tasks: dict[str, Task] = field(default_factory=dict)
    graph: TaskGraph | None = None
    template: MissionTemplate | None = None
    template_doc: dict | None = None
    roster: list[str] = field(default_factory=list)
    schedule: list[dict] = field(default_factory=list)
    plan: dict = field(default_factory=dict)
    robots: dict[str, dict] = field(default_factory=dict)
    gates: dict[str, dict] = field(default_factory=dict)
    artifacts: list[dict] = field(default_factory=list)
    budget: int | None = None
    course: dict | None = None
    course_entries: list[dict] = field(default_factory=list)
    scenario: str | None = None
    view: str = "mission"
    cursor_samples: int = 0
    clock: float = 0.0
    last_seq: int = -1

    def artifact(self, artifact_id: str) -> dict | None:
        for report in self.artifacts:
            if report["id"] == artifact_id:
                return report
        return None


def _set_graph(snapshot: MissionSnapshot, roster: list[str]) -> None:
    graph = generate_tasks(snapshot.template, roster)
    for iid, task in graph.tasks.items():
        old = snapshot.tasks.get(iid)
        if old is not None:
            task.status = old.status
            task.attempts = old.attempts
            task.deadline_extension = old.deadline_extension
    snapshot.graph = graph
    snapshot.tasks = graph.tasks
    snapshot.roster = list(roster)


def _fold_operator_command(snapshot: MissionSnapshot, payload: dict) -> None:
    command = payload.get("command")
    if command == "start-mission":
        snapshot.template_doc = payload["template"]
        snapshot.template = parse_template(payload["template"])
        snapshot.tasks = {}
        snapshot.scenario = payload.get("scenario")
        snapshot.budget = payload.get("budget")
        snapshot.course = payload.get("course")
        _set_graph(snapshot, payload["roster"])
    elif command == "select-robots":
        if snapshot.template is not None:
            _set_graph(snapshot, payload["roster"])
    # other commands (waypoints, gate answers, reviews) act through the
    # events they trigger; the command record itself is just an audit entry


def _fold_task_status(snapshot: MissionSnapshot, payload: dict) -> None:
    affected = payload.get("affected")
    if affected:
        for iid in affected:
            task = snapshot.tasks.get(iid)
            if task is not None:
                task.status = Status.PENDING
                task.attempts = 0
            snapshot.gates.pop(iid, None)
        return
    task = snapshot.tasks.get(payload["task"])
    if task is None:
        return
    task.status = Status(payload["status"])
    task.attempts = payload.get("attempt", task.attempts)


def _fold_gate(snapshot: MissionSnapshot, payload: dict) -> None:
    if payload["action"] == "requested":
        snapshot.gates[payload["task"]] = {
            "task": payload["task"],
            "gate": payload["gate"],
            "prompt": payload["prompt"],
            "robot": payload["robot"],
        }
    else:  # resolved or cancelled
        snapshot.gates.pop(payload["task"], None)


def _fold_plan(snapshot: MissionSnapshot, payload: dict) -> None:
    if payload.get("unchanged"):
        snapshot.plan = {**snapshot.plan, "trigger": payload["trigger"]}
        return
    snapshot.plan = {
        "trigger": payload["trigger"],
        "feasible": payload["feasible"],
        "plan_seq": payload.get("plan_seq"),
    }
    if payload["feasible"]:
        snapshot.schedule = payload["entries"]
        snapshot.plan["blocked"] = payload.get("blocked", [])
    else:
        snapshot.plan["witness"] = payload.get("witness", [])


def _fold_relaxation(snapshot: MissionSnapshot, payload: dict) -> None:
    for window in payload.get("relaxed", []):
        task = snapshot.tasks.get(window["task"])
        if task is not None:
            task.deadline_extension += window["relaxed"] - window["original"]


def _fold_robot_health(snapshot: MissionSnapshot, payload: dict) -> None:
    robot = payload["robot"]
    state = snapshot.robots.setdefault(robot, {"robot": robot})
    state.update({k: v for k, v in payload.items() if k != "robot"})


def _fold_course_entry(snapshot: MissionSnapshot, payload: dict, at: float) -> None:
    snapshot.course_entries.append(
        {"robot": payload["robot"], "at": at, "since_open": payload["since_open"]}
    )
    snapshot.robots.setdefault(payload["robot"], {"robot": payload["robot"]})[
        "in_course"
    ] = True


def _fold_artifact(snapshot: MissionSnapshot, payload: dict, at: float) -> None:
    action = payload["action"]
    if action == "detected":
        snapshot.artifacts.append(
            {
                "id": payload["id"],
                "robot": payload["robot"],
                "class": payload["class"],
                "confidence": payload["confidence"],
                "position": payload["position"],
                "at": at,
                "status": "unreviewed",
                "reviewed_in": 0.0,
                "opened_at": None,
            }
        )
        return
    report = snapshot.artifact(payload["id"])
    if report is None:
        return
    if action == "open":
        report["status"] = "in_review"
        report["opened_at"] = at
    elif action == "adjust":
        for key in ("class", "position"):
            if key in payload:
                report[key] = payload[key]
    elif action in ("accept", "reject"):
        if report.get("opened_at") is not None:
            report["reviewed_in"] += at - report["opened_at"]
            report["opened_at"] = None
        report["status"] = "accepted" if action == "accept" else "rejected"
    elif action == "submit":
        if report.get("opened_at") is not None:  # submit is terminal too
            report["reviewed_in"] += at - report["opened_at"]
            report["opened_at"] = None
        report["status"] = "submitted"
        if snapshot.budget is not None:
            snapshot.budget = max(0, snapshot.budget - 1)
    elif action == "scored":
        report["correct"] = payload["correct"]
        if "truth" in payload:
            report["truth"] = payload["truth"]


def fold(snapshot: MissionSnapshot, event: Event) -> MissionSnapshot:
    """Apply one event in place; returns the same snapshot for chaining."""
    kind, payload = event.kind, event.payload
    if kind == "operator-command":
        _fold_operator_command(snapshot, payload)
    elif kind == "task-status":
        _fold_task_status(snapshot, payload)
    elif kind == "gate":
        _fold_gate(snapshot, payload)
    elif kind == "plan":
        _fold_plan(snapshot, payload)
    elif kind == "relaxation":
        _fold_relaxation(snapshot, payload)
    elif kind == "robot-health":
        _fold_robot_health(snapshot, payload)
    elif kind == "course-entry":
        _fold_course_entry(snapshot, payload, event.at)
    elif kind == "artifact":
        _fold_artifact(snapshot, payload, event.at)
    elif kind == "cursor-sample":
        snapshot.cursor_samples += 1
    elif kind == "view-switch":
        snapshot.view = payload["view"]
    snapshot.clock = event.at
    snapshot.last_seq = event.seq
    return snapshot


def replay(events: Iterable[Event]) -> MissionSnapshot:
    snapshot = MissionSnapshot()
    for event in events:
        fold(snapshot, event)
    return snapshot


def replay_log(path: str | Path) -> MissionSnapshot:
    return replay(read_log(path))


def query_tasks(
    snapshot: MissionSnapshot,
    statuses: Iterable[Status | str] | None = None,
    robots: Iterable[str] | None = None,
) -> list[Task]:
    """Filtered task list, ordered by (robot, scheduled start, instance id)."""
    wanted_status = None if statuses is None else {Status(s) for s in statuses}
    wanted_robot = None if robots is None else set(robots)
    starts = {e["task"]: e["start"] for e in snapshot.schedule}
    out = [
        t
        for t in snapshot.tasks.values()
        if (wanted_status is None or t.status in wanted_status)
        and (wanted_robot is None or t.robot in wanted_robot)
    ]
    out.sort(key=lambda t: (t.robot, starts.get(t.instance_id, math.inf), t.instance_id))
    return out


# -- the store ---------------------------------------------------------------


class EventStore:
    """Single-writer append log with an incrementally folded snapshot.

    Opening an existing log replays it and continues numbering from the
    last record.  Appends are flushed before returning.  `wall_clock` is a
    hook so simulations can stamp deterministic wall times.
    """

    def __init__(
        self,
        path: str | Path | None = None,
        wall_clock: Callable[[], float] | None = None,
    ) -> None:
        self.path = Path(path) if path is not None else None
        self.wall_clock = wall_clock or time.time
        self.events: list[Event] = []
        self._snapshot = MissionSnapshot()
        self._cond = threading.Condition()
        self._subscribers: list[Callable[[Event], None]] = []
        self._fh = None
        if self.path is not None:
            if self.path.exists():
                for event in read_log(self.path):
                    self.events.append(event)
                    fold(self._snapshot, event)
            self._fh = open(self.path, "a", encoding="utf-8")

    # introspection

    @property
    def snapshot(self) -> MissionSnapshot:
        return self._snapshot

    @property
    def next_seq(self) -> int:
        return len(self.events)

    def events_since(self, seq: int) -> list[Event]:
        """Events with seq >= the given value (0 returns everything)."""
        if seq <= 0:
            return list(self.events)
        return self.events[seq:]

    def wait_for(self, seq: int, timeout: float | None = None) -> list[Event]:
        """Block until events at or beyond seq exist; [] on timeout."""
        with self._cond:
            self._cond.wait_for(lambda: len(self.events) > seq, timeout=timeout)
            return self.events[seq:]

    # mutation

    def append(self, kind: str, payload: dict, at: float, wall: float | None = None) -> int:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        event = Event(
            seq=len(self.events),
            at=at,
            wall=self.wall_clock() if wall is None else wall,
            kind=kind,
            payload=payload,
        )
        if self._fh is not None:
            self._fh.write(event.to_json() + "\n")
            self._fh.flush()
        with self._cond:
            self.events.append(event)
            fold(self._snapshot, event)
            self._cond.notify_all()
        for fn in list(self._subscribers):
            fn(event)
        return event.seq

    def subscribe(self, fn: Callable[[Event], None]) -> Callable[[], None]:
        self._subscribers.append(fn)

        def cancel() -> None:
            if fn in self._subscribers:
                self._subscribers.remove(fn)

        return cancel

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "EventStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
