"""Schedule generation under windows, precedence and human-resource capacity.

The scheduler is a serial schedule-generation scheme: repeatedly take the
eligible task minimizing (earliest feasible start, latest_end, robot, def id)
and place it at the earliest time that respects precedence, its window and
the operator / pit-crew capacities.  Greedy placement alone is not a complete
feasibility decision when deadlines meet unit resources, so on greedy failure
a bounded depth-first search over eligible-task orderings takes over; serial
placement orders generate exactly the left-shifted ("active") schedules, and
a feasible instance always admits an active feasible schedule, so the search
is complete within its node budget.

Infeasible-but-relaxable missions go through relax_and_schedule, which widens
latest-end windows of setup/deployment tasks in 60 s multiples until the
greedy scheduler succeeds (the operator is notified whenever slip > 0).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .model import Gate, Phase, Status, Task, TaskGraph
from .temporal import check_consistency

DEFAULT_STEP = 60.0
SEARCH_BUDGET = 20000
PLAN_CADENCE = 1.5  # seconds of mission clock between periodic plan cycles


@dataclass(frozen=True)
class Capacities:
    operator: int = 1
    pit_crew: int = 4

    def for_gate(self, gate: Gate) -> tuple[str, int] | None:
        r = gate.resource
        if r == "operator":
            return ("operator", self.operator)
        if r == "pit_crew":
            return ("pit_crew", self.pit_crew)
        return None


@dataclass(frozen=True)
class Entry:
    instance_id: str
    start: float
    end: float
    frozen: bool = False


@dataclass(frozen=True)
class PlanResult:
    feasible: bool
    entries: dict[str, Entry] = field(default_factory=dict)
    blocked: tuple[str, ...] = ()
    witness: tuple[str, ...] = ()
    planned_at: float = 0.0


@dataclass(frozen=True)
class RelaxedWindow:
    instance_id: str
    original: float
    relaxed: float


@dataclass(frozen=True)
class RelaxOutcome:
    feasible: bool
    hard_infeasible: bool = False
    entries: dict[str, Entry] = field(default_factory=dict)
    blocked: tuple[str, ...] = ()
    relaxed: tuple[RelaxedWindow, ...] = ()
    total_slip: float = 0.0
    notify_operator: bool = False
    witness: tuple[str, ...] = ()


@dataclass(frozen=True)
class _Failure:
    instance_id: str
    earliest_end: float
    limit: float


class _Busy:
    """Per-resource interval sets with capacity-aware earliest-slot search."""

    def __init__(self) -> None:
        self.intervals: dict[str, list[tuple[float, float]]] = {
            "operator": [],
            "pit_crew": [],
        }

    def occupy(self, resource: str, start: float, end: float) -> None:
        self.intervals[resource].append((start, end))

    def release_copy(self) -> "_Busy":
        c = _Busy()
        c.intervals = {k: list(v) for k, v in self.intervals.items()}
        return c

    def earliest_slot(self, resource: str | None, capacity: int, lb: float, dur: float) -> float:
        """First t >= lb where adding [t, t+dur) keeps usage within capacity.

        Advancing to the earliest end among currently blocking intervals is
        safe: every point before that end keeps the same blockers in view.
        """
        if resource is None:
            return lb
        busy = self.intervals[resource]
        t = lb
        while True:
            overlapping = [(s, e) for (s, e) in busy if s < t + dur and e > t]
            if self._fits(overlapping, t, t + dur, capacity):
                return t
            t = min(e for (_, e) in overlapping)

    @staticmethod
    def _fits(overlapping: list[tuple[float, float]], lo: float, hi: float, capacity: int) -> bool:
        # peak concurrent count within [lo, hi); ends release before starts claim
        events: list[tuple[float, int]] = []
        for s, e in overlapping:
            events.append((max(s, lo), 1))
            events.append((min(e, hi), -1))
        events.sort(key=lambda ev: (ev[0], ev[1]))
        count = peak = 0
        for _, delta in events:
            count += delta
            peak = max(peak, count)
        return peak + 1 <= capacity


def blocked_tasks(graph: TaskGraph) -> set[str]:
    """Pending tasks with a (transitively) failed predecessor."""
    failed = {iid for iid, t in graph.tasks.items() if t.status == Status.FAILED}
    out: set[str] = set()
    changed = True
    while changed:
        changed = False
        for iid, task in graph.tasks.items():
            if iid in out or task.status in (Status.SUCCEEDED, Status.FAILED):
                continue
            if any(p in failed or p in out for p in graph.preds(iid)):
                out.add(iid)
                changed = True
    return out


def _schedulable(graph: TaskGraph, frozen: Mapping[str, tuple[float, float]]) -> tuple[list[str], set[str]]:
    blocked = blocked_tasks(graph)
    todo = [
        iid
        for iid, t in graph.tasks.items()
        if t.status == Status.PENDING and iid not in blocked and iid not in frozen
    ]
    return todo, blocked


def _sort_key(graph: TaskGraph, iid: str, est: float) -> tuple:
    t = graph.tasks[iid]
    # def-level latest_end on purpose: relaxation must not reshuffle priority,
    # otherwise repeated plan cycles would flap between orderings
    return (est, t.def_.latest_end, t.robot, t.def_.id)


def _greedy(
    graph: TaskGraph,
    now: float,
    frozen: Mapping[str, tuple[float, float]],
    capacities: Capacities,
    extra_window: Mapping[str, float] | None = None,
) -> tuple[dict[str, Entry], _Failure | None, set[str]]:
    extra_window = extra_window or {}
    todo, blocked = _schedulable(graph, frozen)
    placed: dict[str, Entry] = {}
    busy = _Busy()
    for iid, (s, e) in frozen.items():
        task = graph.tasks.get(iid)
        if task is None or task.status in (Status.SUCCEEDED, Status.FAILED):
            continue
        placed[iid] = Entry(iid, s, e, frozen=True)
        res = capacities.for_gate(task.def_.gate)
        if res:
            busy.occupy(res[0], s, e)

    remaining = set(todo)
    while remaining:
        eligible: list[tuple[tuple, str, float]] = []
        for iid in remaining:
            preds = graph.preds(iid)
            if not all(
                p in placed or graph.tasks[p].status == Status.SUCCEEDED for p in preds
            ):
                continue
            task = graph.tasks[iid]
            est = max(task.def_.earliest_start, now)
            for p in preds:
                if p in placed:
                    est = max(est, placed[p].end)
            eligible.append((_sort_key(graph, iid, est), iid, est))
        if not eligible:
            # only possible if a pred was neither blocked nor schedulable;
            # treat as internal error surfaced as infeasible
            iid = sorted(remaining)[0]
            return placed, _Failure(iid, math.inf, graph.tasks[iid].latest_end), blocked
        eligible.sort()
        _, iid, est = eligible[0]
        task = graph.tasks[iid]
        res = capacities.for_gate(task.def_.gate)
        slot = busy.earliest_slot(res[0] if res else None, res[1] if res else 0, est, task.def_.duration)
        end = slot + task.def_.duration
        limit = task.latest_end + extra_window.get(iid, 0.0)
        if end > limit + 1e-9:
            return placed, _Failure(iid, end, limit), blocked
        placed[iid] = Entry(iid, slot, end)
        if res:
            busy.occupy(res[0], slot, end)
        remaining.discard(iid)
    return placed, None, blocked


def _search(
    graph: TaskGraph,
    now: float,
    frozen: Mapping[str, tuple[float, float]],
    capacities: Capacities,
    budget: int = SEARCH_BUDGET,
) -> dict[str, Entry] | None:
    """DFS over serial placement orders; complete for small instances."""
    todo, _ = _schedulable(graph, frozen)
    base: dict[str, Entry] = {}
    busy = _Busy()
    for iid, (s, e) in frozen.items():
        task = graph.tasks.get(iid)
        if task is None or task.status in (Status.SUCCEEDED, Status.FAILED):
            continue
        base[iid] = Entry(iid, s, e, frozen=True)
        res = capacities.for_gate(task.def_.gate)
        if res:
            busy.occupy(res[0], s, e)

    nodes = [0]

    def place_candidates(placed: dict[str, Entry], busy: _Busy, remaining: set[str]):
        out = []
        for iid in remaining:
            preds = graph.preds(iid)
            ok = all(
                (p in placed) or (p in graph.tasks and graph.tasks[p].status == Status.SUCCEEDED)
                for p in preds
            )
            if not ok:
                continue
            task = graph.tasks[iid]
            est = max(task.def_.earliest_start, now)
            for p in preds:
                if p in placed:
                    est = max(est, placed[p].end)
            res = capacities.for_gate(task.def_.gate)
            slot = busy.earliest_slot(res[0] if res else None, res[1] if res else 0, est, task.def_.duration)
            end = slot + task.def_.duration
            out.append((_sort_key(graph, iid, est), iid, slot, end, res))
        out.sort()
        return out

    def dfs(placed: dict[str, Entry], busy: _Busy, remaining: set[str]) -> dict[str, Entry] | None:
        if not remaining:
            return placed
        nodes[0] += 1
        if nodes[0] > budget:
            return None
        cands = place_candidates(placed, busy, remaining)
        # if any currently-eligible task already misses its window, no
        # later ordering can save it: placements only push it further out
        for _, iid, slot, end, _res in cands:
            if end > graph.tasks[iid].latest_end + 1e-9:
                return None
        for _, iid, slot, end, res in cands:
            nplaced = dict(placed)
            nplaced[iid] = Entry(iid, slot, end)
            nbusy = busy.release_copy()
            if res:
                nbusy.occupy(res[0], slot, end)
            found = dfs(nplaced, nbusy, remaining - {iid})
            if found is not None:
                return found
            if nodes[0] > budget:
                return None
        return None

    return dfs(base, busy, set(todo))


def schedule(
    graph: TaskGraph,
    now: float = 0.0,
    frozen: Mapping[str, tuple[float, float]] | None = None,
    capacities: Capacities = Capacities(),
) -> PlanResult:
    """Resource-feasible schedule for every schedulable task, or infeasible.

    Frozen tasks (already dispatched) keep their given intervals; succeeded
    and failed tasks get no entry, and pending tasks downstream of a failure
    are reported in `blocked` rather than scheduled.
    """
    frozen = dict(frozen or {})
    _, blocked = _schedulable(graph, frozen)
    stn = check_consistency(
        graph, now, started={iid: s for iid, (s, _) in frozen.items()}, exclude=blocked
    )
    if not stn.consistent:
        return PlanResult(False, blocked=tuple(sorted(blocked)), witness=stn.witness, planned_at=now)
    placed, failure, blocked = _greedy(graph, now, frozen, capacities)
    if failure is None:
        return PlanResult(True, placed, tuple(sorted(blocked)), planned_at=now)
    found = _search(graph, now, frozen, capacities)
    if found is not None:
        return PlanResult(True, found, tuple(sorted(blocked)), planned_at=now)
    task = graph.tasks[failure.instance_id]
    gate = task.def_.gate
    resource = gate.resource or "none"
    witness = (
        f"cannot place {failure.instance_id} inside its window: earliest "
        f"feasible end {failure.earliest_end:g} exceeds latest_end {failure.limit:g}"
        + (f" (competing for {resource})" if gate.resource else ""),
    )
    return PlanResult(False, placed, tuple(sorted(blocked)), witness, planned_at=now)


def relax_and_schedule(
    graph: TaskGraph,
    now: float = 0.0,
    frozen: Mapping[str, tuple[float, float]] | None = None,
    capacities: Capacities = Capacities(),
    step: float = DEFAULT_STEP,
    max_slip: float | None = None,
) -> RelaxOutcome:
    """Widen setup/deployment windows until the serial scheduler succeeds.

    Each round relaxes the first task that fails placement by the smallest
    multiple of `step` that admits its earliest feasible end.  Because greedy
    placement is deterministic and the failing task's slot depends only on
    the tasks placed before it, this equals stepping +60 repeatedly, so the
    returned total_slip is minimal for this policy: rerunning with
    max_slip = total_slip - step hard-fails.
    """
    frozen = dict(frozen or {})
    cap = math.inf if max_slip is None else max_slip
    extra: dict[str, float] = {}
    total = 0.0
    while True:
        placed, failure, blocked = _greedy(graph, now, frozen, capacities, extra)
        if failure is None:
            relaxed = tuple(
                RelaxedWindow(iid, graph.tasks[iid].latest_end, graph.tasks[iid].latest_end + bump)
                for iid, bump in sorted(extra.items())
            )
            return RelaxOutcome(
                feasible=True,
                entries=placed,
                blocked=tuple(sorted(blocked)),
                relaxed=relaxed,
                total_slip=total,
                notify_operator=total > 0,
            )
        task = graph.tasks[failure.instance_id]
        if task.def_.phase not in (Phase.SETUP, Phase.DEPLOYMENT):
            return RelaxOutcome(
                feasible=False,
                hard_infeasible=True,
                blocked=tuple(sorted(blocked)),
                total_slip=total,
                witness=(
                    f"{failure.instance_id} misses its window and {task.def_.phase.value} "
                    "tasks are not relaxable",
                ),
            )
        if not math.isfinite(failure.earliest_end):
            return RelaxOutcome(
                feasible=False,
                hard_infeasible=True,
                blocked=tuple(sorted(blocked)),
                total_slip=total,
                witness=(f"{failure.instance_id} cannot be placed at any time",),
            )
        need = failure.earliest_end - failure.limit
        bump = math.ceil(need / step - 1e-9) * step
        bump = max(bump, step)
        if total + bump > cap + 1e-9:
            return RelaxOutcome(
                feasible=False,
                hard_infeasible=True,
                blocked=tuple(sorted(blocked)),
                relaxed=tuple(
                    RelaxedWindow(iid, graph.tasks[iid].latest_end, graph.tasks[iid].latest_end + b)
                    for iid, b in sorted(extra.items())
                ),
                total_slip=total,
                witness=(
                    f"relaxing {failure.instance_id} needs {bump:g}s more slip; "
                    f"budget {cap:g}s would be exceeded (used {total:g}s)",
                ),
            )
        extra[failure.instance_id] = extra.get(failure.instance_id, 0.0) + bump
        total += bump


def validate_schedule(
    graph: TaskGraph,
    entries: Mapping[str, Entry],
    now: float = 0.0,
    frozen: Mapping[str, tuple[float, float]] | None = None,
    capacities: Capacities = Capacities(),
    window_extensions: Mapping[str, float] | None = None,
) -> list[str]:
    """Independent constraint check; returns human-readable violations.

    Deliberately shares no placement logic with the scheduler: it just reads
    the final intervals and tests every contract directly.
    """
    frozen = frozen or {}
    window_extensions = window_extensions or {}
    problems: list[str] = []
    blocked = blocked_tasks(graph)
    for iid, task in graph.tasks.items():
        if task.status in (Status.SUCCEEDED, Status.FAILED):
            if iid in entries and not entries[iid].frozen:
                problems.append(f"{iid}: terminal task has a schedule entry")
            continue
        if iid in blocked:
            if iid in entries:
                problems.append(f"{iid}: blocked by a failed predecessor but scheduled")
            continue
        if iid not in entries:
            problems.append(f"{iid}: missing from schedule")
            continue
        e = entries[iid]
        limit = task.latest_end + window_extensions.get(iid, 0.0)
        if iid in frozen:
            fs, fe = frozen[iid]
            if abs(e.start - fs) > 1e-9:
                problems.append(f"{iid}: frozen start moved from {fs:g} to {e.start:g}")
            continue
        if abs((e.end - e.start) - task.def_.duration) > 1e-9:
            problems.append(f"{iid}: length {e.end - e.start:g} != duration {task.def_.duration:g}")
        if e.start < task.def_.earliest_start - 1e-9:
            problems.append(f"{iid}: starts {e.start:g} before earliest_start {task.def_.earliest_start:g}")
        if e.start < now - 1e-9:
            problems.append(f"{iid}: starts {e.start:g} before now {now:g}")
        if e.end > limit + 1e-9:
            problems.append(f"{iid}: ends {e.end:g} after latest_end {limit:g}")
    for iid, e in entries.items():
        task = graph.tasks.get(iid)
        if task is None:
            problems.append(f"{iid}: unknown task scheduled")
            continue
        for p in graph.preds(iid):
            pt = graph.tasks.get(p)
            if pt is not None and pt.status == Status.SUCCEEDED:
                continue
            if p in entries:
                if entries[p].end > e.start + 1e-9:
                    problems.append(f"{iid}: starts {e.start:g} before predecessor {p} ends {entries[p].end:g}")
            elif iid in entries and p not in blocked and pt is not None and pt.status != Status.FAILED:
                problems.append(f"{iid}: predecessor {p} is unscheduled")
    for resource, capacity in (("operator", capacities.operator), ("pit_crew", capacities.pit_crew)):
        events: list[tuple[float, int, str]] = []
        for iid, e in entries.items():
            task = graph.tasks.get(iid)
            if task is None:
                continue
            if task.def_.gate.resource == resource:
                events.append((e.start, 1, iid))
                events.append((e.end, -1, iid))
        events.sort(key=lambda ev: (ev[0], ev[1]))
        count = 0
        for t, delta, iid in events:
            count += delta
            if count > capacity:
                problems.append(f"{resource} capacity {capacity} exceeded at t={t:g} (adding {iid})")
                break
    return problems


class PlanService:
    """Owns the plan cadence: runs relax_and_schedule, persists outcomes.

    Plans are persisted only when the entry set changes; otherwise a compact
    plan-unchanged marker references the live plan.  Single-flight: concurrent
    triggers coalesce behind one lock instead of stacking replans.
    """

    def __init__(
        self,
        store,
        capacities: Capacities,
        step: float = DEFAULT_STEP,
        max_slip: float | None = None,
        cadence: float = PLAN_CADENCE,
    ) -> None:
        self.store = store
        self.capacities = capacities
        self.step = step
        self.max_slip = max_slip
        self.cadence = cadence
        self.plan_seq: int | None = None  # seq of the event holding current entries
        self.last_outcome: RelaxOutcome | None = None
        self._last_payload_entries: list | None = None
        self._lock = threading.Lock()

    @staticmethod
    def entries_payload(entries: Mapping[str, Entry]) -> list[dict]:
        ordered = sorted(entries.values(), key=lambda e: (e.start, e.instance_id))
        return [
            {"task": e.instance_id, "start": e.start, "end": e.end, "frozen": e.frozen}
            for e in ordered
        ]

    def plan_cycle(
        self,
        graph: TaskGraph,
        now: float,
        frozen: Mapping[str, tuple[float, float]] | None,
        trigger: str,
        apply_relaxation: Callable[[Iterable[RelaxedWindow]], None] | None = None,
    ) -> RelaxOutcome:
        with self._lock:
            outcome = relax_and_schedule(
                graph,
                now,
                frozen,
                self.capacities,
                step=self.step,
                max_slip=self.max_slip,
            )
            if outcome.relaxed and self.store is not None:
                self.store.append(
                    "relaxation",
                    {
                        "trigger": trigger,
                        "total_slip": outcome.total_slip,
                        "notify_operator": outcome.notify_operator,
                        "relaxed": [
                            {"task": r.instance_id, "original": r.original, "relaxed": r.relaxed}
                            for r in outcome.relaxed
                        ],
                    },
                    at=now,
                )
            if outcome.relaxed and apply_relaxation is not None:
                apply_relaxation(outcome.relaxed)
            if outcome.hard_infeasible:
                if self.store is not None:
                    self.store.append(
                        "plan",
                        {"trigger": trigger, "feasible": False, "witness": list(outcome.witness)},
                        at=now,
                    )
                self.last_outcome = outcome
                return outcome
            payload_entries = self.entries_payload(outcome.entries)
            if self.store is not None:
                if payload_entries == self._last_payload_entries and self.plan_seq is not None:
                    self.store.append(
                        "plan",
                        {"trigger": trigger, "unchanged": True, "plan_seq": self.plan_seq},
                        at=now,
                    )
                else:
                    seq = self.store.append(
                        "plan",
                        {
                            "trigger": trigger,
                            "feasible": True,
                            "entries": payload_entries,
                            "blocked": list(outcome.blocked),
                        },
                        at=now,
                    )
                    self.plan_seq = seq
                    self._last_payload_entries = payload_entries
            else:
                if payload_entries != self._last_payload_entries:
                    self.plan_seq = (self.plan_seq or 0) + 1
                    self._last_payload_entries = payload_entries
            self.last_outcome = outcome
            return outcome
