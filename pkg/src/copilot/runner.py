"""Mission loop: advances the sim, plans on cadence, dispatches, answers gates.

Stage order inside one tick is fixed and documented because event ordering
must be reproducible byte for byte:

    1. sim.step          world moves, health/detection events land
    2. executor.tick     running executions complete or time out
    3. late check        now past a scheduled end -> late-task trigger
    4. plan              on the 1.5 s cadence or any queued trigger
    5. dispatch          pending tasks whose scheduled start arrived
    6. operator model    auto-resolve open gates after the scripted latency
    7. telemetry         synthetic cursor/view stream when enabled

Batch runs never sleep; time_scale only paces live mode.  Wall-clock stamps
come from a fixed epoch plus the mission clock so that two runs of the same
scenario produce identical logs.
"""

from __future__ import annotations

import json
import math
import random
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .executor import CONFIRM, GO, Executor, TaskRuntime, TaskPhase
from .model import (
    Gate,
    MissionTemplate,
    Status,
    TERMINAL,
    default_template,
    generate_tasks,
    template_to_doc,
)
from .planner import Capacities, Entry, PlanService, RelaxedWindow
from .sim import CourseMap, FleetSim, GroundTruth, SimConfig
from .store import EventStore

EPOCH = 1_000_000_000.0  # fixed wall-clock origin for reproducible logs
DT = 0.5
CURSOR_PERIOD = 1.0 / 1.5
SCREEN = (1600, 900)
VIEWS = ("mission", "map", "health", "artifact-drawer")

DEFAULT_ROSTER = ("alpha", "bravo", "charlie", "delta")


@dataclass(frozen=True)
class Scenario:
    name: str = "nominal"
    seed: int = 7
    time_scale: float = 10.0
    dt: float = DT
    detection_rate: float = 0.5
    confidence_distribution: dict = field(
        default_factory=lambda: {"kind": "uniform", "low": 0.0, "high": 1.0}
    )
    flag_threshold: float = 0.4
    budget: int = 40
    explore_seconds: float = 240.0
    max_clock: float = 10_800.0
    gate_latency: float = 0.0
    gate_all_operator: bool = False
    max_slip: float | None = "window"  # "window" = exploration window length
    operator_telemetry: bool = False
    failure_script: tuple[dict, ...] = ()
    comms_script: tuple[dict, ...] = ()
    ground_truth: tuple[GroundTruth, ...] = ()

    @staticmethod
    def from_doc(doc: dict) -> "Scenario":
        doc = dict(doc)
        truths = tuple(
            GroundTruth(g["id"], g["class"], tuple(g["position"]))
            for g in doc.pop("ground_truth", [])
        )
        doc["failure_script"] = tuple(doc.get("failure_script", []))
        doc["comms_script"] = tuple(doc.get("comms_script", []))
        known = {f for f in Scenario.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return Scenario(ground_truth=truths, **{k: v for k, v in doc.items() if k != "ground_truth"})

    @staticmethod
    def load(path: str | Path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return Scenario.from_doc(json.load(fh))


def load_scenario(name_or_path: str) -> Scenario:
    """Accepts a file path or the name of a bundled scenario."""
    p = Path(name_or_path)
    if p.exists():
        return Scenario.load(p)
    from importlib import resources

    ref = resources.files("copilot.data") / f"scenario_{name_or_path}.json"
    if not ref.is_file():
        raise FileNotFoundError(f"no scenario file or bundled scenario {name_or_path!r}")
    return Scenario.from_doc(json.loads(ref.read_text(encoding="utf-8")))


def gate_everything(template: MissionTemplate) -> MissionTemplate:
    """Degraded-baseline transform: a human gate in front of every task."""

    def regate(d):
        return d if d.gate != Gate.NONE else replace(d, gate=Gate.PRE_OPERATOR)

    return replace(
        template,
        base_tasks=tuple(regate(d) for d in template.base_tasks),
        robot_tasks=tuple(regate(d) for d in template.robot_tasks),
    )


class MissionRunner:
    def __init__(
        self,
        scenario: Scenario = Scenario(),
        template: MissionTemplate | None = None,
        roster: Iterable[str] | None = None,
        store_path: str | Path | None = None,
        course: CourseMap | None = None,
        auto_operator: bool = True,
        live: bool = False,
    ) -> None:
        self.scenario = scenario
        template = template or default_template()
        if scenario.gate_all_operator:
            template = gate_everything(template)
        self.template = template
        self.roster = list(roster or DEFAULT_ROSTER)
        self.auto_operator = auto_operator
        self.live = live
        self.clock = 0.0
        self.lock = threading.RLock()
        course = course or CourseMap.default()
        self.store = EventStore(store_path, wall_clock=lambda: EPOCH + self.clock)
        self.store.append(
            "operator-command",
            {
                "command": "start-mission",
                "template": template_to_doc(template),
                "roster": self.roster,
                "budget": scenario.budget,
                "scenario": scenario.name,
                # consoles draw the roadmap from the log itself, so replays
                # carry their own map
                "course": course.to_doc(),
            },
            at=0.0,
        )
        self.graph = generate_tasks(template, self.roster)
        sim_config = SimConfig(
            seed=scenario.seed,
            time_scale=scenario.time_scale,
            detection_rate=scenario.detection_rate,
            confidence_distribution=scenario.confidence_distribution,
            flag_threshold=scenario.flag_threshold,
            course_open=template.exploration_window[0],
            ground_truth=scenario.ground_truth,
        )
        self.sim = FleetSim(self.roster, sim_config, course)
        for f in scenario.failure_script:
            self.sim.inject_failure(f["at"], f["robot"], f["fault"], f.get("sensor"))
        for c in scenario.comms_script:
            self.sim.set_comms(c["at"], c["robot"], c["connected"])
        res = template.resources
        self.executor = Executor(
            self.graph,
            self.sim.action_bindings(template),
            emit=lambda kind, payload, at: self.store.append(kind, payload, at=at),
            operator_capacity=res.operator_capacity,
            pit_crew_capacity=res.pit_crew_capacity,
            request_replan=self._queue_replan,
        )
        window = template.exploration_window[1] - template.exploration_window[0]
        max_slip = window if scenario.max_slip == "window" else scenario.max_slip
        self.planner = PlanService(
            self.store,
            Capacities(res.operator_capacity, res.pit_crew_capacity),
            max_slip=max_slip,
        )
        self.entries: dict[str, Entry] = {}
        self._triggers: list[str] = []
        self._late_flagged: set[tuple[str, int]] = set()
        self._next_plan_at = 0.0
        self._stop = False
        self.finished_at: float | None = None
        self._telemetry_rng = random.Random(scenario.seed + 1)
        self._next_cursor = 0.0 if scenario.operator_telemetry else None
        self._cursor = (SCREEN[0] / 2.0, SCREEN[1] / 2.0)
        self._dwell_until = -1.0
        self._view = "mission"

    # -- plumbing ---------------------------------------------------------------

    def _queue_replan(self, reason: str) -> None:
        trigger = "strategy-change" if reason.startswith("task-reset") else "late-task"
        if trigger not in self._triggers:
            self._triggers.append(trigger)

    def _drain_sim(self) -> None:
        for kind, payload in self.sim.drain_pending():
            self.store.append(kind, payload, at=self.clock)

    def _frozen_map(self) -> dict[str, tuple[float, float]]:
        frozen: dict[str, tuple[float, float]] = {}
        for iid, task in self.graph.tasks.items():
            if task.status not in (Status.ACTIVE, Status.AWAITING_GATE):
                continue
            rt = self.executor.runtimes[iid]
            if rt.started_at is None:
                continue
            if rt.phase == TaskPhase.EXECUTING:
                finish = rt.exec_finish_at if rt.exec_finish_at is not None else math.inf
                deadline = rt.exec_deadline_at if rt.exec_deadline_at is not None else math.inf
                end = finish if finish <= deadline else deadline
            elif rt.phase == TaskPhase.AWAITING_GATE and not task.def_.gate.is_pre:
                end = self.clock  # work done, waiting on sign-off
            else:
                end = self.clock + task.def_.duration
            frozen[iid] = (rt.started_at, end)
        return frozen

    def _apply_relaxation(self, windows: Iterable[RelaxedWindow]) -> None:
        for w in windows:
            self.graph.tasks[w.instance_id].deadline_extension += w.relaxed - w.original

    def _plan(self, trigger: str) -> None:
        outcome = self.planner.plan_cycle(
            self.graph,
            self.clock,
            self._frozen_map(),
            trigger,
            apply_relaxation=self._apply_relaxation,
        )
        if not outcome.hard_infeasible:
            self.entries = dict(outcome.entries)

    def _check_late(self) -> None:
        for iid, entry in self.entries.items():
            task = self.graph.tasks.get(iid)
            if task is None or task.status not in (Status.ACTIVE, Status.AWAITING_GATE):
                continue
            rt = self.executor.runtimes.get(iid)
            late = self.clock > entry.end + 1e-9
            if (
                not late
                and rt is not None
                and rt.phase == TaskPhase.EXECUTING
                and rt.started_at is not None
            ):
                # a retry or timeout extension makes the projected run exceed
                # the span the plan allotted; catch it before the cadence
                # replan silently absorbs the slip
                finish = rt.exec_finish_at if rt.exec_finish_at is not None else math.inf
                deadline = rt.exec_deadline_at if rt.exec_deadline_at is not None else math.inf
                projected = min(finish, deadline)
                late = projected - rt.started_at > (entry.end - entry.start) + 1e-9
            if late:
                # keyed by attempt: one trigger per slip, not one per replan
                key = (iid, rt.attempts if rt is not None else 0)
                if key not in self._late_flagged:
                    self._late_flagged.add(key)
                    if "late-task" not in self._triggers:
                        self._triggers.append("late-task")

    def _operator_stage(self) -> None:
        if not self.auto_operator:
            return
        for gate in self.executor.open_gates():
            if self.clock + 1e-9 < gate.issued_at + self.scenario.gate_latency:
                continue
            decision = GO if gate.kind.is_pre else CONFIRM
            self.executor.resolve_gate(gate.instance_id, decision, self.clock)
            self._drain_sim()

    def _telemetry_stage(self) -> None:
        if self._next_cursor is None:
            return
        rng = self._telemetry_rng
        while self._next_cursor <= self.clock + 1e-9:
            at = round(self._next_cursor, 4)
            if self.clock >= self._dwell_until:
                if rng.random() < 0.03:
                    self._dwell_until = self.clock + rng.uniform(5.0, 25.0)
                else:
                    x = min(max(self._cursor[0] + rng.uniform(-60, 60), 0), SCREEN[0] - 1)
                    y = min(max(self._cursor[1] + rng.uniform(-40, 40), 0), SCREEN[1] - 1)
                    self._cursor = (x, y)
            if rng.random() < 0.01:
                # a review backlog pulls attention to the drawer and holds it
                backlog = any(
                    a["status"] == "unreviewed" for a in self.store.snapshot.artifacts
                )
                view = None
                if backlog and rng.random() < 0.7:
                    if self._view != "artifact-drawer":
                        view = "artifact-drawer"
                else:
                    view = rng.choice([v for v in VIEWS if v != self._view])
                if view is not None:
                    self._view = view
                    self.store.append("view-switch", {"view": view}, at=at)
            self.store.append(
                "cursor-sample",
                {
                    "x": round(self._cursor[0], 1),
                    "y": round(self._cursor[1], 1),
                    "view": self._view,
                    "screen": list(SCREEN),
                },
                at=at,
            )
            self._next_cursor += CURSOR_PERIOD

    # -- the loop -----------------------------------------------------------------

    def _stages(self) -> None:
        self.executor.tick(self.clock)
        self._drain_sim()
        self._check_late()
        if self._triggers or self.clock + 1e-9 >= self._next_plan_at:
            trigger = self._triggers[0] if self._triggers else "cadence"
            self._triggers.clear()
            self._plan(trigger)
            cadence = self.planner.cadence
            self._next_plan_at = (math.floor(self.clock / cadence + 1e-9) + 1) * cadence
        self.executor.dispatch_ready(self.entries, self.clock)
        self._drain_sim()
        self._operator_stage()
        self._telemetry_stage()

    def tick(self) -> None:
        with self.lock:
            dt = self.scenario.dt
            for kind, payload in self.sim.step(dt):
                self.store.append(kind, payload, at=round(self.sim.clock, 6))
            self.clock = round(self.clock + dt, 6)
            self._stages()

    def tasks_terminal(self) -> bool:
        return all(t.status in TERMINAL for t in self.graph.tasks.values())

    def stalled(self) -> bool:
        """Nothing running and every remaining task sits behind a failure."""
        blocked = set(self.planner.last_outcome.blocked) if self.planner.last_outcome else set()
        for iid, task in self.graph.tasks.items():
            if task.status in (Status.ACTIVE, Status.AWAITING_GATE):
                return False
            if task.status == Status.PENDING and iid not in blocked:
                return False
        return True

    def request_stop(self) -> None:
        self._stop = True

    def run(self, max_clock: float | None = None) -> dict:
        limit = self.scenario.max_clock if max_clock is None else max_clock
        with self.lock:
            self._stages()  # plan + dispatch at t=0
        while not self._stop:
            self.tick()
            if self.finished_at is None and (self.tasks_terminal() or self.stalled()):
                self.finished_at = self.clock
            if (
                self.finished_at is not None
                and self.clock >= self.finished_at + self.scenario.explore_seconds
            ):
                break
            if self.clock >= limit:
                break
            if self.live:
                time.sleep(self.scenario.dt / self.scenario.time_scale)
        return self.summary()

    def summary(self) -> dict:
        counts: dict[str, int] = {}
        for task in self.graph.tasks.values():
            counts[task.status.value] = counts.get(task.status.value, 0) + 1
        return {
            "scenario": self.scenario.name,
            "clock": self.clock,
            "finished_at": self.finished_at,
            "statuses": counts,
            "course_entries": list(self.store.snapshot.course_entries),
            "sim": dict(self.sim.stats),
            "events": len(self.store.events),
        }

    # -- operator-facing actions (used by the service and tests) -------------------

    def resolve_gate(self, instance_id: str, decision: str) -> None:
        with self.lock:
            self.executor.resolve_gate(instance_id, decision, self.clock)
            self._drain_sim()

    def retry_task(self, instance_id: str) -> None:
        with self.lock:
            self.executor.retry_task(instance_id, self.clock)
            self._drain_sim()

    def reset_task(self, instance_id: str, cascade: bool = False) -> list[str]:
        with self.lock:
            affected = self.executor.reset_task(instance_id, self.clock, cascade=cascade)
            self._drain_sim()
            return affected

    def command_robot(self, robot: str, command: dict) -> str:
        with self.lock:
            return self.sim.command(robot, command)

    def select_robots(self, roster: list[str]) -> None:
        """Swap the active roster; existing task progress is preserved."""
        with self.lock:
            unknown = [r for r in roster if r not in self.sim.robots]
            if unknown:
                raise ValueError(f"robots not on site: {unknown}")
            self.store.append(
                "operator-command",
                {"command": "select-robots", "roster": list(roster)},
                at=self.clock,
            )
            old = self.graph.tasks
            self.graph = generate_tasks(self.template, roster)
            for iid, task in self.graph.tasks.items():
                if iid in old:
                    task.status = old[iid].status
                    task.attempts = old[iid].attempts
                    task.deadline_extension = old[iid].deadline_extension
            self.roster = list(roster)
            runtimes = self.executor.runtimes
            self.executor.graph = self.graph
            self.executor.runtimes = {
                iid: runtimes.get(iid) or TaskRuntime(iid) for iid in self.graph.tasks
            }
            for iid in list(self.executor.gates):
                if iid not in self.graph.tasks:
                    del self.executor.gates[iid]
            if "strategy-change" not in self._triggers:
                self._triggers.append("strategy-change")
