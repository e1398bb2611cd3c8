"""Verifiable task execution: precondition, bounded execution, postcondition.

Every task runs as check_pre -> execute -> check_post.  Pre-gates (operator,
pit crew, go/no-go) hold the task between precondition and execution;
sign-off gates hold it between postcondition and the terminal state.  Any
phase failure consumes one of retry_limit automatic retries; each execution
begin escalates the attempt timeout by extension_factor.

The executor is a stepwise state machine (begin / tick / resolve_gate) so a
discrete-event loop can drive it; run_task wraps the same machinery behind a
synchronous call for tools and tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping

from .model import Gate, Status, TaskGraph

RETRY_LIMIT = 3
EXTENSION_FACTOR = 1.5


class TaskPhase(str, Enum):
    IDLE = "idle"
    CHECKING_PRE = "checking_pre"
    AWAITING_GATE = "awaiting_gate"
    EXECUTING = "executing"
    CHECKING_POST = "checking_post"
    DONE = "done"


@dataclass
class TaskRuntime:
    instance_id: str
    phase: TaskPhase = TaskPhase.IDLE
    attempts: int = 0           # execution begins; pre-failures don't count
    failures: int = 0           # failed phases across the whole lifecycle
    extra_allowance: int = 0    # failure budget added by operator retries
    timeout: float = 0.0        # current attempt's execution deadline length
    last_error: str | None = None
    started_at: float | None = None
    exec_started_at: float | None = None
    exec_finish_at: float | None = None   # when the running execution lands
    exec_deadline_at: float | None = None  # exec start + timeout
    gate_satisfied: bool = False
    signoff_satisfied: bool = False


@dataclass
class GateRequest:
    instance_id: str
    kind: Gate
    prompt: str
    issued_at: float
    robot: str
    resolved: bool = False
    decision: str | None = None


class GateError(ValueError):
    pass


@dataclass(frozen=True)
class ActionContext:
    instance_id: str
    robot: str
    attempt: int
    now: float


@dataclass(frozen=True)
class Actions:
    """Bindings for one task def; defaults model a clean timed step."""

    pre: Callable[[ActionContext], bool | tuple[bool, str]] | None = None
    execute: Callable[[ActionContext], float] | None = None  # actual duration
    post: Callable[[ActionContext], bool | tuple[bool, str]] | None = None
    on_success: Callable[[ActionContext], None] | None = None


def _outcome(result) -> tuple[bool, str]:
    if isinstance(result, tuple):
        ok, why = result
        return bool(ok), why
    return bool(result), ""


GO = "go"
NO_GO = "no_go"
CONFIRM = "confirm"

_PROMPTS = {
    Gate.PRE_OPERATOR: "Operator: start '{label}' for {robot}?",
    Gate.PRE_PITCREW: "Pit crew: ready for '{label}' on {robot}?",
    Gate.SIGNOFF_OPERATOR: "Operator sign-off: '{label}' complete for {robot}?",
    Gate.SIGNOFF_PITCREW: "Pit crew sign-off: '{label}' complete for {robot}?",
    Gate.GONOGO: "Go/No-go: deploy {robot}?",
}


class Executor:
    def __init__(
        self,
        graph: TaskGraph,
        actions: Mapping[str, Actions] | None = None,
        emit: Callable[[str, dict, float], None] | None = None,
        retry_limit: int = RETRY_LIMIT,
        extension_factor: float = EXTENSION_FACTOR,
        operator_capacity: int = 1,
        pit_crew_capacity: int = 4,
        request_replan: Callable[[str], None] | None = None,
    ) -> None:
        self.graph = graph
        self.actions = dict(actions or {})
        self.retry_limit = retry_limit
        self.extension_factor = extension_factor
        self.capacity = {"operator": operator_capacity, "pit_crew": pit_crew_capacity}
        self.runtimes: dict[str, TaskRuntime] = {
            iid: TaskRuntime(iid) for iid in graph.tasks
        }
        self.gates: dict[str, GateRequest] = {}
        self._emit = emit or (lambda kind, payload, at: None)
        self._request_replan = request_replan or (lambda reason: None)

    # -- helpers ------------------------------------------------------------

    def _task(self, iid: str):
        return self.graph.tasks[iid]

    def _bindings(self, iid: str) -> Actions:
        return self.actions.get(self._task(iid).def_.id, Actions())

    def _ctx(self, iid: str, now: float) -> ActionContext:
        t = self._task(iid)
        return ActionContext(iid, t.robot, self.runtimes[iid].attempts, now)

    def _event(self, iid: str, now: float, phase: str, **extra) -> None:
        t = self._task(iid)
        rt = self.runtimes[iid]
        payload = {
            "task": iid,
            "robot": t.robot,
            "phase": phase,
            "status": t.status.value,
            "attempt": rt.attempts,
        }
        payload.update(extra)
        self._emit("task-status", payload, now)

    def _occupancy(self, resource: str) -> int:
        count = 0
        for iid, rt in self.runtimes.items():
            if rt.phase in (TaskPhase.IDLE, TaskPhase.DONE):
                continue
            if self._task(iid).def_.gate.resource == resource:
                count += 1
        return count

    def deps_succeeded(self, iid: str) -> bool:
        return all(
            self.graph.tasks[p].status == Status.SUCCEEDED
            for p in self.graph.preds(iid)
        )

    # -- dispatch -----------------------------------------------------------

    def dispatch_ready(self, entries: Mapping[str, "object"], now: float) -> list[str]:
        """Start pending tasks whose scheduled start has arrived.

        Entry objects only need .start.  Human-resource capacity is enforced
        at runtime too: if late tasks still hold the operator, a due task
        waits for the next tick rather than overcommitting the human.
        """
        started: list[str] = []
        due = [
            (entry.start, iid)
            for iid, entry in entries.items()
            if iid in self.graph.tasks
            and self._task(iid).status == Status.PENDING
            and self.runtimes[iid].phase == TaskPhase.IDLE
            and entry.start <= now
        ]
        for _, iid in sorted(due, key=lambda p: (p[0], self._task(p[1]).sort_key())):
            if not self.deps_succeeded(iid):
                continue
            resource = self._task(iid).def_.gate.resource
            if resource and self._occupancy(resource) >= self.capacity[resource]:
                continue
            self.begin(iid, now)
            started.append(iid)
        return started

    # -- lifecycle ----------------------------------------------------------

    def begin(self, iid: str, now: float) -> None:
        task = self._task(iid)
        rt = self.runtimes[iid]
        if rt.started_at is None:
            rt.started_at = now
        task.status = Status.ACTIVE
        self._check_pre(iid, now)

    def _check_pre(self, iid: str, now: float) -> None:
        rt = self.runtimes[iid]
        rt.phase = TaskPhase.CHECKING_PRE
        self._event(iid, now, "checking_pre")
        binding = self._bindings(iid)
        ok, why = _outcome(binding.pre(self._ctx(iid, now))) if binding.pre else (True, "")
        if not ok:
            self._phase_failure(iid, now, f"precondition failed: {why}".rstrip(": "))
            return
        gate = self._task(iid).def_.gate
        if gate.is_pre and not rt.gate_satisfied:
            self._await_gate(iid, now)
        else:
            self._begin_execution(iid, now)

    def _await_gate(self, iid: str, now: float) -> None:
        task = self._task(iid)
        rt = self.runtimes[iid]
        rt.phase = TaskPhase.AWAITING_GATE
        task.status = Status.AWAITING_GATE
        gate = task.def_.gate
        prompt = _PROMPTS[gate].format(label=task.def_.label, robot=task.robot)
        request = GateRequest(iid, gate, prompt, now, task.robot)
        self.gates[iid] = request
        self._event(iid, now, "awaiting_gate", gate=gate.value)
        self._emit(
            "gate",
            {
                "action": "requested",
                "task": iid,
                "gate": gate.value,
                "prompt": prompt,
                "robot": task.robot,
            },
            now,
        )

    def _begin_execution(self, iid: str, now: float) -> None:
        task = self._task(iid)
        rt = self.runtimes[iid]
        task.status = Status.ACTIVE
        rt.attempts += 1
        rt.timeout = task.def_.duration * self.extension_factor ** (rt.attempts - 1)
        rt.phase = TaskPhase.EXECUTING
        rt.exec_started_at = now
        rt.exec_deadline_at = now + rt.timeout
        binding = self._bindings(iid)
        actual = (
            binding.execute(self._ctx(iid, now))
            if binding.execute
            else task.def_.duration
        )
        rt.exec_finish_at = now + actual if math.isfinite(actual) else math.inf
        self._event(iid, now, "executing", timeout=rt.timeout)

    def tick(self, now: float) -> None:
        """Advance running executions whose finish or deadline has passed."""
        for iid in sorted(self.runtimes):
            rt = self.runtimes[iid]
            if rt.phase != TaskPhase.EXECUTING:
                continue
            finish = rt.exec_finish_at if rt.exec_finish_at is not None else math.inf
            deadline = rt.exec_deadline_at if rt.exec_deadline_at is not None else math.inf
            if finish <= deadline and finish <= now:
                self._check_post(iid, now)
            elif deadline < finish and deadline <= now:
                self._phase_failure(
                    iid, now, f"execution exceeded timeout ({rt.timeout:g}s)"
                )

    def _check_post(self, iid: str, now: float) -> None:
        rt = self.runtimes[iid]
        rt.phase = TaskPhase.CHECKING_POST
        self._event(iid, now, "checking_post")
        binding = self._bindings(iid)
        ok, why = _outcome(binding.post(self._ctx(iid, now))) if binding.post else (True, "")
        if not ok:
            self._phase_failure(iid, now, f"postcondition failed: {why}".rstrip(": "))
            return
        gate = self._task(iid).def_.gate
        if gate != Gate.NONE and not gate.is_pre and not rt.signoff_satisfied:
            self._await_gate(iid, now)
        else:
            self._succeed(iid, now)

    def _succeed(self, iid: str, now: float) -> None:
        task = self._task(iid)
        rt = self.runtimes[iid]
        rt.phase = TaskPhase.DONE
        task.status = Status.SUCCEEDED
        task.attempts = rt.attempts
        self._event(iid, now, "succeeded")
        binding = self._bindings(iid)
        if binding.on_success:
            binding.on_success(self._ctx(iid, now))

    def _phase_failure(self, iid: str, now: float, reason: str) -> None:
        rt = self.runtimes[iid]
        rt.failures += 1
        rt.last_error = reason
        if rt.failures <= self.retry_limit + rt.extra_allowance:
            self._event(iid, now, "retrying", error=reason, failures=rt.failures)
            self._check_pre(iid, now)
        else:
            self._fail_terminal(iid, now, reason)

    def _fail_terminal(self, iid: str, now: float, reason: str) -> None:
        task = self._task(iid)
        rt = self.runtimes[iid]
        rt.phase = TaskPhase.DONE
        rt.last_error = reason
        task.status = Status.FAILED
        task.attempts = rt.attempts
        self._event(iid, now, "failed", error=reason)
        self._request_replan(f"task-failed:{iid}")

    # -- gates --------------------------------------------------------------

    def open_gates(self) -> list[GateRequest]:
        return [g for g in self.gates.values() if not g.resolved]

    def resolve_gate(self, iid: str, decision: str, now: float) -> None:
        request = self.gates.get(iid)
        if request is None:
            raise GateError(f"no gate request for {iid}")
        if request.resolved:
            raise GateError(f"gate for {iid} already resolved ({request.decision})")
        if decision not in (GO, NO_GO, CONFIRM):
            raise GateError(f"unknown decision {decision!r}")
        request.resolved = True
        request.decision = decision
        self._emit(
            "gate",
            {"action": "resolved", "task": iid, "gate": request.kind.value, "decision": decision},
            now,
        )
        rt = self.runtimes[iid]
        if decision == NO_GO:
            # an explicit human stop is terminal; plan around it
            self._fail_terminal(iid, now, "no_go")
            return
        if request.kind.is_pre:
            rt.gate_satisfied = True
            self._begin_execution(iid, now)
        else:
            rt.signoff_satisfied = True
            self._succeed(iid, now)

    # -- operator interventions ----------------------------------------------

    def retry_task(self, iid: str, now: float) -> None:
        """One more attempt after automatic retries are exhausted."""
        task = self._task(iid)
        if task.status != Status.FAILED:
            raise ValueError(f"{iid} is {task.status.value}, not failed")
        rt = self.runtimes[iid]
        rt.extra_allowance += 1
        self.gates.pop(iid, None)  # a rejected gate may be re-requested
        self._event(iid, now, "operator_retry")
        self.begin(iid, now)

    def reset_task(self, iid: str, now: float, cascade: bool = False) -> list[str]:
        """Back to pending with attempts = 0; optionally reset successors.

        Returns every instance reset.  Without cascade, successors that
        already ran now depend on a pending task again; that inversion is
        surfaced as an operator warning on the reset event.
        """
        task = self._task(iid)
        rt = self.runtimes[iid]
        if task.status == Status.PENDING and rt.phase == TaskPhase.IDLE:
            self._event(iid, now, "reset", cascade=cascade, affected=[iid])
            return [iid]
        affected = [iid]
        if cascade:
            frontier = [iid]
            seen = {iid}
            while frontier:
                node = frontier.pop()
                for succ in self.graph.succs(node):
                    if succ in seen:
                        continue
                    seen.add(succ)
                    frontier.append(succ)
                    srt = self.runtimes[succ]
                    if (
                        self._task(succ).status != Status.PENDING
                        or srt.phase != TaskPhase.IDLE
                    ):
                        affected.append(succ)
        inverted: list[str] = []
        if not cascade:
            for succ in sorted(self.graph.succs(iid)):
                st = self._task(succ)
                if st.status != Status.PENDING or self.runtimes[succ].phase != TaskPhase.IDLE:
                    inverted.append(succ)
        for target in affected:
            t = self._task(target)
            t.status = Status.PENDING
            t.attempts = 0
            self.runtimes[target] = TaskRuntime(target)
            self.gates.pop(target, None)
        affected_sorted = sorted(affected)
        extra: dict = {"cascade": cascade, "affected": affected_sorted}
        if inverted:
            extra["warning"] = (
                "dependency inversion: successors already progressed: "
                + ", ".join(inverted)
            )
            extra["inverted_successors"] = inverted
        self._event(iid, now, "reset", **extra)
        self._request_replan(f"task-reset:{iid}")
        return affected_sorted

    # -- synchronous driver ---------------------------------------------------

    def run_task(
        self,
        iid: str,
        now: float = 0.0,
        decide: Callable[[GateRequest], str] | None = None,
    ) -> tuple[Status, float]:
        """Drive one task to a terminal state (or to an unresolved gate).

        `decide` answers gate requests; without it the task is left in
        awaiting_gate and the current status/time returned.
        """
        clock = now
        task = self._task(iid)
        if task.status == Status.PENDING:
            self.begin(iid, clock)
        while True:
            if task.status in (Status.SUCCEEDED, Status.FAILED):
                return task.status, clock
            rt = self.runtimes[iid]
            if rt.phase == TaskPhase.AWAITING_GATE:
                if decide is None:
                    return task.status, clock
                self.resolve_gate(iid, decide(self.gates[iid]), clock)
                continue
            if rt.phase == TaskPhase.EXECUTING:
                finish = rt.exec_finish_at if rt.exec_finish_at is not None else math.inf
                deadline = rt.exec_deadline_at if rt.exec_deadline_at is not None else math.inf
                step_to = min(finish, deadline)
                if not math.isfinite(step_to):
                    raise RuntimeError(f"{iid} can never finish (no timeout?)")
                clock = max(clock, step_to)
                self.tick(clock)
                continue
            raise RuntimeError(f"{iid} stalled in phase {rt.phase}")
