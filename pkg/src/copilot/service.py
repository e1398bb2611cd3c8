"""HTTP control surface for a live mission.

Endpoints (all JSON):

    GET  /state                      snapshot view + seq cursor
    GET  /events?from=<seq>&follow=  ordered event stream (server-sent events)
    POST /command                    {kind, target, payload} -> ack | rejection
    POST /artifacts/{id}/review      {action: open|accept|reject|adjust|submit}
    POST /telemetry                  cursor-sample / view-switch batches
    POST /mission/start              {roster?} -> starts the clock

Every command is appended to the log as an operator-command event *before*
it is applied, so the log explains every state change.  All mutations take
the runner lock; the event stream reads the append-only log without it.
"""

from __future__ import annotations

import math
import threading
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Iterator

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .executor import GateError
from .model import MissionTemplate
from .runner import SCREEN, MissionRunner, Scenario
from .store import MissionSnapshot, query_tasks

COMMAND_KINDS = (
    "gate-decision",
    "retry",
    "reset",
    "waypoint",
    "comms-node-drop",
    "artifact-review",
    "artifact-submit",
    "start-mission",
    "select-robots",
)

SCORING_RADIUS_M = 5.0

_REVIEW_ACTIONS = ("open", "accept", "reject", "adjust", "submit")

# the roster prompt is tied to this gate being open ("upon launch, select robots")
_SELECT_GATE = "base.launch_base_software"


class Rejection(Exception):
    """Command refused; carries the HTTP status and a reason string."""

    def __init__(self, code: int, reason: str):
        self.code = code
        self.reason = reason
        super().__init__(reason)


def snapshot_view(snap: MissionSnapshot) -> dict:
    """JSON-ready projection of a folded snapshot (pure; also used on replays)."""
    return {
        "scenario": snap.scenario,
        "roster": list(snap.roster),
        "budget": snap.budget,
        "clock": snap.clock,
        "view": snap.view,
        "cursor_samples": snap.cursor_samples,
        "tasks": [
            {
                "id": t.instance_id,
                "robot": t.robot,
                "task": t.def_.id,
                "label": t.def_.label,
                "status": t.status.value,
                "attempts": t.attempts,
                "gate": t.def_.gate.value,
                "duration": t.def_.duration,
            }
            for t in query_tasks(snap)
        ],
        "schedule": snap.schedule,
        "plan": snap.plan,
        "robots": snap.robots,
        "gates": list(snap.gates.values()),
        "artifacts": snap.artifacts,
        "course": snap.course,
        "course_entries": snap.course_entries,
    }


class MissionService:
    """Owns the runner lifecycle and translates HTTP calls into mission actions.

    The mission does not start until start_mission() (the operator launches
    the base software, then presses start); before that only /state answers.
    """

    def __init__(
        self,
        scenario: Scenario = Scenario(),
        template: MissionTemplate | None = None,
        roster: list[str] | None = None,
        store_path: str | Path | None = None,
        auto_operator: bool = False,
        live: bool = True,
    ) -> None:
        self.scenario = scenario
        self.template = template
        self.roster = roster
        self.store_path = store_path
        self.auto_operator = auto_operator
        self.live = live
        self.runner: MissionRunner | None = None
        self._thread: threading.Thread | None = None
        self._closing = False

    # -- lifecycle ---------------------------------------------------------------

    def start_mission(self, roster: list[str] | None = None) -> dict:
        if self.runner is not None:
            raise Rejection(409, "mission already started")
        self.runner = MissionRunner(
            self.scenario,
            template=self.template,
            roster=roster or self.roster,
            store_path=self.store_path,
            auto_operator=self.auto_operator,
            live=self.live,
        )
        self._thread = threading.Thread(target=self.runner.run, daemon=True)
        self._thread.start()
        return {"status": "ack", "seq": self.runner.store.next_seq - 1}

    def stop(self) -> None:
        self._closing = True
        if self.runner is not None:
            self.runner.request_stop()
            if self._thread is not None:
                self._thread.join(timeout=10.0)
            self.runner.store.close()

    def _require_runner(self) -> MissionRunner:
        if self.runner is None:
            raise Rejection(409, "mission not started")
        return self.runner

    # -- reads -------------------------------------------------------------------

    def state(self) -> dict:
        if self.runner is None:
            return {
                "phase": "setup-pending",
                "clock": 0.0,
                "seq": -1,
                "scenario": self.scenario.name,
                "state": None,
            }
        r = self.runner
        # the loop keeps appending (exploration tail) after finished_at is
        # set; only a dead run thread means the log has gone quiet
        done = self._thread is not None and not self._thread.is_alive()
        with r.lock:
            snap = r.store.snapshot
            phase = "finished" if done else "running"
            return {
                "phase": phase,
                "clock": r.clock,
                "seq": snap.last_seq,
                "scenario": self.scenario.name,
                "state": snapshot_view(snap),
            }

    def stream(self, from_seq: int, follow: bool) -> Iterator[str]:
        store = self._require_runner().store
        if from_seq > store.next_seq:
            raise Rejection(416, f"from={from_seq} is beyond head {store.next_seq - 1}")
        next_seq = max(0, from_seq)
        while True:
            events = store.events_since(next_seq)
            if not events:
                if not follow:
                    break
                events = store.wait_for(next_seq, timeout=0.5)
                if not events:
                    if self._closing:
                        break
                    yield ": keepalive\n\n"
                    continue
            for event in events:
                yield f"id: {event.seq}\nevent: {event.kind}\ndata: {event.to_json()}\n\n"
                next_seq = event.seq + 1

    # -- commands ------------------------------------------------------------------

    def apply_command(self, kind: str, target: str | None, payload: dict) -> dict:
        if kind not in COMMAND_KINDS:
            raise Rejection(400, f"unknown command kind {kind!r}")
        if kind == "start-mission":
            return self.start_mission(payload.get("roster"))
        r = self._require_runner()
        with r.lock:
            # audit record first; effects follow it in the log.
            # select-robots logs its own richer record inside the runner.
            if kind != "select-robots":
                r.store.append(
                    "operator-command",
                    {"command": kind, "target": target, "payload": payload},
                    at=r.clock,
                )
            if kind == "gate-decision":
                return self._gate_decision(r, target, payload)
            if kind == "retry":
                return self._retry(r, target)
            if kind == "reset":
                affected = self._reset(r, target, bool(payload.get("cascade", False)))
                return {"status": "ack", "affected": affected}
            if kind == "waypoint":
                result = self._robot_command(
                    r, target, {"kind": "waypoint", "node": payload.get("node")}
                )
                return {"status": "ack", "result": result}
            if kind == "comms-node-drop":
                result = self._robot_command(r, target, {"kind": "comms-node-drop"})
                return {"status": "ack", "result": result}
            if kind == "artifact-review":
                report = self._review(r, target, payload.get("action"), payload)
                return {"status": "ack", "artifact": report}
            if kind == "artifact-submit":
                report = self._review(r, target, "submit", payload)
                return {"status": "ack", "artifact": report}
            # select-robots
            gate = r.executor.gates.get(_SELECT_GATE)
            if gate is None or gate.resolved:
                raise Rejection(409, "robot selection is only open during the launch gate")
            try:
                r.select_robots(list(payload.get("roster", [])))
            except ValueError as exc:
                raise Rejection(409, str(exc)) from exc
            return {"status": "ack", "roster": list(r.roster)}

    def _gate_decision(self, r: MissionRunner, target: str, payload: dict) -> dict:
        decision = payload.get("decision")
        try:
            r.resolve_gate(target, decision)
        except GateError as exc:
            raise Rejection(409, str(exc)) from exc
        return {"status": "ack", "task": target, "decision": decision}

    def _retry(self, r: MissionRunner, target: str) -> dict:
        if target not in r.graph.tasks:
            raise Rejection(404, f"unknown task {target!r}")
        try:
            r.retry_task(target)
        except ValueError as exc:
            raise Rejection(409, str(exc)) from exc
        return {"status": "ack", "task": target}

    def _reset(self, r: MissionRunner, target: str, cascade: bool) -> list[str]:
        if target not in r.graph.tasks:
            raise Rejection(404, f"unknown task {target!r}")
        return r.reset_task(target, cascade=cascade)

    def _robot_command(self, r: MissionRunner, robot: str, command: dict) -> str:
        if robot not in r.sim.robots:
            raise Rejection(404, f"unknown robot {robot!r}")
        try:
            return r.command_robot(robot, command)
        except ValueError as exc:
            raise Rejection(400, str(exc)) from exc

    # -- artifact review -------------------------------------------------------------

    def review(self, artifact_id: str, action: str, payload: dict) -> dict:
        """The dedicated review endpoint; same audit + effects as /command."""
        r = self._require_runner()
        with r.lock:
            r.store.append(
                "operator-command",
                {
                    "command": "artifact-review",
                    "target": artifact_id,
                    "payload": {"action": action, **payload},
                },
                at=r.clock,
            )
            return self._review(r, artifact_id, action, payload)

    def _review(self, r: MissionRunner, artifact_id: str, action: str, payload: dict) -> dict:
        if action not in _REVIEW_ACTIONS:
            raise Rejection(400, f"unknown review action {action!r}")
        snap = r.store.snapshot
        report = snap.artifact(artifact_id)
        if report is None:
            raise Rejection(404, f"unknown artifact {artifact_id!r}")
        if report["status"] == "submitted":
            raise Rejection(409, "report already submitted")

        def emit(extra: dict) -> None:
            r.store.append("artifact", {"id": artifact_id, **extra}, at=r.clock)

        if action == "open":
            emit({"action": "open"})
        elif action == "adjust":
            delta = payload.get("delta") or [
                payload.get("dx", 0.0),
                payload.get("dy", 0.0),
                payload.get("dz", 0.0),
            ]
            position = [p + d for p, d in zip(report["position"], delta)]
            extra = {"action": "adjust", "position": position}
            if "class" in payload:
                extra["class"] = payload["class"]
            emit(extra)
        elif action in ("accept", "reject"):
            emit({"action": action})
        else:  # submit
            if report["status"] != "accepted":
                raise Rejection(409, "submit requires an accepted report")
            if snap.budget is not None and snap.budget <= 0:
                raise Rejection(409, "submission budget exhausted")
            emit({"action": "submit"})
            correct, truth = self._score(r, snap.artifact(artifact_id))
            emit({"action": "scored", "correct": correct, "truth": truth})
        return dict(snap.artifact(artifact_id))

    def _score(self, r: MissionRunner, report: dict) -> tuple[bool, str | None]:
        # a hit needs the right class AND a position inside the scoring radius
        best: tuple[float, str] | None = None
        for gt in r.scenario.ground_truth:
            if gt.cls != report["class"]:
                continue
            dist = math.dist(gt.position, report["position"])
            if best is None or dist < best[0]:
                best = (dist, gt.id)
        if best is not None and best[0] <= SCORING_RADIUS_M:
            return True, best[1]
        return False, None

    # -- telemetry -------------------------------------------------------------------

    def ingest_telemetry(self, samples: list[dict], switches: list[dict]) -> list[int]:
        r = self._require_runner()
        for item in samples:
            if not {"t", "x", "y"} <= item.keys():
                raise Rejection(400, "cursor samples need t, x, y")
        for item in switches:
            if not {"t", "view"} <= item.keys():
                raise Rejection(400, "view switches need t, view")
        for batch in (samples, switches):
            times = [item["t"] for item in batch]
            if any(b < a for a, b in zip(times, times[1:])):
                raise Rejection(400, "non-monotone timestamps in batch")
        merged = sorted(
            [(item["t"], 0, item) for item in switches]
            + [(item["t"], 1, item) for item in samples],
            key=lambda row: (row[0], row[1]),
        )
        seqs: list[int] = []
        with r.lock:
            view = r.store.snapshot.view
            for _, tag, item in merged:
                if tag == 0:
                    view = item["view"]
                    seqs.append(r.store.append("view-switch", {"view": view}, at=item["t"]))
                else:
                    payload = {
                        "x": item["x"],
                        "y": item["y"],
                        "view": item.get("view", view),
                        "screen": list(SCREEN),
                    }
                    seqs.append(r.store.append("cursor-sample", payload, at=item["t"]))
        return seqs


# -- the app ---------------------------------------------------------------------


def create_app(service: MissionService) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        service.stop()

    app = FastAPI(title="mission control service", lifespan=lifespan)
    app.state.service = service
    # the operator console is served as static files from wherever; this API
    # is LAN-facing operator tooling, so any origin may talk to it
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(Rejection)
    async def _rejection(request: Request, exc: Rejection) -> JSONResponse:
        return JSONResponse({"status": "rejected", "reason": exc.reason}, status_code=exc.code)

    @app.get("/state")
    def get_state() -> dict:
        return service.state()

    @app.get("/events")
    def get_events(
        request: Request,
        from_seq: int = Query(0, alias="from", ge=0),
        follow: bool = True,
    ) -> StreamingResponse:
        last_id = request.headers.get("last-event-id")
        if last_id is not None:
            from_seq = int(last_id) + 1
        service._require_runner()  # 409 before start
        if from_seq > service.runner.store.next_seq:
            raise Rejection(
                416,
                f"from={from_seq} is beyond head {service.runner.store.next_seq - 1}",
            )
        return StreamingResponse(
            service.stream(from_seq, follow),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.post("/command")
    def post_command(body: dict) -> dict:
        return service.apply_command(
            body.get("kind"), body.get("target"), body.get("payload") or {}
        )

    @app.post("/artifacts/{artifact_id}/review")
    def post_review(artifact_id: str, body: dict) -> dict:
        action = body.get("action")
        payload = {k: v for k, v in body.items() if k != "action"}
        return {"status": "ack", "artifact": service.review(artifact_id, action, payload)}

    @app.post("/telemetry")
    def post_telemetry(body: dict) -> dict:
        seqs = service.ingest_telemetry(body.get("samples") or [], body.get("switches") or [])
        return {"status": "ack", "seqs": seqs}

    @app.post("/mission/start")
    def post_start(body: dict | None = None) -> dict:
        return service.start_mission((body or {}).get("roster"))

    return app


def serve(
    scenario: Scenario,
    port: int = 8800,
    host: str = "127.0.0.1",
    roster: list[str] | None = None,
    store_path: str | Path | None = None,
    template: MissionTemplate | None = None,
) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    service = MissionService(
        scenario, template=template, roster=roster, store_path=store_path
    )
    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")
