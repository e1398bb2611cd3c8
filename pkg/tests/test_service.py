"""Control-service endpoints: state, stream, commands, review, telemetry."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from copilot.runner import Scenario
from copilot.service import MissionService, create_app, snapshot_view
from copilot.store import Event, MissionSnapshot, fold

GROUND_TRUTH = (
    {"id": "gt-1", "class": "backpack", "position": [62.0, 4.0, 0.2]},
    {"id": "gt-2", "class": "survivor", "position": [50.0, 31.0, 0.0]},
    {"id": "gt-3", "class": "drill", "position": [118.0, -2.0, 0.4]},
    {"id": "gt-4", "class": "cell_phone", "position": [100.0, -28.0, 0.1]},
    {"id": "gt-5", "class": "fire_extinguisher", "position": [151.0, 22.0, 0.3]},
    {"id": "gt-6", "class": "vent", "position": [183.0, 3.0, 1.2]},
)


def scenario(**overrides):
    doc = {
        "name": "service-test",
        "explore_seconds": 30.0,
        "detection_rate": 30.0,  # per robot-minute; plenty of review fodder
        "ground_truth": list(GROUND_TRUTH),
        **overrides,
    }
    return Scenario.from_doc(doc)


@pytest.fixture
def idle():
    """Service that has not started a mission."""
    service = MissionService(scenario(), roster=["alpha", "bravo"])
    with TestClient(create_app(service)) as client:
        yield client, service


@pytest.fixture
def finished():
    """Auto-operated mission run to completion at batch speed."""
    service = MissionService(
        scenario(), roster=["alpha", "bravo"], auto_operator=True, live=False
    )
    with TestClient(create_app(service)) as client:
        assert client.post("/mission/start", json={}).status_code == 200
        wait_until(client, lambda s: s["phase"] == "finished")
        yield client, service


@pytest.fixture
def gated():
    """Hand-driven mission: gates wait for this test's commands."""
    service = MissionService(
        scenario(time_scale=200.0), roster=["alpha", "bravo"], auto_operator=False
    )
    with TestClient(create_app(service)) as client:
        assert client.post("/mission/start", json={}).status_code == 200
        yield client, service


def wait_until(client, predicate, timeout=60.0, interval=0.02):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        state = client.get("/state").json()
        if predicate(state):
            return state
        time.sleep(interval)
    raise AssertionError("condition not reached before timeout")


def read_stream(client, from_seq=0, follow=False, limit=None):
    """Collect SSE frames as (id, kind, record) tuples."""
    frames, current = [], {}
    with client.stream("GET", f"/events?from={from_seq}&follow={str(follow).lower()}") as resp:
        assert resp.status_code == 200
        for line in resp.iter_lines():
            if line.startswith(":"):
                continue
            if line == "":
                if current:
                    frames.append(
                        (int(current["id"]), current["event"], json.loads(current["data"]))
                    )
                    current = {}
                    if limit is not None and len(frames) >= limit:
                        break
                continue
            key, _, value = line.partition(": ")
            current[key] = value
    return frames


class TestPreStart:
    def test_state_is_setup_pending(self, idle):
        client, _ = idle
        state = client.get("/state").json()
        assert state["phase"] == "setup-pending"
        assert state["clock"] == 0.0
        assert state["seq"] == -1
        assert state["state"] is None

    def test_events_rejected(self, idle):
        client, _ = idle
        resp = client.get("/events")
        assert resp.status_code == 409
        assert resp.json()["status"] == "rejected"

    def test_commands_rejected(self, idle):
        client, _ = idle
        resp = client.post(
            "/command",
            json={"kind": "gate-decision", "target": "x", "payload": {"decision": "go"}},
        )
        assert resp.status_code == 409
        assert "not started" in resp.json()["reason"]

    def test_telemetry_rejected(self, idle):
        client, _ = idle
        resp = client.post("/telemetry", json={"samples": [{"t": 1.0, "x": 5, "y": 5}]})
        assert resp.status_code == 409

    def test_unknown_command_kind(self, idle):
        client, _ = idle
        resp = client.post("/command", json={"kind": "self-destruct"})
        assert resp.status_code == 400


class TestMissionStart:
    def test_start_then_running(self, idle):
        client, _ = idle
        resp = client.post("/mission/start", json={})
        assert resp.status_code == 200 and resp.json()["status"] == "ack"
        state = client.get("/state").json()
        assert state["phase"] == "running"
        assert len(state["state"]["tasks"]) == 34  # 13*2 + 8
        assert state["state"]["budget"] == 40

    def test_double_start_rejected(self, idle):
        client, _ = idle
        client.post("/mission/start", json={})
        resp = client.post("/mission/start", json={})
        assert resp.status_code == 409

    def test_start_via_command(self, idle):
        client, _ = idle
        resp = client.post("/command", json={"kind": "start-mission", "payload": {}})
        assert resp.status_code == 200
        assert client.get("/state").json()["phase"] == "running"


class TestGates:
    def test_gate_prompt_appears_and_go_resolves(self, gated):
        client, _ = gated
        state = wait_until(client, lambda s: s["state"]["gates"])
        gate = next(
            g for g in state["state"]["gates"] if g["task"] == "base.launch_base_software"
        )
        assert gate["gate"] == "pre_operator"
        assert gate["prompt"]
        resp = client.post(
            "/command",
            json={
                "kind": "gate-decision",
                "target": "base.launch_base_software",
                "payload": {"decision": "go"},
            },
        )
        assert resp.json()["status"] == "ack"
        state = wait_until(
            client,
            lambda s: not any(
                g["task"] == "base.launch_base_software" for g in s["state"]["gates"]
            ),
        )
        task = next(
            t for t in state["state"]["tasks"] if t["id"] == "base.launch_base_software"
        )
        assert task["status"] in ("active", "succeeded")

    def test_no_go_fails_task(self, gated):
        client, _ = gated
        wait_until(client, lambda s: s["state"]["gates"])
        client.post(
            "/command",
            json={
                "kind": "gate-decision",
                "target": "base.launch_base_software",
                "payload": {"decision": "no_go"},
            },
        )
        state = wait_until(
            client,
            lambda s: any(
                t["id"] == "base.launch_base_software" and t["status"] == "failed"
                for t in s["state"]["tasks"]
            ),
        )
        assert state["phase"] in ("running", "finished")

    def test_decision_without_open_gate_rejected(self, gated):
        client, _ = gated
        resp = client.post(
            "/command",
            json={
                "kind": "gate-decision",
                "target": "alpha.boot_computers",
                "payload": {"decision": "go"},
            },
        )
        assert resp.status_code == 409

    def test_select_robots_during_launch_gate(self, gated):
        client, _ = gated
        wait_until(
            client,
            lambda s: any(g["task"] == "base.launch_base_software" for g in s["state"]["gates"]),
        )
        resp = client.post(
            "/command", json={"kind": "select-robots", "payload": {"roster": ["alpha"]}}
        )
        assert resp.json() == {"status": "ack", "roster": ["alpha"]}
        state = client.get("/state").json()
        assert state["state"]["roster"] == ["alpha"]
        assert len(state["state"]["tasks"]) == 21  # 13*1 + 8

    def test_select_robots_after_gate_closed(self, gated):
        client, _ = gated
        wait_until(client, lambda s: s["state"]["gates"])
        client.post(
            "/command",
            json={
                "kind": "gate-decision",
                "target": "base.launch_base_software",
                "payload": {"decision": "go"},
            },
        )
        resp = client.post(
            "/command", json={"kind": "select-robots", "payload": {"roster": ["alpha"]}}
        )
        assert resp.status_code == 409
        assert "launch gate" in resp.json()["reason"]

    def test_select_robots_not_on_site(self, gated):
        client, _ = gated
        wait_until(client, lambda s: s["state"]["gates"])
        resp = client.post(
            "/command",
            json={"kind": "select-robots", "payload": {"roster": ["alpha", "zeta"]}},
        )
        assert resp.status_code == 409
        assert "not on site" in resp.json()["reason"]


class TestRobotCommands:
    def test_waypoint_and_comms_drop(self, gated):
        client, _ = gated
        resp = client.post(
            "/command",
            json={"kind": "waypoint", "target": "alpha", "payload": {"node": "n05"}},
        )
        assert resp.json() == {"status": "ack", "result": "applied"}
        resp = client.post("/command", json={"kind": "comms-node-drop", "target": "bravo"})
        assert resp.json() == {"status": "ack", "result": "applied"}

    def test_unknown_robot_and_node(self, gated):
        client, _ = gated
        resp = client.post(
            "/command",
            json={"kind": "waypoint", "target": "zeta", "payload": {"node": "n05"}},
        )
        assert resp.status_code == 404
        resp = client.post(
            "/command",
            json={"kind": "waypoint", "target": "alpha", "payload": {"node": "nowhere"}},
        )
        assert resp.status_code == 400

    def test_commands_are_logged_before_effects(self, gated):
        client, service = gated
        client.post(
            "/command",
            json={"kind": "waypoint", "target": "alpha", "payload": {"node": "n03"}},
        )
        events = service.runner.store.events
        commands = [
            (e.seq, e.payload)
            for e in events
            if e.kind == "operator-command" and e.payload.get("command") == "waypoint"
        ]
        assert commands and commands[0][1]["target"] == "alpha"


def _reviewable(state):
    """First artifact whose class has a ground-truth twin."""
    classes = {g["class"]: g for g in GROUND_TRUTH}
    for report in state["state"]["artifacts"]:
        if report["class"] in classes:
            return report, classes[report["class"]]
    return None, None


class TestArtifactReview:
    def test_full_review_flow_scores_correct(self, finished):
        client, _ = finished
        state = client.get("/state").json()
        report, truth = _reviewable(state)
        assert report is not None, "seeded scenario produced no matchable artifact"
        aid = report["id"]

        resp = client.post(f"/artifacts/{aid}/review", json={"action": "open"})
        assert resp.json()["artifact"]["status"] == "in_review"

        delta = [t - p for t, p in zip(truth["position"], report["position"])]
        resp = client.post(
            f"/artifacts/{aid}/review", json={"action": "adjust", "delta": delta}
        )
        adjusted = resp.json()["artifact"]["position"]
        assert adjusted == pytest.approx(truth["position"])

        client.post(f"/artifacts/{aid}/review", json={"action": "accept"})
        resp = client.post(f"/artifacts/{aid}/review", json={"action": "submit"})
        body = resp.json()["artifact"]
        assert body["status"] == "submitted"
        assert body["correct"] is True
        assert body["truth"] == truth["id"]

        state = client.get("/state").json()
        assert state["state"]["budget"] == 39

    def test_submit_unaccepted_rejected(self, finished):
        client, _ = finished
        state = client.get("/state").json()
        aid = state["state"]["artifacts"][0]["id"]
        resp = client.post(f"/artifacts/{aid}/review", json={"action": "submit"})
        assert resp.status_code == 409
        assert "accepted" in resp.json()["reason"]

    def test_no_double_submit(self, finished):
        client, _ = finished
        state = client.get("/state").json()
        aid = state["state"]["artifacts"][0]["id"]
        client.post(f"/artifacts/{aid}/review", json={"action": "accept"})
        assert client.post(f"/artifacts/{aid}/review", json={"action": "submit"}).status_code == 200
        resp = client.post(f"/artifacts/{aid}/review", json={"action": "submit"})
        assert resp.status_code == 409
        resp = client.post(f"/artifacts/{aid}/review", json={"action": "open"})
        assert resp.status_code == 409  # no un-submit

    def test_reject_leaves_budget(self, finished):
        client, _ = finished
        state = client.get("/state").json()
        aid = state["state"]["artifacts"][1]["id"]
        client.post(f"/artifacts/{aid}/review", json={"action": "reject"})
        state = client.get("/state").json()
        assert state["state"]["budget"] == 40
        report = next(a for a in state["state"]["artifacts"] if a["id"] == aid)
        assert report["status"] == "rejected"

    def test_unknown_artifact(self, finished):
        client, _ = finished
        resp = client.post("/artifacts/art-none/review", json={"action": "open"})
        assert resp.status_code == 404

    def test_budget_exhaustion(self):
        service = MissionService(
            scenario(budget=1), roster=["alpha", "bravo"], auto_operator=True, live=False
        )
        with TestClient(create_app(service)) as client:
            client.post("/mission/start", json={})
            state = wait_until(client, lambda s: s["phase"] == "finished")
            ids = [a["id"] for a in state["state"]["artifacts"][:2]]
            assert len(ids) == 2
            for aid in ids:
                client.post(f"/artifacts/{aid}/review", json={"action": "accept"})
            assert (
                client.post(f"/artifacts/{ids[0]}/review", json={"action": "submit"}).status_code
                == 200
            )
            resp = client.post(f"/artifacts/{ids[1]}/review", json={"action": "submit"})
            assert resp.status_code == 409
            assert "budget" in resp.json()["reason"]

    def test_review_via_command_endpoint(self, finished):
        client, _ = finished
        state = client.get("/state").json()
        aid = state["state"]["artifacts"][2]["id"]
        resp = client.post(
            "/command",
            json={"kind": "artifact-review", "target": aid, "payload": {"action": "accept"}},
        )
        assert resp.json()["artifact"]["status"] == "accepted"
        resp = client.post("/command", json={"kind": "artifact-submit", "target": aid})
        assert resp.json()["artifact"]["status"] == "submitted"


class TestTelemetry:
    def test_batch_appended(self, finished):
        client, _ = finished
        before = client.get("/state").json()
        body = {
            "samples": [
                {"t": 10.0, "x": 100, "y": 200},
                {"t": 10.67, "x": 110, "y": 205},
                {"t": 11.33, "x": 120, "y": 210},
            ],
            "switches": [{"t": 10.5, "view": "artifact-drawer"}],
        }
        resp = client.post("/telemetry", json=body)
        seqs = resp.json()["seqs"]
        assert len(seqs) == 4
        assert seqs == sorted(seqs)
        after = client.get("/state").json()
        assert after["state"]["cursor_samples"] == before["state"]["cursor_samples"] + 3
        assert after["state"]["view"] == "artifact-drawer"

    def test_non_monotone_rejected(self, finished):
        client, _ = finished
        body = {"samples": [{"t": 5.0, "x": 1, "y": 1}, {"t": 4.0, "x": 2, "y": 2}]}
        resp = client.post("/telemetry", json=body)
        assert resp.status_code == 400
        assert "monotone" in resp.json()["reason"]

    def test_malformed_sample_rejected(self, finished):
        client, _ = finished
        resp = client.post("/telemetry", json={"samples": [{"t": 1.0, "x": 3}]})
        assert resp.status_code == 400

    def test_switch_visible_on_stream(self, finished):
        client, _ = finished
        seqs = client.post(
            "/telemetry", json={"switches": [{"t": 20.0, "view": "health"}]}
        ).json()["seqs"]
        frames = read_stream(client, from_seq=seqs[0])
        assert frames[0][1] == "view-switch"
        assert frames[0][2]["payload"] == {"view": "health"}


class TestStream:
    def test_full_replica(self, finished):
        client, _ = finished
        state = client.get("/state").json()
        frames = read_stream(client, from_seq=0)
        assert [f[0] for f in frames] == list(range(state["seq"] + 1))
        assert frames[0][2]["payload"]["command"] == "start-mission"

    def test_resume_without_gaps_or_duplicates(self, finished):
        # drop a live tail mid-stream, then reconnect where it left off
        client, service = finished
        head = client.get("/state").json()["seq"]
        cut = head // 3
        tail = service.stream(0, follow=True)
        first = []
        for frame in tail:
            if frame.startswith("id: "):
                first.append(int(frame.split("\n", 1)[0].removeprefix("id: ")))
            if len(first) > cut:
                break
        tail.close()  # forced disconnect
        rest = read_stream(client, from_seq=first[-1] + 1)
        ids = first + [f[0] for f in rest]
        assert ids == list(range(head + 1))

    def test_follow_delivers_late_events(self, finished):
        client, service = finished
        head = service.runner.store.next_seq
        tail = service.stream(head, follow=True)
        seq = client.post(
            "/telemetry", json={"switches": [{"t": 99.0, "view": "map"}]}
        ).json()["seqs"][0]
        for frame in tail:
            if frame.startswith("id: "):
                assert frame.startswith(f"id: {seq}\nevent: view-switch\n")
                break
        tail.close()

    def test_from_beyond_head_rejected(self, finished):
        client, _ = finished
        head = client.get("/state").json()["seq"]
        resp = client.get(f"/events?from={head + 5}&follow=false")
        assert resp.status_code == 416

    def test_snapshot_equals_fold_of_stream(self, finished):
        client, _ = finished
        state = client.get("/state").json()
        frames = read_stream(client, from_seq=0)
        snap = MissionSnapshot()
        for _, _, record in frames:
            fold(snap, Event(**record))
        assert snapshot_view(snap) == state["state"]
        assert snap.last_seq == state["seq"]
