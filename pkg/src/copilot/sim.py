"""Deterministic fleet simulation.

A 2D course with a waypoint roadmap stands in for the real environment.
Robots hold station in the staging area during setup, enter the course when
their deploy task completes, then walk the roadmap and report detections.
Everything is driven by one seeded RNG and scripted fault/comms timelines,
so the emitted event stream is a pure function of the configuration.

Interaction with the executor happens through action bindings: the sim
provides (pre, post, on_success) callables per task def, and execution side
effects (course entry, behavior switches) are queued on `pending` for the
mission loop to persist in order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable

from .executor import ActionContext, Actions
from .model import MissionTemplate

ARTIFACT_CLASSES = (
    "survivor",
    "backpack",
    "cell_phone",
    "drill",
    "fire_extinguisher",
    "gas",
    "vent",
    "helmet",
    "rope",
    "cube",
)

SENSOR_GROUPS: dict[str, tuple[str, ...]] = {
    "power": (
        "battery_voltage",
        "battery_current",
        "power_distribution",
        "motor_power",
        "payload_power",
        "charging_circuit",
    ),
    "compute": (
        "main_computer",
        "autonomy_computer",
        "perception_gpu",
        "disk_space",
        "memory_usage",
        "cpu_thermal",
    ),
    "perception": (
        "lidar_front",
        "lidar_rear",
        "camera_front",
        "camera_left",
        "camera_right",
        "thermal_camera",
    ),
    "mobility": (
        "motor_front_left",
        "motor_front_right",
        "motor_rear_left",
        "motor_rear_right",
        "imu",
        "wheel_encoders",
    ),
    "comms": (
        "radio_primary",
        "radio_backup",
        "mesh_node_count",
        "signal_strength",
        "network_latency",
        "telemetry_link",
    ),
}

SENSORS: tuple[str, ...] = tuple(n for group in SENSOR_GROUPS.values() for n in group)

# ordinal severity; robot criticality is the max over all active conditions
SEVERITY = {
    "nominal": 0,
    "sensor_warn": 1,
    "sensor_fail": 2,
    "battery_low": 3,
    "stuck": 4,
    "fallen": 5,
}

_BEHAVIOR_SEVERITY = {"stuck": SEVERITY["stuck"], "fallen": SEVERITY["fallen"]}

FAULTS = ("sensor-fail", "fallen", "battery-low", "task-post-fail")

BATTERY_LOW_PCT = 20.0


@dataclass(frozen=True)
class CourseMap:
    nodes: dict[str, tuple[float, float]]
    edges: dict[str, tuple[str, ...]]
    entrance: str
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    def neighbors(self, node: str) -> tuple[str, ...]:
        return self.edges.get(node, ())

    def path(self, start: str, goal: str) -> list[str]:
        """Shortest hop path (BFS); [] when unreachable."""
        if start == goal:
            return []
        seen = {start: None}
        frontier = [start]
        while frontier:
            nxt: list[str] = []
            for node in frontier:
                for nb in self.neighbors(node):
                    if nb in seen:
                        continue
                    seen[nb] = node
                    if nb == goal:
                        path = [nb]
                        while seen[path[-1]] is not None:
                            path.append(seen[path[-1]])
                        path.reverse()
                        return path[1:]  # drop the start node itself
                    nxt.append(nb)
            frontier = nxt
        return []

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        xmin, ymin, xmax, ymax = self.bounds
        return (min(max(x, xmin), xmax), min(max(y, ymin), ymax))

    def to_doc(self) -> dict:
        """JSON form embedded in the mission log so consoles can draw the map."""
        return {
            "nodes": {nid: [x, y] for nid, (x, y) in sorted(self.nodes.items())},
            "edges": {nid: list(nbs) for nid, nbs in sorted(self.edges.items())},
            "entrance": self.entrance,
            "bounds": list(self.bounds),
        }

    @staticmethod
    def default() -> "CourseMap":
        nodes: dict[str, tuple[float, float]] = {}
        edges: dict[str, list[str]] = {}

        def add(nid: str, x: float, y: float) -> None:
            nodes[nid] = (float(x), float(y))
            edges.setdefault(nid, [])

        def connect(a: str, b: str) -> None:
            edges[a].append(b)
            edges[b].append(a)

        # main corridor from the portal, with three side branches
        for i in range(21):
            add(f"n{i:02d}", i * 10, 0)
            if i:
                connect(f"n{i-1:02d}", f"n{i:02d}")
        for j in range(1, 5):
            add(f"s05_{j}", 50, j * 10)
            connect(f"s05_{j-1}" if j > 1 else "n05", f"s05_{j}")
        for j in range(1, 5):
            add(f"s10_{j}", 100, -j * 10)
            connect(f"s10_{j-1}" if j > 1 else "n10", f"s10_{j}")
        for j in range(1, 4):
            add(f"s15_{j}", 150, j * 10)
            connect(f"s15_{j-1}" if j > 1 else "n15", f"s15_{j}")
        return CourseMap(
            nodes=nodes,
            edges={k: tuple(sorted(v)) for k, v in edges.items()},
            entrance="n00",
            bounds=(-40.0, -50.0, 220.0, 50.0),
        )


@dataclass(frozen=True)
class GroundTruth:
    id: str
    cls: str
    position: tuple[float, float, float]


@dataclass(frozen=True)
class SimConfig:
    seed: int = 7
    time_scale: float = 10.0
    detection_rate: float = 0.5  # detections per exploring robot-minute
    confidence_distribution: dict = field(
        default_factory=lambda: {"kind": "uniform", "low": 0.0, "high": 1.0}
    )
    flag_threshold: float = 0.4
    course_open: float = 1800.0
    robot_speed: float = 1.2  # m/s along the roadmap
    battery_drain: float = 100.0 / 7200.0  # percent per second
    ground_truth: tuple[GroundTruth, ...] = ()


def confidence_sample(rng: random.Random, dist: dict) -> float:
    kind = dist.get("kind", "uniform")
    if kind == "uniform":
        return rng.uniform(dist.get("low", 0.0), dist.get("high", 1.0))
    if kind == "beta":
        return rng.betavariate(dist["alpha"], dist["beta"])
    raise ValueError(f"unknown confidence distribution {kind!r}")


@dataclass
class RobotSim:
    id: str
    pose: tuple[float, float]
    behavior: str = "idle"
    battery: float = 100.0
    connected: bool = True
    in_course: bool = False
    sensors: dict[str, str] = field(default_factory=lambda: {n: "ok" for n in SENSORS})
    node: str | None = None
    target: str | None = None
    route: list[str] = field(default_factory=list)
    visited: set[str] = field(default_factory=set)
    trail: list[str] = field(default_factory=list)
    next_detection: float | None = None
    pending_post_fail: bool = False
    drop_done_at: float | None = None
    queued_commands: list[dict] = field(default_factory=list)
    buffer: list[tuple[str, dict, float]] = field(default_factory=list)
    last_health: dict | None = None


def criticality(robot: RobotSim) -> int:
    level = _BEHAVIOR_SEVERITY.get(robot.behavior, 0)
    if robot.battery < BATTERY_LOW_PCT:
        level = max(level, SEVERITY["battery_low"])
    for status in robot.sensors.values():
        if status == "fail":
            level = max(level, SEVERITY["sensor_fail"])
        elif status == "warn":
            level = max(level, SEVERITY["sensor_warn"])
    return level


class FleetSim:
    def __init__(
        self,
        roster: Iterable[str],
        config: SimConfig = SimConfig(),
        course: CourseMap | None = None,
    ) -> None:
        self.config = config
        self.course = course or CourseMap.default()
        self.rng = random.Random(config.seed)
        self.clock = 0.0
        self.robots: dict[str, RobotSim] = {}
        for i, rid in enumerate(roster):
            self.robots[rid] = RobotSim(id=rid, pose=(-25.0, 6.0 * i - 15.0))
        self._order = sorted(self.robots)
        self._scripts: list[tuple[float, int, str, dict]] = []  # (at, n, op, args)
        self._script_n = 0
        self.pending: list[tuple[str, dict]] = []  # events from action bindings
        self._detections = 0
        self.stats = {"detections": 0, "flagged": 0, "suppressed": 0}
        self.comms_nodes: list[tuple[float, float]] = []

    # -- scripting -------------------------------------------------------------

    def _schedule(self, at: float, op: str, args: dict) -> None:
        self._scripts.append((at, self._script_n, op, args))
        self._script_n += 1
        self._scripts.sort()

    def inject_failure(
        self, at: float, robot: str, fault: str, sensor: str | None = None
    ) -> None:
        if robot not in self.robots:
            raise ValueError(f"unknown robot {robot!r}")
        if fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r} (one of {', '.join(FAULTS)})")
        if sensor is not None and sensor not in SENSORS:
            raise ValueError(f"unknown sensor {sensor!r}")
        self._schedule(at, "fault", {"robot": robot, "fault": fault, "sensor": sensor})

    def set_comms(self, at: float, robot: str, connected: bool) -> None:
        if robot not in self.robots:
            raise ValueError(f"unknown robot {robot!r}")
        self._schedule(at, "comms", {"robot": robot, "connected": connected})

    def command(self, robot: str, command: dict) -> str:
        """Apply or queue a base-side command; returns applied | queued."""
        r = self.robots[robot]
        if not r.connected:
            r.queued_commands.append(command)
            return "queued"
        self._apply_command(r, command)
        return "applied"

    def _apply_command(self, r: RobotSim, command: dict) -> None:
        kind = command.get("kind")
        if kind == "waypoint":
            goal = command["node"]
            if goal not in self.course.nodes:
                raise ValueError(f"unknown roadmap node {goal!r}")
            if r.node is not None:
                r.route = self.course.path(r.node if r.target is None else r.target, goal)
        elif kind == "comms-node-drop":
            r.drop_done_at = self.clock + 10.0
            r.behavior = "dropping_comms_node"
        else:
            raise ValueError(f"unknown command {kind!r}")

    # -- event delivery (comms model) -------------------------------------------

    def _deliver(self, out: list, robot_id: str | None, kind: str, payload: dict) -> None:
        if robot_id is not None:
            r = self.robots[robot_id]
            if not r.connected:
                r.buffer.append((kind, payload, self.clock))
                return
        out.append((kind, payload))

    def _flush(self, out: list, r: RobotSim) -> None:
        for kind, payload, generated_at in r.buffer:
            out.append((kind, {**payload, "generated_at": generated_at}))
        r.buffer.clear()
        for command in r.queued_commands:
            self._apply_command(r, command)
        r.queued_commands.clear()

    # -- the clock --------------------------------------------------------------

    def step(self, dt: float) -> list[tuple[str, dict]]:
        """Advance dt seconds; returns (kind, payload) events in order."""
        if dt <= 0:
            return []
        self.clock += dt
        out: list[tuple[str, dict]] = []
        self._apply_scripts(out)
        for rid in self._order:
            self._move(self.robots[rid], dt)
        for rid in self._order:
            r = self.robots[rid]
            r.battery = max(0.0, r.battery - self.config.battery_drain * dt)
        for rid in self._order:
            self._detect(out, self.robots[rid])
        for rid in self._order:
            self._health(out, self.robots[rid])
        return out

    def _apply_scripts(self, out: list) -> None:
        while self._scripts and self._scripts[0][0] <= self.clock:
            _, _, op, args = self._scripts.pop(0)
            r = self.robots[args["robot"]]
            if op == "comms":
                was = r.connected
                r.connected = args["connected"]
                if r.connected and not was:
                    self._flush(out, r)
            elif op == "fault":
                fault = args["fault"]
                if fault == "sensor-fail":
                    r.sensors[args["sensor"] or "lidar_front"] = "fail"
                elif fault == "fallen":
                    r.behavior = "fallen"
                    r.route.clear()
                    r.target = None
                elif fault == "battery-low":
                    r.battery = min(r.battery, 15.0)
                elif fault == "task-post-fail":
                    r.pending_post_fail = True

    def _move(self, r: RobotSim, dt: float) -> None:
        if r.behavior == "dropping_comms_node":
            if r.drop_done_at is not None and self.clock >= r.drop_done_at:
                self.comms_nodes.append(r.pose)
                r.drop_done_at = None
                r.behavior = "exploring" if r.in_course else "idle"
            return
        if r.behavior != "exploring" or not r.in_course:
            return
        budget = self.config.robot_speed * dt
        while budget > 1e-9:
            if r.target is None:
                r.target = self._pick_target(r)
                if r.target is None:
                    return
            tx, ty = self.course.nodes[r.target]
            dx, dy = tx - r.pose[0], ty - r.pose[1]
            dist = (dx * dx + dy * dy) ** 0.5
            if dist <= budget:
                r.pose = (tx, ty)
                budget -= dist
                self._arrive(r, r.target)
                r.target = None
            else:
                r.pose = (r.pose[0] + dx / dist * budget, r.pose[1] + dy / dist * budget)
                budget = 0.0

    def _arrive(self, r: RobotSim, node: str) -> None:
        if r.node is not None and node not in r.visited and not r.route:
            r.trail.append(r.node)
        r.node = node
        r.visited.add(node)

    def _pick_target(self, r: RobotSim) -> str | None:
        if r.route:
            return r.route.pop(0)
        if r.node is None:
            return None
        fresh = sorted(n for n in self.course.neighbors(r.node) if n not in r.visited)
        if fresh:
            return self.rng.choice(fresh)
        if r.trail:
            return r.trail.pop()
        # everything reachable seen: wander again from here
        r.visited = {r.node}
        return None

    # -- detections ---------------------------------------------------------------

    def _rate_per_second(self) -> float:
        return self.config.detection_rate / 60.0

    def _detect(self, out: list, r: RobotSim) -> None:
        if r.behavior != "exploring" or not r.in_course:
            r.next_detection = None
            return
        rate = self._rate_per_second()
        if rate <= 0:
            return
        if r.next_detection is None:
            r.next_detection = self.clock + self.rng.expovariate(rate)
        while r.next_detection <= self.clock:
            self._emit_detection(out, r, r.next_detection)
            r.next_detection += self.rng.expovariate(rate)

    def _emit_detection(self, out: list, r: RobotSim, detected_at: float) -> None:
        self._detections += 1
        self.stats["detections"] += 1
        x = r.pose[0] + self.rng.uniform(-3.0, 3.0)
        y = r.pose[1] + self.rng.uniform(-3.0, 3.0)
        z = self.rng.uniform(0.0, 2.0)
        x, y = self.course.clamp(x, y)
        truth = self._nearest_truth(x, y)
        if truth is not None and self.rng.random() < 0.8:
            cls = truth.cls
        else:
            cls = self.rng.choice(ARTIFACT_CLASSES)
        confidence = confidence_sample(self.rng, self.config.confidence_distribution)
        if confidence < self.config.flag_threshold:
            self.stats["suppressed"] += 1
            return
        self.stats["flagged"] += 1
        payload = {
            "action": "detected",
            "id": f"det-{self._detections:04d}",
            "robot": r.id,
            "class": cls,
            "confidence": round(confidence, 4),
            "position": [round(x, 2), round(y, 2), round(z, 2)],
            "detected_at": detected_at,
            "truth": truth.id if truth is not None else None,
        }
        self._deliver(out, r.id, "artifact", payload)

    def _nearest_truth(self, x: float, y: float) -> GroundTruth | None:
        best, best_d = None, 12.0
        for gt in self.config.ground_truth:
            d = ((gt.position[0] - x) ** 2 + (gt.position[1] - y) ** 2) ** 0.5
            if d < best_d:
                best, best_d = gt, d
        return best

    # -- health -------------------------------------------------------------------

    def _health_payload(self, r: RobotSim) -> dict:
        alerts = {n: s for n, s in r.sensors.items() if s != "ok"}
        return {
            "robot": r.id,
            "pose": [round(r.pose[0], 1), round(r.pose[1], 1)],
            "behavior": r.behavior,
            "battery": int(r.battery),
            "comms": "connected" if r.connected else "disconnected",
            "in_course": r.in_course,
            "criticality": criticality(r),
            "alerts": alerts,
        }

    def _health(self, out: list, r: RobotSim) -> None:
        payload = self._health_payload(r)
        if r.last_health is None or payload != r.last_health:
            r.last_health = payload
            self._deliver(out, r.id, "robot-health", payload)

    # -- action bindings ------------------------------------------------------------

    def _robot(self, ctx: ActionContext) -> RobotSim | None:
        return self.robots.get(ctx.robot)

    def _pre(self, ctx: ActionContext):
        r = self._robot(ctx)
        if r is not None and r.behavior == "fallen":
            return False, f"{r.id} has fallen over"
        return True

    def _post(self, ctx: ActionContext):
        r = self._robot(ctx)
        if r is not None and r.pending_post_fail:
            r.pending_post_fail = False
            return False, "postcondition check failed (injected)"
        return True

    def _enter_course(self, ctx: ActionContext) -> None:
        r = self._robot(ctx)
        if r is None or r.in_course:
            return  # once per robot per mission
        r.in_course = True
        r.pose = self.course.nodes[self.course.entrance]
        r.node = self.course.entrance
        r.visited = {r.node}
        self.pending.append(
            (
                "course-entry",
                {"robot": r.id, "since_open": ctx.now - self.config.course_open},
            )
        )

    def _behavior_setter(self, behavior: str):
        def on_success(ctx: ActionContext) -> None:
            r = self._robot(ctx)
            if r is not None and r.behavior != "fallen":
                r.behavior = behavior

        return on_success

    def action_bindings(self, template: MissionTemplate) -> dict[str, Actions]:
        bindings: dict[str, Actions] = {}
        for d in template.base_tasks:
            bindings[d.id] = Actions()
        special = {
            "stage_robot": self._behavior_setter("setup"),
            "deploy_into_course": self._enter_course,
            "start_exploration": self._behavior_setter("exploring"),
        }
        for d in template.robot_tasks:
            bindings[d.id] = Actions(
                pre=self._pre, post=self._post, on_success=special.get(d.id)
            )
        return bindings

    def drain_pending(self) -> list[tuple[str, dict]]:
        out, self.pending = self.pending, []
        return out
