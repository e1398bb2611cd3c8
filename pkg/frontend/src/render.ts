/**
 * Pure HTML rendering: one function from (mission state, view state) to a
 * markup string, no DOM access, no clocks, no randomness.  Replaying the
 * same event prefix therefore renders byte-identical output — the shell
 * just swaps innerHTML and wires events through data-action attributes.
 */

import type { MissionState, TaskView } from "./fold.js";
import { BASE, tasksOf } from "./fold.js";
import type { ArtifactReport, GatePrompt, RobotHealth } from "./types.js";
import { badgeFor } from "./badges.js";
import type { Camera, Size } from "./map.js";
import { worldToScreen } from "./map.js";
import { cameraFor, mapSize, reviewQueue, selectedArtifact } from "./update.js";
import { bindingsFor } from "./keymap.js";
import type { ViewMode, ViewState } from "./view.js";

// -- small helpers -------------------------------------------------------------

export function esc(text: unknown): string {
  return String(text)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function clock(seconds: number): string {
  const total = Math.max(0, Math.round(seconds));
  const h = Math.floor(total / 3600);
  const m = Math.floor((total % 3600) / 60);
  const s = total % 60;
  const ms = `${String(m).padStart(2, "0")}:${String(s).padStart(2, "0")}`;
  return h > 0 ? `${h}:${ms}` : ms;
}

const px = (v: number) => Math.round(v * 10) / 10;
const pct = (v: number) => `${Math.round(v * 100)}%`;

// -- header / chrome -----------------------------------------------------------

const TABS: { mode: ViewMode; label: string; key: string }[] = [
  { mode: "split", label: "split", key: "1" },
  { mode: "expanded-map", label: "map", key: "2" },
  { mode: "health-grid", label: "health", key: "3" },
  { mode: "artifact-drawer", label: "artifacts", key: "4" },
];

function header(state: MissionState, view: ViewState): string {
  const plan =
    state.plan["feasible"] === undefined
      ? `<span class="plan none">plan &mdash;</span>`
      : state.plan["feasible"]
        ? `<span class="plan ok">plan ok</span>`
        : `<span class="plan bad">plan infeasible</span>`;
  const budget = state.budget === null ? "&mdash;" : String(state.budget);
  const tabs = TABS.map(
    (t) =>
      `<button class="tab${view.mode === t.mode ? " active" : ""}" data-action="set-mode" ` +
      `data-mode="${t.mode}" title="key ${t.key}">${t.label}</button>`,
  ).join("");
  return (
    `<header class="topbar">` +
    `<span class="scenario">${esc(state.scenario ?? "no mission")}</span>` +
    `<span class="clock">T+${clock(state.clock)}</span>` +
    `<span class="seq">#${state.lastSeq}</span>` +
    plan +
    `<span class="budget">budget ${budget}</span>` +
    `<nav class="tabs">${tabs}</nav>` +
    `</header>`
  );
}

function banners(view: ViewState): string {
  let out = "";
  if (view.stale) {
    out += `<div class="banner stale">event stream lost &mdash; showing last received state, reconnecting&hellip;</div>`;
  }
  if (view.notice !== null) {
    out += `<div class="notice" data-action="dismiss">${esc(view.notice)} <span class="x">&times;</span></div>`;
  }
  return out;
}

function hints(mode: ViewMode): string {
  const parts = bindingsFor(mode).map(
    (b) => `<span class="hint"><kbd>${esc(b.key)}</kbd> ${esc(b.help)}</span>`,
  );
  return `<footer class="hints">${parts.join(" ")}</footer>`;
}

// -- robot + task cards ----------------------------------------------------------

function robotCard(state: MissionState, view: ViewState, robot: string): string {
  const health = state.robots.get(robot);
  if (health === undefined) {
    return (
      `<div class="robot-card quiet" data-action="focus-robot" data-robot="${esc(robot)}">` +
      `<div class="card-head"><span class="name">${esc(robot)}</span>` +
      `<span class="badge nominal">no telemetry</span></div></div>`
    );
  }
  const badge = badgeFor(health);
  const focused = view.focusedRobot === robot ? " focused" : "";
  const bits: string[] = [];
  if (health.battery !== undefined) bits.push(`battery ${Math.round(health.battery)}%`);
  if (health.comms !== undefined) bits.push(esc(health.comms));
  if (health.behavior !== undefined) bits.push(esc(health.behavior));
  if (health.in_course) bits.push("in course");
  return (
    `<div class="robot-card lvl-${badge.level}${focused}" data-action="focus-robot" data-robot="${esc(robot)}">` +
    `<div class="card-head"><span class="name">${esc(robot)}</span>` +
    `<span class="badge ${badge.level}">${esc(badge.label)}</span></div>` +
    `<div class="card-body">${bits.join(" &middot; ")}</div>` +
    `</div>`
  );
}

function gateButtons(gate: GatePrompt): string {
  const btn = (decision: string, label: string) =>
    `<button class="gate-btn d-${decision}" data-action="gate-decision" ` +
    `data-task="${esc(gate.task)}" data-decision="${decision}">${label}</button>`;
  if (gate.gate === "gonogo") {
    return btn("go", "Go") + btn("no_go", "No-go");
  }
  if (gate.gate === "pre_operator" || gate.gate === "pre_pitcrew") {
    return btn("go", "Approve") + btn("no_go", "Halt");
  }
  return btn("confirm", "Confirm") + btn("no_go", "No-go"); // sign-offs
}

function gateBlock(state: MissionState, iid: string): string {
  const gate = state.gates.get(iid);
  if (gate === undefined) return "";
  return (
    `<div class="gate-prompt kind-${gate.gate}">` +
    `<span class="prompt">${esc(gate.prompt)}</span>` +
    `<span class="gate-actions">${gateButtons(gate)}</span>` +
    `</div>`
  );
}

function taskCard(state: MissionState, task: TaskView, starts: Map<string, number>): string {
  const meta: string[] = [task.status.replace("_", " ")];
  if (task.attempts > 1) meta.push(`try ${task.attempts}`);
  const start = starts.get(task.id);
  if (start !== undefined && task.status === "pending") meta.push(`@ ${clock(start)}`);
  return (
    `<div class="task-card st-${task.status}" data-task="${esc(task.id)}">` +
    `<span class="label">${esc(task.label)}</span>` +
    `<span class="meta">${meta.join(" &middot; ")}</span>` +
    gateBlock(state, task.id) +
    `</div>`
  );
}

function lane(state: MissionState, view: ViewState, robot: string): string {
  const starts = new Map(state.schedule.map((e) => [e.task, e.start]));
  const cards = tasksOf(state, robot)
    .map((t) => taskCard(state, t, starts))
    .join("");
  const card =
    robot === BASE
      ? `<div class="robot-card base"><div class="card-head"><span class="name">base station</span></div></div>`
      : robotCard(state, view, robot);
  return (
    `<div class="lane" data-robot="${esc(robot)}">` +
    card +
    `<div class="task-cards">${cards}</div>` +
    `</div>`
  );
}

// -- map -------------------------------------------------------------------------

function roadmapSvg(state: MissionState, cam: Camera, size: Size, labels: boolean): string {
  const course = state.course;
  if (course === null) return "";
  let out = "";
  for (const [nid, neighbours] of Object.entries(course.edges)) {
    const [x1, y1] = worldToScreen(cam, size, course.nodes[nid]);
    for (const other of neighbours) {
      if (other < nid) continue; // each edge once
      const [x2, y2] = worldToScreen(cam, size, course.nodes[other]);
      out += `<line class="edge" x1="${px(x1)}" y1="${px(y1)}" x2="${px(x2)}" y2="${px(y2)}"/>`;
    }
  }
  for (const [nid, pos] of Object.entries(course.nodes)) {
    const [sx, sy] = worldToScreen(cam, size, pos);
    const entrance = nid === course.entrance ? " entrance" : "";
    out += `<circle class="node${entrance}" data-node="${esc(nid)}" cx="${px(sx)}" cy="${px(sy)}" r="5"/>`;
  }
  if (labels) {
    const [ex, ey] = worldToScreen(cam, size, course.nodes[course.entrance]);
    out += `<text class="node-label" x="${px(ex + 8)}" y="${px(ey - 8)}">${esc(course.entrance)} (entrance)</text>`;
  }
  return out;
}

function artifactMarkers(state: MissionState, view: ViewState, cam: Camera, size: Size): string {
  let out = "";
  for (const report of state.artifacts) {
    const [sx, sy] = worldToScreen(cam, size, [report.position[0], report.position[1]]);
    const selected = view.drawerSelection === report.id ? " selected" : "";
    out +=
      `<g class="artifact st-${report.status}${selected}" data-artifact="${esc(report.id)}" ` +
      `transform="translate(${px(sx)},${px(sy)})">` +
      `<path d="M0 -7 L7 0 L0 7 L-7 0 Z"/>` +
      `<text x="9" y="4">${pct(report.confidence)}</text>` +
      `</g>`;
  }
  return out;
}

function robotMarkers(state: MissionState, view: ViewState, cam: Camera, size: Size): string {
  let out = "";
  for (const robot of state.roster) {
    const health = state.robots.get(robot);
    if (health?.pose === undefined) continue;
    const [sx, sy] = worldToScreen(cam, size, health.pose);
    const badge = badgeFor(health);
    const focused = view.focusedRobot === robot ? " focused" : "";
    out +=
      `<g class="robot lvl-${badge.level}${focused}" data-action="focus-robot" data-robot="${esc(robot)}" ` +
      `transform="translate(${px(sx)},${px(sy)})">` +
      `<circle r="7"/>` +
      `<text x="10" y="4">${esc(robot)}</text>` +
      `</g>`;
  }
  return out;
}

function mapPane(state: MissionState, view: ViewState): string {
  const size = mapSize(view.mode);
  const cam = cameraFor(state, view);
  const filterBtn = (name: "roadmap" | "artifacts" | "labels") =>
    `<button class="filter${view.filters[name] ? " on" : ""}" data-action="toggle-filter" ` +
    `data-filter="${name}">${name}</button>`;
  return (
    `<div class="map-pane">` +
    `<div class="map-tools">` +
    `<button class="overview-btn" data-action="overview" title="key o">overview</button>` +
    filterBtn("roadmap") +
    filterBtn("artifacts") +
    filterBtn("labels") +
    `</div>` +
    `<svg class="map" viewBox="0 0 ${size.w} ${size.h}" data-map="1" data-scale="${px(cam.scale)}" ` +
    `preserveAspectRatio="xMidYMid meet">` +
    `<rect class="map-bg" width="${size.w}" height="${size.h}"/>` +
    (view.filters.roadmap ? roadmapSvg(state, cam, size, view.filters.labels) : "") +
    (view.filters.artifacts ? artifactMarkers(state, view, cam, size) : "") +
    robotMarkers(state, view, cam, size) +
    `</svg>` +
    `</div>`
  );
}

function contextMenu(state: MissionState, view: ViewState): string {
  const menu = view.contextMenu;
  if (menu === null) return "";
  // every robot on the roster is commandable from here, in view or not
  const option = (cmd: "waypoint" | "comms-node-drop", robot: string, label: string) =>
    `<button class="menu-item" data-action="ctx-command" data-cmd="${cmd}" ` +
    `data-robot="${esc(robot)}" data-node="${esc(menu.node)}">${label}</button>`;
  const waypoints = state.roster.map((r) => option("waypoint", r, `send ${esc(r)} here`)).join("");
  const drops = state.roster
    .map((r) => option("comms-node-drop", r, `${esc(r)}: drop comms node`))
    .join("");
  return (
    `<div class="context-menu" style="left:${px(menu.sx)}px;top:${px(menu.sy)}px" data-node="${esc(menu.node)}">` +
    `<div class="menu-title">node ${esc(menu.node)}</div>` +
    `<div class="menu-section">waypoint</div>${waypoints}` +
    `<div class="menu-section">comms</div>${drops}` +
    `<button class="menu-item cancel" data-action="dismiss">cancel</button>` +
    `</div>`
  );
}

// -- bodies per mode ---------------------------------------------------------------

function splitBody(state: MissionState, view: ViewState): string {
  const lanes = [BASE, ...state.roster].map((robot) => lane(state, view, robot)).join("");
  return (
    `<div class="split">` +
    `<div class="lanes scroll">${lanes}</div>` +
    mapPane(state, view) +
    `</div>`
  );
}

function expandedBody(state: MissionState, view: ViewState): string {
  const chips = state.roster
    .map((robot) => {
      const health = state.robots.get(robot);
      const badge = health === undefined ? null : badgeFor(health);
      const level = badge?.level ?? "nominal";
      const battery = health?.battery !== undefined ? ` ${Math.round(health.battery)}%` : "";
      return (
        `<button class="chip lvl-${level}" data-action="focus-robot" data-robot="${esc(robot)}">` +
        `${esc(robot)}${battery}</button>`
      );
    })
    .join("");
  return (
    `<div class="expanded">` +
    `<div class="strip">${chips}</div>` +
    mapPane(state, view) +
    `</div>`
  );
}

function healthRow(label: string, value: string): string {
  return `<div class="h-row"><span class="h-label">${label}</span><span class="h-value">${value}</span></div>`;
}

function healthCard(state: MissionState, robot: string): string {
  const health: RobotHealth = state.robots.get(robot) ?? { robot };
  const badge = badgeFor(health);
  const alerts = Object.entries(health.alerts ?? {})
    .sort()
    .map(([sensor, status]) => `<span class="alert a-${esc(status)}">${esc(sensor)}: ${esc(status)}</span>`)
    .join(" ");
  const pose =
    health.pose !== undefined ? `${health.pose[0].toFixed(1)}, ${health.pose[1].toFixed(1)}` : "&mdash;";
  return (
    `<div class="health-card lvl-${badge.level}" data-robot="${esc(robot)}">` +
    `<div class="card-head" data-action="focus-robot" data-robot="${esc(robot)}">` +
    `<span class="name">${esc(robot)}</span><span class="badge ${badge.level}">${esc(badge.label)}</span></div>` +
    healthRow("behavior", health.behavior !== undefined ? esc(health.behavior) : "&mdash;") +
    healthRow("battery", health.battery !== undefined ? `${Math.round(health.battery)}%` : "&mdash;") +
    healthRow("comms", health.comms !== undefined ? esc(health.comms) : "&mdash;") +
    healthRow("pose", pose) +
    healthRow("in course", health.in_course ? "yes" : "no") +
    (alerts !== "" ? healthRow("alerts", alerts) : "") +
    `</div>`
  );
}

function healthBody(state: MissionState): string {
  const cards = state.roster.map((robot) => healthCard(state, robot)).join("");
  return `<div class="health-grid">${cards}</div>`;
}

function drawerItem(report: ArtifactReport, selected: boolean): string {
  return (
    `<div class="drawer-item st-${report.status}${selected ? " selected" : ""}" ` +
    `data-action="drawer-select" data-artifact="${esc(report.id)}">` +
    `<span class="conf">${pct(report.confidence)}</span>` +
    `<span class="cls">${esc(report.class)}</span>` +
    `<span class="st">${esc(report.status.replace("_", " "))}</span>` +
    `</div>`
  );
}

function submitButton(state: MissionState, report: ArtifactReport): string {
  if (report.status === "submitted") {
    return `<button class="review-btn" disabled>submit (s)</button><span class="why">already submitted</span>`;
  }
  if (state.budget !== null && state.budget <= 0) {
    return (
      `<button class="review-btn" disabled>submit (s)</button>` +
      `<span class="why">submission budget exhausted</span>`
    );
  }
  return `<button class="review-btn" data-action="review" data-review="submit">submit (s)</button>`;
}

function drawerDetail(state: MissionState, report: ArtifactReport | null): string {
  if (report === null) {
    return `<div class="drawer-detail empty">no report selected &mdash; <kbd>j</kbd> opens the next one</div>`;
  }
  const reviewBtn = (action: string, label: string) =>
    `<button class="review-btn" data-action="review" data-review="${action}">${label}</button>`;
  const position = report.position.map((v) => v.toFixed(1)).join(", ");
  const scored =
    report.correct === undefined
      ? ""
      : `<div class="row score ${report.correct ? "hit" : "miss"}">scored: ${report.correct ? "correct" : "miss"}${report.truth ? ` (${esc(report.truth)})` : ""}</div>`;
  return (
    `<div class="drawer-detail" data-artifact="${esc(report.id)}">` +
    `<h2>${esc(report.class)} <span class="conf">${pct(report.confidence)}</span></h2>` +
    `<div class="row">reported by ${esc(report.robot)} at T+${clock(report.at)}</div>` +
    `<div class="row">position ${position} m <span class="dim">(drag its marker on the map to adjust)</span></div>` +
    `<div class="row">status ${esc(report.status.replace("_", " "))} &middot; review time ${report.reviewed_in.toFixed(1)} s</div>` +
    scored +
    `<div class="review-actions">` +
    reviewBtn("open", "open (&#x23ce;)") +
    reviewBtn("accept", "accept (a)") +
    reviewBtn("reject", "reject (x)") +
    submitButton(state, report) +
    `</div>` +
    `<div class="budget-line">submission budget: ${state.budget === null ? "&mdash;" : state.budget}</div>` +
    `</div>`
  );
}

function drawerBody(state: MissionState, view: ViewState): string {
  const queue = reviewQueue(state);
  const items = queue.map((r) => drawerItem(r, r.id === view.drawerSelection)).join("");
  return (
    `<div class="drawer">` +
    `<div class="drawer-list">${items === "" ? `<div class="empty">no reports yet</div>` : items}</div>` +
    drawerDetail(state, selectedArtifact(state, view)) +
    mapPane(state, view) +
    `</div>`
  );
}

function setupBody(state: MissionState): string {
  return (
    `<div class="setup">` +
    `<h1>${esc(state.scenario ?? "mission")} &mdash; not started</h1>` +
    `<p>roster (comma-separated robot ids; empty for the scenario default)</p>` +
    `<input id="roster-input" placeholder="alpha,bravo,charlie,delta"/>` +
    `<button class="start-btn" data-action="start-mission">start mission</button>` +
    `</div>`
  );
}

// -- entry -------------------------------------------------------------------------

export function render(state: MissionState, view: ViewState): string {
  let body: string;
  if (state.lastSeq < 0) {
    body = setupBody(state);
  } else if (view.mode === "split") {
    body = splitBody(state, view);
  } else if (view.mode === "expanded-map") {
    body = expandedBody(state, view);
  } else if (view.mode === "health-grid") {
    body = healthBody(state);
  } else {
    body = drawerBody(state, view);
  }
  return (
    `<div class="console mode-${view.mode}">` +
    banners(view) +
    header(state, view) +
    `<main>${body}</main>` +
    contextMenu(state, view) +
    hints(view.mode) +
    `</div>`
  );
}
