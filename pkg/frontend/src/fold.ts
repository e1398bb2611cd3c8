/**
 * Client-side replica of the mission snapshot: a pure fold over the event
 * log, byte-for-byte the same semantics as the server's own fold so a replayed
 * fixture renders exactly what a live stream would.
 *
 * The start-mission event carries the full template document and roster, so
 * the console regenerates the task graph locally: base-station tasks appear
 * once under the reserved robot key "base", robot tasks once per roster
 * member, instance ids "<robot>.<def-id>".
 */

import type {
  ArtifactReport,
  CourseDoc,
  CourseEntry,
  EventRecord,
  GateKind,
  GatePrompt,
  PhaseKind,
  RobotHealth,
  ScheduleEntry,
  TaskDefDoc,
  TaskStatus,
  TemplateDoc,
} from "./types.js";

export const BASE = "base";

export interface TaskView {
  id: string; // instance id
  robot: string;
  task: string; // definition id
  label: string;
  status: TaskStatus;
  attempts: number;
  gate: GateKind;
  phase: PhaseKind;
  duration: number;
  deadlineExtension: number;
}

export interface MissionState {
  scenario: string | null;
  roster: string[];
  budget: number | null;
  template: TemplateDoc | null;
  course: CourseDoc | null;
  tasks: Map<string, TaskView>;
  schedule: ScheduleEntry[];
  plan: Record<string, unknown>;
  robots: Map<string, RobotHealth>;
  gates: Map<string, GatePrompt>;
  artifacts: ArtifactReport[];
  courseEntries: CourseEntry[];
  view: string;
  cursorSamples: number;
  clock: number;
  lastSeq: number;
}

export function emptyState(): MissionState {
  return {
    scenario: null,
    roster: [],
    budget: null,
    template: null,
    course: null,
    tasks: new Map(),
    schedule: [],
    plan: {},
    robots: new Map(),
    gates: new Map(),
    artifacts: [],
    courseEntries: [],
    view: "mission",
    cursorSamples: 0,
    clock: 0,
    lastSeq: -1,
  };
}

export function instanceId(robot: string, defId: string): string {
  return `${robot}.${defId}`;
}

function makeTask(def: TaskDefDoc, robot: string): TaskView {
  return {
    id: instanceId(robot, def.id),
    robot,
    task: def.id,
    label: def.label,
    status: "pending",
    attempts: 0,
    gate: def.gate ?? "none",
    phase: def.phase ?? "setup",
    duration: def.duration,
    deadlineExtension: 0,
  };
}

// mirrors the server: regenerating for a new roster keeps the progress of
// every instance that survives the change
function setRoster(state: MissionState, roster: string[]): void {
  const template = state.template;
  if (template === null) return;
  const tasks = new Map<string, TaskView>();
  for (const def of template.base_tasks) {
    tasks.set(instanceId(BASE, def.id), makeTask(def, BASE));
  }
  for (const robot of roster) {
    for (const def of template.robot_tasks) {
      tasks.set(instanceId(robot, def.id), makeTask(def, robot));
    }
  }
  for (const [iid, task] of tasks) {
    const old = state.tasks.get(iid);
    if (old !== undefined) {
      task.status = old.status;
      task.attempts = old.attempts;
      task.deadlineExtension = old.deadlineExtension;
    }
  }
  state.tasks = tasks;
  state.roster = [...roster];
}

function foldOperatorCommand(state: MissionState, payload: Record<string, unknown>): void {
  const command = payload["command"];
  if (command === "start-mission") {
    state.template = payload["template"] as TemplateDoc;
    state.tasks = new Map();
    state.scenario = (payload["scenario"] as string | null) ?? null;
    state.budget = (payload["budget"] as number | null) ?? null;
    state.course = (payload["course"] as CourseDoc | null) ?? null;
    setRoster(state, payload["roster"] as string[]);
  } else if (command === "select-robots") {
    setRoster(state, payload["roster"] as string[]);
  }
  // anything else is an audit record; its effects arrive as later events
}

function foldTaskStatus(state: MissionState, payload: Record<string, unknown>): void {
  const affected = payload["affected"] as string[] | undefined;
  if (affected && affected.length > 0) {
    for (const iid of affected) {
      const task = state.tasks.get(iid);
      if (task !== undefined) {
        task.status = "pending";
        task.attempts = 0;
      }
      state.gates.delete(iid);
    }
    return;
  }
  const task = state.tasks.get(payload["task"] as string);
  if (task === undefined) return;
  task.status = payload["status"] as TaskStatus;
  task.attempts = (payload["attempt"] as number | undefined) ?? task.attempts;
}

function foldGate(state: MissionState, payload: Record<string, unknown>): void {
  const task = payload["task"] as string;
  if (payload["action"] === "requested") {
    state.gates.set(task, {
      task,
      gate: payload["gate"] as GateKind,
      prompt: payload["prompt"] as string,
      robot: payload["robot"] as string,
    });
  } else {
    // resolved or cancelled
    state.gates.delete(task);
  }
}

function foldPlan(state: MissionState, payload: Record<string, unknown>): void {
  if (payload["unchanged"]) {
    state.plan = { ...state.plan, trigger: payload["trigger"] };
    return;
  }
  state.plan = {
    trigger: payload["trigger"],
    feasible: payload["feasible"],
    plan_seq: payload["plan_seq"],
  };
  if (payload["feasible"]) {
    state.schedule = payload["entries"] as ScheduleEntry[];
    state.plan["blocked"] = payload["blocked"] ?? [];
  } else {
    state.plan["witness"] = payload["witness"] ?? [];
  }
}

function foldRelaxation(state: MissionState, payload: Record<string, unknown>): void {
  const relaxed = (payload["relaxed"] as { task: string; original: number; relaxed: number }[]) ?? [];
  for (const window of relaxed) {
    const task = state.tasks.get(window.task);
    if (task !== undefined) {
      task.deadlineExtension += window.relaxed - window.original;
    }
  }
}

function foldRobotHealth(state: MissionState, payload: Record<string, unknown>): void {
  const robot = payload["robot"] as string;
  const current = state.robots.get(robot) ?? { robot };
  const open = current as unknown as Record<string, unknown>;
  for (const [key, value] of Object.entries(payload)) {
    if (key !== "robot") open[key] = value;
  }
  state.robots.set(robot, current);
}

function foldCourseEntry(state: MissionState, payload: Record<string, unknown>, at: number): void {
  const robot = payload["robot"] as string;
  state.courseEntries.push({ robot, at, since_open: payload["since_open"] as number });
  const health = state.robots.get(robot) ?? { robot };
  health.in_course = true;
  state.robots.set(robot, health);
}

function findArtifact(state: MissionState, id: string): ArtifactReport | undefined {
  return state.artifacts.find((r) => r.id === id);
}

function foldArtifact(state: MissionState, payload: Record<string, unknown>, at: number): void {
  const action = payload["action"] as string;
  if (action === "detected") {
    state.artifacts.push({
      id: payload["id"] as string,
      robot: payload["robot"] as string,
      class: payload["class"] as string,
      confidence: payload["confidence"] as number,
      position: payload["position"] as number[],
      at,
      status: "unreviewed",
      reviewed_in: 0,
      opened_at: null,
    });
    return;
  }
  const report = findArtifact(state, payload["id"] as string);
  if (report === undefined) return;
  if (action === "open") {
    report.status = "in_review";
    report.opened_at = at;
  } else if (action === "adjust") {
    if ("class" in payload) report.class = payload["class"] as string;
    if ("position" in payload) report.position = payload["position"] as number[];
  } else if (action === "accept" || action === "reject") {
    if (report.opened_at !== null) {
      report.reviewed_in += at - report.opened_at;
      report.opened_at = null;
    }
    report.status = action === "accept" ? "accepted" : "rejected";
  } else if (action === "submit") {
    if (report.opened_at !== null) {
      report.reviewed_in += at - report.opened_at;
      report.opened_at = null;
    }
    report.status = "submitted";
    if (state.budget !== null) {
      state.budget = Math.max(0, state.budget - 1);
    }
  } else if (action === "scored") {
    report.correct = payload["correct"] as boolean;
    if ("truth" in payload) report.truth = payload["truth"] as string | null;
  }
}

/** Apply one event in place; returns the same state for chaining. */
export function foldEvent(state: MissionState, event: EventRecord): MissionState {
  const { kind, payload } = event;
  if (kind === "operator-command") foldOperatorCommand(state, payload);
  else if (kind === "task-status") foldTaskStatus(state, payload);
  else if (kind === "gate") foldGate(state, payload);
  else if (kind === "plan") foldPlan(state, payload);
  else if (kind === "relaxation") foldRelaxation(state, payload);
  else if (kind === "robot-health") foldRobotHealth(state, payload);
  else if (kind === "course-entry") foldCourseEntry(state, payload, event.at);
  else if (kind === "artifact") foldArtifact(state, payload, event.at);
  else if (kind === "cursor-sample") state.cursorSamples += 1;
  else if (kind === "view-switch") state.view = payload["view"] as string;
  state.clock = event.at;
  state.lastSeq = event.seq;
  return state;
}

export function replay(events: Iterable<EventRecord>): MissionState {
  const state = emptyState();
  for (const event of events) foldEvent(state, event);
  return state;
}

/** Parse an NDJSON event log; rejects sequence gaps just like the server. */
export function parseLog(text: string): EventRecord[] {
  const events: EventRecord[] = [];
  for (const line of text.split("\n")) {
    if (line.trim() === "") continue;
    const record = JSON.parse(line) as EventRecord;
    if (record.seq !== events.length) {
      throw new Error(`sequence gap at ${events.length}: found seq ${record.seq}`);
    }
    events.push(record);
  }
  return events;
}

/** Tasks of one robot, ordered the way the service lists them. */
export function tasksOf(state: MissionState, robot: string): TaskView[] {
  const starts = new Map(state.schedule.map((e) => [e.task, e.start]));
  const out = [...state.tasks.values()].filter((t) => t.robot === robot);
  out.sort((a, b) => {
    const sa = starts.get(a.id) ?? Infinity;
    const sb = starts.get(b.id) ?? Infinity;
    if (sa !== sb) return sa - sb;
    return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
  });
  return out;
}
