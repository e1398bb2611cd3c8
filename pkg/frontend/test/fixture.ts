/**
 * Shared test scaffolding: the frozen four-robot mission log recorded by the
 * service's own batch runner, plus builders for small synthetic missions.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { MissionState } from "../src/fold.js";
import { parseLog, replay } from "../src/fold.js";
import type { CourseDoc, EventKind, EventRecord, TemplateDoc } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export const FIXTURE_PATH = join(here, "..", "..", "tests", "fixtures", "mission_4robot.ndjson");

let cached: EventRecord[] | null = null;

export function fixtureEvents(): EventRecord[] {
  if (cached === null) {
    cached = parseLog(readFileSync(FIXTURE_PATH, "utf8"));
  }
  return cached;
}

export function fixtureState(): MissionState {
  return replay(fixtureEvents());
}

// -- synthetic missions -----------------------------------------------------------

export function ev(
  seq: number,
  at: number,
  kind: EventKind,
  payload: Record<string, unknown>,
): EventRecord {
  return { seq, at, wall: 1e9 + at, kind, payload };
}

export function miniTemplate(): TemplateDoc {
  return {
    schema: 1,
    base_tasks: [
      { id: "power_on", label: "Power on base", duration: 60, earliest_start: 0, latest_end: 1800 },
    ],
    robot_tasks: [
      {
        id: "config",
        label: "Load config",
        duration: 120,
        earliest_start: 0,
        latest_end: 1800,
        deps: [{ task: "power_on", scope: "base" }],
      },
      {
        id: "go_no_go",
        label: "Deployment go/no-go",
        duration: 30,
        earliest_start: 0,
        latest_end: 3600,
        gate: "gonogo",
        phase: "deployment",
        deps: [{ task: "config", scope: "same_robot" }],
      },
    ],
    phases: { setup_window: [0, 1800], exploration_window: [1800, 5400] },
  };
}

export function miniCourse(): CourseDoc {
  return {
    nodes: { n0: [0, 0], n1: [50, 0], n2: [100, 0], n3: [100, 40] },
    edges: { n0: ["n1"], n1: ["n0", "n2"], n2: ["n1", "n3"], n3: ["n2"] },
    entrance: "n0",
    bounds: [-10, -10, 110, 50],
  };
}

export interface StartOptions {
  budget?: number | null;
  scenario?: string;
  course?: CourseDoc | null;
  template?: TemplateDoc;
}

export function startEvent(roster: string[], options: StartOptions = {}): EventRecord {
  return ev(0, 0, "operator-command", {
    command: "start-mission",
    template: options.template ?? miniTemplate(),
    roster,
    budget: options.budget === undefined ? 10 : options.budget,
    scenario: options.scenario ?? "bench",
    course: options.course === undefined ? miniCourse() : options.course,
  });
}

export function healthEvent(
  seq: number,
  at: number,
  robot: string,
  extra: Record<string, unknown> = {},
): EventRecord {
  return ev(seq, at, "robot-health", {
    robot,
    pose: [0, 0],
    behavior: "idle",
    battery: 95,
    comms: "connected",
    in_course: false,
    criticality: 0,
    alerts: {},
    ...extra,
  });
}

export function detectedEvent(
  seq: number,
  at: number,
  id: string,
  confidence: number,
  extra: Record<string, unknown> = {},
): EventRecord {
  return ev(seq, at, "artifact", {
    action: "detected",
    id,
    robot: "alpha",
    class: "backpack",
    confidence,
    position: [40, 5, 0.5],
    ...extra,
  });
}

/** Order-stable plain-object projection for deep equality across replays. */
export function snapshotJson(state: MissionState): string {
  return JSON.stringify({
    scenario: state.scenario,
    roster: state.roster,
    budget: state.budget,
    clock: state.clock,
    lastSeq: state.lastSeq,
    view: state.view,
    cursorSamples: state.cursorSamples,
    tasks: [...state.tasks.values()],
    schedule: state.schedule,
    plan: state.plan,
    robots: [...state.robots.values()],
    gates: [...state.gates.values()],
    artifacts: state.artifacts,
    course: state.course,
    courseEntries: state.courseEntries,
  });
}
