/**
 * Wire types shared with the mission control service.
 *
 * Everything here mirrors the JSON the service puts on the event stream and
 * the /state endpoint; the console holds no state of its own shape.  Event
 * payloads are typed for the fields the console reads — extra server fields
 * pass through untouched.
 */

export type EventKind =
  | "task-status"
  | "gate"
  | "plan"
  | "relaxation"
  | "robot-health"
  | "course-entry"
  | "artifact"
  | "cursor-sample"
  | "view-switch"
  | "operator-command";

export interface EventRecord {
  seq: number;
  at: number; // mission clock, seconds
  wall: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export type TaskStatus =
  | "pending"
  | "awaiting_gate"
  | "active"
  | "succeeded"
  | "failed";

export type GateKind =
  | "none"
  | "pre_operator"
  | "pre_pitcrew"
  | "signoff_operator"
  | "signoff_pitcrew"
  | "gonogo";

export type PhaseKind = "setup" | "deployment" | "exploration";

export type DepScope = "same_robot" | "base" | "all_robots";

export interface TaskDefDoc {
  id: string;
  label: string;
  duration: number;
  earliest_start: number;
  latest_end: number;
  deps?: { task: string; scope?: DepScope }[];
  gate?: GateKind;
  phase?: PhaseKind;
}

/** The mission template document embedded in the start-mission event. */
export interface TemplateDoc {
  schema: number;
  base_tasks: TaskDefDoc[];
  robot_tasks: TaskDefDoc[];
  phases: {
    setup_window: [number, number];
    exploration_window: [number, number];
  };
  resources?: { operator_capacity: number; pit_crew_capacity: number };
}

/** Roadmap document embedded alongside the template (nodes in metres). */
export interface CourseDoc {
  nodes: Record<string, [number, number]>;
  edges: Record<string, string[]>;
  entrance: string;
  bounds: [number, number, number, number]; // xmin, ymin, xmax, ymax
}

export interface RobotHealth {
  robot: string;
  pose?: [number, number];
  behavior?: string;
  battery?: number;
  comms?: "connected" | "disconnected";
  in_course?: boolean;
  criticality?: number;
  alerts?: Record<string, string>;
}

export type ArtifactStatus =
  | "unreviewed"
  | "in_review"
  | "accepted"
  | "rejected"
  | "submitted";

export interface ArtifactReport {
  id: string;
  robot: string;
  class: string;
  confidence: number;
  position: number[];
  at: number;
  status: ArtifactStatus;
  reviewed_in: number;
  opened_at: number | null;
  correct?: boolean;
  truth?: string | null;
}

export interface GatePrompt {
  task: string;
  gate: GateKind;
  prompt: string;
  robot: string;
}

export interface ScheduleEntry {
  task: string;
  start: number;
  end: number;
  [extra: string]: unknown;
}

export interface CourseEntry {
  robot: string;
  at: number;
  since_open: number;
}

/** Decisions resolve_gate accepts; no_go terminally fails the task. */
export type GateDecision = "go" | "no_go" | "confirm";

/** Body for POST /command. */
export interface CommandBody {
  kind: string;
  target: string | null;
  payload: Record<string, unknown>;
}

/** Body for POST /artifacts/{id}/review. */
export interface ReviewBody {
  action: "open" | "accept" | "reject" | "adjust" | "submit";
  [extra: string]: unknown;
}

export interface CursorSampleOut {
  t: number;
  x: number;
  y: number;
  view?: string;
}

export interface ViewSwitchOut {
  t: number;
  view: string;
}

/** Body for POST /telemetry. */
export interface TelemetryBody {
  samples: CursorSampleOut[];
  switches: ViewSwitchOut[];
}
