/**
 * The single seam between operator input and the outside world.  update()
 * is pure: it maps (mission state, view state, action) to a new view state
 * plus the HTTP requests to fire.  The browser shell executes the requests;
 * tests assert on them directly.  Nothing here mutates mission state — that
 * only ever changes by folding served events.
 */

import type { MissionState } from "./fold.js";
import type { ArtifactReport, CommandBody, GateDecision, ReviewBody } from "./types.js";
import type { PoiFilter, ViewMode, ViewState } from "./view.js";
import {
  Camera,
  EXPANDED_MAP,
  Size,
  SPLIT_MAP,
  fitBounds,
  focusOn,
  panCamera,
  screenDeltaToWorld,
  zoomCamera,
} from "./map.js";

export type Action =
  | { type: "set-mode"; mode: ViewMode }
  | { type: "focus-robot"; robot: string }
  | { type: "overview" }
  | { type: "pan"; dxPx: number; dyPx: number }
  | { type: "zoom"; factor: number; sx?: number; sy?: number }
  | { type: "node-click"; node: string; sx: number; sy: number }
  | { type: "context-command"; command: "waypoint" | "comms-node-drop"; robot: string; node: string }
  | { type: "dismiss" }
  | { type: "toggle-filter"; filter: PoiFilter }
  | { type: "drawer-select"; id: string }
  | { type: "drawer-step"; dir: 1 | -1 }
  | { type: "review"; action: "open" | "accept" | "reject" | "submit" }
  | { type: "adjust-drag"; id: string; dxPx: number; dyPx: number }
  | { type: "gate-decision"; task: string; decision: GateDecision }
  | { type: "gate-hotkey"; decision: "go" | "no_go" }
  | { type: "start-mission"; roster: string[] | null };

export type OutRequest =
  | { kind: "command"; body: CommandBody }
  | { kind: "review"; artifact: string; body: ReviewBody };

export interface Step {
  view: ViewState;
  requests: OutRequest[];
}

// -- selectors shared with render ---------------------------------------------

export function mapSize(mode: ViewMode): Size {
  return mode === "expanded-map" ? EXPANDED_MAP : SPLIT_MAP;
}

/** The camera actually in effect: explicit, or full-course overview. */
export function cameraFor(state: MissionState, view: ViewState): Camera {
  if (view.camera !== null) return view.camera;
  if (state.course !== null) return fitBounds(state.course.bounds, mapSize(view.mode));
  return { cx: 0, cy: 0, scale: 2 };
}

/** Drawer queue: confidence descending, id as the deterministic tiebreak. */
export function reviewQueue(state: MissionState): ArtifactReport[] {
  return [...state.artifacts].sort((a, b) => {
    if (a.confidence !== b.confidence) return b.confidence - a.confidence;
    return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
  });
}

export function selectedArtifact(state: MissionState, view: ViewState): ArtifactReport | null {
  if (view.drawerSelection === null) return null;
  return state.artifacts.find((r) => r.id === view.drawerSelection) ?? null;
}

function command(kind: string, target: string | null, payload: Record<string, unknown> = {}): OutRequest {
  return { kind: "command", body: { kind, target, payload } };
}

function review(artifact: string, body: ReviewBody): OutRequest {
  return { kind: "review", artifact, body };
}

const cm = (x: number) => Math.round(x * 100) / 100;

// -- the reducer ---------------------------------------------------------------

export function update(state: MissionState, view: ViewState, action: Action): Step {
  const next: ViewState = { ...view, notice: null };
  const requests: OutRequest[] = [];

  switch (action.type) {
    case "set-mode": {
      next.mode = action.mode;
      next.contextMenu = null;
      if (action.mode === "artifact-drawer" && next.drawerSelection === null) {
        const queue = reviewQueue(state);
        if (queue.length > 0) next.drawerSelection = queue[0].id;
      }
      break;
    }

    case "focus-robot": {
      next.focusedRobot = action.robot;
      const pose = state.robots.get(action.robot)?.pose;
      if (pose !== undefined) next.camera = focusOn(pose);
      break;
    }

    case "overview": {
      next.focusedRobot = null;
      next.camera = null; // rendered as fit-to-course
      break;
    }

    case "pan": {
      next.camera = panCamera(cameraFor(state, view), action.dxPx, action.dyPx);
      break;
    }

    case "zoom": {
      const size = mapSize(view.mode);
      const anchor: [number, number] | undefined =
        action.sx !== undefined && action.sy !== undefined ? [action.sx, action.sy] : undefined;
      next.camera = zoomCamera(cameraFor(state, view), size, action.factor, anchor);
      break;
    }

    case "node-click": {
      // the menu itself lists every robot on the roster, in view or not
      next.contextMenu = { node: action.node, sx: action.sx, sy: action.sy };
      break;
    }

    case "context-command": {
      const payload = action.command === "waypoint" ? { node: action.node } : {};
      requests.push(command(action.command, action.robot, payload));
      next.contextMenu = null;
      break;
    }

    case "dismiss": {
      next.contextMenu = null;
      next.notice = null;
      break;
    }

    case "toggle-filter": {
      next.filters = { ...next.filters, [action.filter]: !next.filters[action.filter] };
      break;
    }

    case "drawer-select": {
      next.drawerSelection = action.id;
      break;
    }

    case "drawer-step": {
      const queue = reviewQueue(state);
      if (queue.length === 0) {
        next.notice = "no artifact reports yet";
        break;
      }
      const at = queue.findIndex((r) => r.id === view.drawerSelection);
      const idx =
        at === -1
          ? action.dir === 1
            ? 0
            : queue.length - 1
          : Math.min(Math.max(at + action.dir, 0), queue.length - 1);
      const report = queue[idx];
      next.drawerSelection = report.id;
      // stepping onto a fresh report opens it, so review timing starts
      if (report.status === "unreviewed") {
        requests.push(review(report.id, { action: "open" }));
      }
      break;
    }

    case "review": {
      const report = selectedArtifact(state, view);
      if (report === null) {
        next.notice = "no report selected";
        break;
      }
      if (action.action === "submit" && state.budget !== null && state.budget <= 0) {
        next.notice = "submission budget exhausted";
        break;
      }
      requests.push(review(report.id, { action: action.action }));
      break;
    }

    case "adjust-drag": {
      const cam = cameraFor(state, view);
      const [dx, dy] = screenDeltaToWorld(cam, action.dxPx, action.dyPx);
      requests.push(review(action.id, { action: "adjust", dx: cm(dx), dy: cm(dy) }));
      break;
    }

    case "gate-decision": {
      requests.push(command("gate-decision", action.task, { decision: action.decision }));
      break;
    }

    case "gate-hotkey": {
      // oldest open go/no-go; the gates map preserves request order
      let found = false;
      for (const gate of state.gates.values()) {
        if (gate.gate === "gonogo") {
          requests.push(command("gate-decision", gate.task, { decision: action.decision }));
          found = true;
          break;
        }
      }
      if (!found) next.notice = "no open go/no-go gate";
      break;
    }

    case "start-mission": {
      requests.push(
        command("start-mission", null, action.roster === null ? {} : { roster: action.roster }),
      );
      break;
    }
  }

  return { view: next, requests };
}

/** Shell helper: surface a rejection (or any message) non-modally. */
export function withNotice(view: ViewState, notice: string): ViewState {
  return { ...view, notice };
}
