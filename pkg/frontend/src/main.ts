/**
 * Browser shell: the only module that touches the DOM and the network.
 * Everything it does is a thin loop around the pure core —
 *
 *   stream events -> foldEvent -> render -> innerHTML
 *   input -> Action -> update -> (new view, requests) -> POST
 *
 * Point it at a service with ?service=http://host:port (defaults to the
 * local service port).
 */

import { emptyState, foldEvent } from "./fold.js";
import { initialView } from "./view.js";
import type { Action } from "./update.js";
import { update, withNotice } from "./update.js";
import { render } from "./render.js";
import { lookupKey } from "./keymap.js";
import { EventCursor, parseStream } from "./sse.js";
import { describeRejection, fetchPoster, postTelemetry, send } from "./client.js";
import { TelemetryBuffer } from "./telemetry.js";
import type { PoiFilter, ViewMode } from "./view.js";
import type { GateDecision } from "./types.js";

const BASE =
  new URLSearchParams(location.search).get("service") ?? `http://${location.hostname}:8800`;

const root = document.getElementById("root")!;
const post = fetchPoster(BASE);
const state = emptyState();
let view = initialView();
const cursor = new EventCursor();
const telemetry = new TelemetryBuffer(view.mode);
const startedAt = performance.now();

const nowT = () => (performance.now() - startedAt) / 1000;

let painting = false;
function paint(): void {
  if (painting) return;
  painting = true;
  requestAnimationFrame(() => {
    painting = false;
    view = { ...view, stale: cursor.stale };
    root.innerHTML = render(state, view);
  });
}

function dispatch(action: Action): void {
  const before = view.mode;
  const step = update(state, view, action);
  view = step.view;
  if (view.mode !== before) telemetry.recordSwitch(nowT(), view.mode);
  for (const request of step.requests) {
    send(post, request)
      .then((result) => {
        if (!result.ok) {
          view = withNotice(view, describeRejection(result));
          paint();
        }
      })
      .catch(() => {
        view = withNotice(view, "service unreachable");
        paint();
      });
  }
  paint();
}

// -- input wiring ---------------------------------------------------------------

document.addEventListener("keydown", (e) => {
  if (e.target instanceof HTMLInputElement) return; // typing a roster
  const action = lookupKey(e.key, view.mode);
  if (action !== null) {
    e.preventDefault();
    dispatch(action);
  }
});

document.addEventListener("mousemove", (e) => {
  telemetry.movedTo(e.clientX, e.clientY);
});

root.addEventListener("click", (e) => {
  const hit = (e.target as Element).closest("[data-action]");
  if (hit === null) return;
  const data = (hit as HTMLElement).dataset;
  switch (data.action) {
    case "set-mode":
      dispatch({ type: "set-mode", mode: data.mode as ViewMode });
      break;
    case "focus-robot":
      dispatch({ type: "focus-robot", robot: data.robot! });
      break;
    case "overview":
      dispatch({ type: "overview" });
      break;
    case "toggle-filter":
      dispatch({ type: "toggle-filter", filter: data.filter as PoiFilter });
      break;
    case "drawer-select":
      dispatch({ type: "drawer-select", id: data.artifact! });
      break;
    case "review":
      dispatch({ type: "review", action: data.review as "open" | "accept" | "reject" | "submit" });
      break;
    case "gate-decision":
      dispatch({
        type: "gate-decision",
        task: data.task!,
        decision: data.decision as GateDecision,
      });
      break;
    case "ctx-command":
      dispatch({
        type: "context-command",
        command: data.cmd as "waypoint" | "comms-node-drop",
        robot: data.robot!,
        node: data.node!,
      });
      break;
    case "dismiss":
      dispatch({ type: "dismiss" });
      break;
    case "start-mission": {
      const input = document.getElementById("roster-input") as HTMLInputElement | null;
      const text = input?.value.trim() ?? "";
      const roster = text === "" ? null : text.split(",").map((r) => r.trim()).filter(Boolean);
      dispatch({ type: "start-mission", roster });
      break;
    }
  }
});

// roadmap node clicks open the context menu at the pointer
root.addEventListener("click", (e) => {
  const node = (e.target as Element).closest(".node");
  if (node === null) return;
  const id = (node as SVGElement).dataset.node;
  if (id !== undefined) {
    dispatch({ type: "node-click", node: id, sx: e.clientX, sy: e.clientY });
  }
});

// drag an artifact marker to adjust its reported position
let drag: { id: string; x: number; y: number; moved: boolean } | null = null;
root.addEventListener("pointerdown", (e) => {
  const marker = (e.target as Element).closest(".artifact");
  if (marker === null) return;
  const id = (marker as SVGElement).dataset.artifact;
  if (id !== undefined) {
    drag = { id, x: e.clientX, y: e.clientY, moved: false };
    e.preventDefault();
  }
});
document.addEventListener("pointermove", (e) => {
  if (drag !== null && Math.hypot(e.clientX - drag.x, e.clientY - drag.y) > 3) {
    drag.moved = true;
  }
});
document.addEventListener("pointerup", (e) => {
  if (drag === null) return;
  const { id, x, y, moved } = drag;
  drag = null;
  if (moved) {
    dispatch({ type: "adjust-drag", id, dxPx: e.clientX - x, dyPx: e.clientY - y });
  } else {
    dispatch({ type: "drawer-select", id });
  }
});

// map pan (drag empty map) and wheel zoom
let mapDrag: { x: number; y: number } | null = null;
root.addEventListener("pointerdown", (e) => {
  const svg = (e.target as Element).closest("svg.map");
  if (svg === null || (e.target as Element).closest(".artifact, .robot, .node") !== null) return;
  mapDrag = { x: e.clientX, y: e.clientY };
});
document.addEventListener("pointermove", (e) => {
  if (mapDrag === null) return;
  const dx = e.clientX - mapDrag.x;
  const dy = e.clientY - mapDrag.y;
  if (Math.hypot(dx, dy) > 6) {
    mapDrag = { x: e.clientX, y: e.clientY };
    dispatch({ type: "pan", dxPx: dx, dyPx: dy });
  }
});
document.addEventListener("pointerup", () => {
  mapDrag = null;
});
root.addEventListener(
  "wheel",
  (e) => {
    const svg = (e.target as Element).closest("svg.map");
    if (svg === null) return;
    e.preventDefault();
    const rect = (svg as SVGSVGElement).getBoundingClientRect();
    const viewBox = (svg as SVGSVGElement).viewBox.baseVal;
    const scaleX = viewBox.width / rect.width;
    dispatch({
      type: "zoom",
      factor: e.deltaY < 0 ? 1.2 : 1 / 1.2,
      sx: (e.clientX - rect.left) * scaleX,
      sy: (e.clientY - rect.top) * scaleX,
    });
  },
  { passive: false },
);

// -- event stream ----------------------------------------------------------------

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

async function streamLoop(): Promise<void> {
  const decoder = new TextDecoder();
  for (;;) {
    try {
      const response = await fetch(`${BASE}/events${cursor.resumeQuery()}`);
      if (response.status === 409) {
        // mission not started yet; the setup panel stays up
        await sleep(1000);
        continue;
      }
      if (!response.ok || response.body === null) throw new Error(`http ${response.status}`);
      const reader = response.body.getReader();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        const { frames, rest } = parseStream(buffer);
        buffer = rest;
        let folded = false;
        for (const frame of frames) {
          const record = cursor.accept(frame);
          if (record !== null) {
            foldEvent(state, record);
            folded = true;
          }
        }
        if (folded) paint();
      }
    } catch {
      // fall through to reconnect
    }
    cursor.markDisconnected();
    paint();
    await sleep(1000);
  }
}

// -- telemetry loop ----------------------------------------------------------------

setInterval(() => {
  telemetry.sample(nowT());
}, 200);

setInterval(() => {
  const batch = telemetry.flush();
  if (batch !== null && cursor.lastSeq >= 0) {
    void postTelemetry(post, batch).catch(() => {});
  }
}, 4000);

paint();
void streamLoop();
