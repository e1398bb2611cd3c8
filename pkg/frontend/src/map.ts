/**
 * 2D top-down map math: camera transforms between world metres and screen
 * pixels, viewport fitting, node hit-testing.  Render draws with these, the
 * action layer uses them to turn pixel gestures into metre-scaled commands.
 */

import type { CourseDoc } from "./types.js";

export interface Camera {
  cx: number; // world centre, metres
  cy: number;
  scale: number; // pixels per metre
}

export interface Size {
  w: number;
  h: number;
}

// fixed logical canvas per view; SVG viewBox keeps it responsive on screen
export const SPLIT_MAP: Size = { w: 640, h: 440 };
export const EXPANDED_MAP: Size = { w: 1200, h: 640 };

export const FOCUS_SCALE = 6; // px per metre when centred on a single robot
export const MIN_SCALE = 0.5;
export const MAX_SCALE = 40;

export function worldToScreen(cam: Camera, size: Size, p: [number, number]): [number, number] {
  return [
    (p[0] - cam.cx) * cam.scale + size.w / 2,
    (p[1] - cam.cy) * cam.scale + size.h / 2,
  ];
}

export function screenToWorld(cam: Camera, size: Size, p: [number, number]): [number, number] {
  return [
    (p[0] - size.w / 2) / cam.scale + cam.cx,
    (p[1] - size.h / 2) / cam.scale + cam.cy,
  ];
}

/** A pixel displacement as world metres at the camera's current zoom. */
export function screenDeltaToWorld(cam: Camera, dxPx: number, dyPx: number): [number, number] {
  return [dxPx / cam.scale, dyPx / cam.scale];
}

/** Full-extent camera: the whole course visible with a margin. */
export function fitBounds(
  bounds: [number, number, number, number],
  size: Size,
  marginPx = 24,
): Camera {
  const [xmin, ymin, xmax, ymax] = bounds;
  const spanX = Math.max(xmax - xmin, 1);
  const spanY = Math.max(ymax - ymin, 1);
  const scale = Math.min(
    (size.w - 2 * marginPx) / spanX,
    (size.h - 2 * marginPx) / spanY,
  );
  return {
    cx: (xmin + xmax) / 2,
    cy: (ymin + ymax) / 2,
    scale: clampScale(scale),
  };
}

export function focusOn(pose: [number, number], scale = FOCUS_SCALE): Camera {
  return { cx: pose[0], cy: pose[1], scale };
}

export function panCamera(cam: Camera, dxPx: number, dyPx: number): Camera {
  const [dx, dy] = screenDeltaToWorld(cam, dxPx, dyPx);
  return { cx: cam.cx - dx, cy: cam.cy - dy, scale: cam.scale };
}

/** Zoom about a screen anchor: the world point under it stays put. */
export function zoomCamera(cam: Camera, size: Size, factor: number, anchor?: [number, number]): Camera {
  const scale = clampScale(cam.scale * factor);
  if (scale === cam.scale) return cam;
  const [ax, ay] = anchor ?? [size.w / 2, size.h / 2];
  const [wx, wy] = screenToWorld(cam, size, [ax, ay]);
  return {
    cx: wx - (ax - size.w / 2) / scale,
    cy: wy - (ay - size.h / 2) / scale,
    scale,
  };
}

function clampScale(scale: number): number {
  return Math.min(Math.max(scale, MIN_SCALE), MAX_SCALE);
}

/** Nearest roadmap node within radiusPx of a screen point, or null. */
export function hitNode(
  course: CourseDoc,
  cam: Camera,
  size: Size,
  point: [number, number],
  radiusPx = 12,
): string | null {
  let best: string | null = null;
  let bestDist = Infinity;
  for (const [id, pos] of Object.entries(course.nodes)) {
    const [sx, sy] = worldToScreen(cam, size, pos);
    const dist = Math.hypot(sx - point[0], sy - point[1]);
    if (dist < bestDist) {
      best = id;
      bestDist = dist;
    }
  }
  return bestDist <= radiusPx ? best : null;
}
