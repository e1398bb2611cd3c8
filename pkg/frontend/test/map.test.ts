import { describe, expect, it } from "vitest";

import {
  EXPANDED_MAP,
  MAX_SCALE,
  MIN_SCALE,
  SPLIT_MAP,
  fitBounds,
  focusOn,
  hitNode,
  panCamera,
  screenDeltaToWorld,
  screenToWorld,
  worldToScreen,
  zoomCamera,
} from "../src/map.js";
import type { Camera } from "../src/map.js";
import type { CourseDoc } from "../src/types.js";
import { fixtureState } from "./fixture.js";

const cam: Camera = { cx: 10, cy: -4, scale: 3.5 };

describe("camera transforms", () => {
  it("world -> screen -> world is the identity", () => {
    for (const p of [
      [0, 0],
      [10, -4],
      [-33.3, 12.7],
      [180.25, 49.5],
    ] as [number, number][]) {
      const s = worldToScreen(cam, SPLIT_MAP, p);
      const back = screenToWorld(cam, SPLIT_MAP, s);
      expect(back[0]).toBeCloseTo(p[0], 9);
      expect(back[1]).toBeCloseTo(p[1], 9);
    }
  });

  it("the camera centre lands mid-canvas", () => {
    expect(worldToScreen(cam, SPLIT_MAP, [10, -4])).toEqual([320, 220]);
    expect(worldToScreen(cam, EXPANDED_MAP, [10, -4])).toEqual([600, 320]);
  });

  it("pixel deltas scale by pixels-per-metre", () => {
    expect(screenDeltaToWorld({ cx: 0, cy: 0, scale: 4 }, 8, -6)).toEqual([2, -1.5]);
    expect(screenDeltaToWorld({ cx: 0, cy: 0, scale: 0.5 }, 8, 0)).toEqual([16, 0]);
  });
});

describe("fitBounds", () => {
  it("centres the course and keeps every corner inside the margin", () => {
    const state = fixtureState();
    const bounds = state.course!.bounds;
    const fitted = fitBounds(bounds, SPLIT_MAP);
    expect(fitted.cx).toBe((bounds[0] + bounds[2]) / 2);
    expect(fitted.cy).toBe((bounds[1] + bounds[3]) / 2);
    const corners: [number, number][] = [
      [bounds[0], bounds[1]],
      [bounds[0], bounds[3]],
      [bounds[2], bounds[1]],
      [bounds[2], bounds[3]],
    ];
    for (const corner of corners) {
      const [sx, sy] = worldToScreen(fitted, SPLIT_MAP, corner);
      expect(sx).toBeGreaterThanOrEqual(24 - 1e-9);
      expect(sx).toBeLessThanOrEqual(SPLIT_MAP.w - 24 + 1e-9);
      expect(sy).toBeGreaterThanOrEqual(24 - 1e-9);
      expect(sy).toBeLessThanOrEqual(SPLIT_MAP.h - 24 + 1e-9);
    }
  });

  it("is limited by the tighter axis", () => {
    // 260m x 100m in 592px x 392px: x is the constraint
    const fitted = fitBounds([-40, -50, 220, 50], SPLIT_MAP);
    expect(fitted.scale).toBeCloseTo(592 / 260, 9);
  });

  it("a degenerate extent clamps to the maximum zoom instead of exploding", () => {
    const fitted = fitBounds([5, 5, 5, 5], SPLIT_MAP);
    expect(fitted.scale).toBe(MAX_SCALE);
    expect(fitted.cx).toBe(5);
  });
});

describe("pan and zoom", () => {
  it("panning moves the centre opposite the drag, in metres", () => {
    const panned = panCamera({ cx: 0, cy: 0, scale: 2 }, 10, -30);
    expect(panned).toEqual({ cx: -5, cy: 15, scale: 2 });
  });

  it("zooming about an anchor keeps that world point under the cursor", () => {
    const anchor: [number, number] = [100, 400];
    const pinned = screenToWorld(cam, SPLIT_MAP, anchor);
    let current = cam;
    for (const factor of [1.2, 1.2, 0.5, 3, 1 / 1.2]) {
      current = zoomCamera(current, SPLIT_MAP, factor, anchor);
      const [sx, sy] = worldToScreen(current, SPLIT_MAP, pinned);
      expect(sx).toBeCloseTo(anchor[0], 6);
      expect(sy).toBeCloseTo(anchor[1], 6);
    }
  });

  it("zoom clamps at both ends and returns the camera unchanged there", () => {
    const maxed = zoomCamera({ cx: 0, cy: 0, scale: MAX_SCALE }, SPLIT_MAP, 2);
    expect(maxed).toEqual({ cx: 0, cy: 0, scale: MAX_SCALE });
    const floored = zoomCamera({ cx: 0, cy: 0, scale: MIN_SCALE }, SPLIT_MAP, 0.1);
    expect(floored.scale).toBe(MIN_SCALE);
  });

  it("focusOn builds a close-up camera", () => {
    expect(focusOn([7, 8])).toEqual({ cx: 7, cy: 8, scale: 6 });
  });
});

describe("hitNode", () => {
  const course: CourseDoc = {
    nodes: { a: [0, 0], b: [10, 0], c: [0, 8] },
    edges: { a: ["b", "c"], b: ["a"], c: ["a"] },
    entrance: "a",
    bounds: [0, 0, 10, 8],
  };
  const flat: Camera = { cx: 5, cy: 4, scale: 1 };

  it("returns the nearest node within the radius", () => {
    const [sx, sy] = worldToScreen(flat, SPLIT_MAP, [1, 0.5]);
    expect(hitNode(course, flat, SPLIT_MAP, [sx, sy])).toBe("a");
  });

  it("misses when everything is too far away", () => {
    const [sx, sy] = worldToScreen(flat, SPLIT_MAP, [5, 4]); // 4m+ from each node at 1 px/m
    expect(hitNode(course, flat, SPLIT_MAP, [sx, sy], 3)).toBeNull();
  });

  it("exactly on the radius still counts", () => {
    const [sx, sy] = worldToScreen(flat, SPLIT_MAP, [-12, 0]); // 12px from a, farther from b and c
    expect(hitNode(course, flat, SPLIT_MAP, [sx, sy], 12)).toBe("a");
    expect(hitNode(course, flat, SPLIT_MAP, [sx - 0.5, sy], 12)).toBeNull();
  });

  it("ties break to the first node in course order", () => {
    const [sx, sy] = worldToScreen(flat, SPLIT_MAP, [5, 0]); // 5px from both a and b
    expect(hitNode(course, flat, SPLIT_MAP, [sx, sy])).toBe("a");
  });
});
