/**
 * Local view state: which layout mode is up, where the camera points, what
 * the operator has selected.  Mission facts never live here — rendering is
 * a pure function of (folded event prefix, this record).
 */

import type { Camera } from "./map.js";

export type ViewMode = "split" | "expanded-map" | "health-grid" | "artifact-drawer";

export const VIEW_MODES: ViewMode[] = [
  "split",
  "expanded-map",
  "health-grid",
  "artifact-drawer",
];

/** Point-of-interest layers the map can hide. */
export type PoiFilter = "roadmap" | "artifacts" | "labels";

export interface ContextMenu {
  node: string; // roadmap node id
  sx: number; // screen position, px
  sy: number;
}

export interface ViewState {
  mode: ViewMode;
  focusedRobot: string | null;
  /** null means overview: fit the whole course at render time. */
  camera: Camera | null;
  filters: Record<PoiFilter, boolean>;
  /** Selected artifact id in the drawer. */
  drawerSelection: string | null;
  contextMenu: ContextMenu | null;
  /** Non-modal strip for command rejections and hints. */
  notice: string | null;
  /** Event stream lost; banner until the next delivered event. */
  stale: boolean;
}

export function initialView(): ViewState {
  return {
    mode: "split",
    focusedRobot: null,
    camera: null,
    filters: { roadmap: true, artifacts: true, labels: true },
    drawerSelection: null,
    contextMenu: null,
    notice: null,
    stale: false,
  };
}
