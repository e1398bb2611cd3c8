/**
 * The operator keymap.  One table drives dispatch, the on-screen hint strip
 * and the handbook in the README, so they can't drift apart.
 */

import type { Action } from "./update.js";
import type { ViewMode } from "./view.js";

export interface KeyBinding {
  key: string; // KeyboardEvent.key
  help: string;
  /** Binding only fires in this mode; global when omitted. */
  when?: ViewMode;
  action: Action;
}

export const KEYMAP: KeyBinding[] = [
  { key: "1", help: "split view", action: { type: "set-mode", mode: "split" } },
  { key: "2", help: "expanded map", action: { type: "set-mode", mode: "expanded-map" } },
  { key: "3", help: "health grid", action: { type: "set-mode", mode: "health-grid" } },
  { key: "4", help: "artifact drawer", action: { type: "set-mode", mode: "artifact-drawer" } },
  { key: "o", help: "overview: whole course", action: { type: "overview" } },
  { key: "y", help: "go (oldest open go/no-go)", action: { type: "gate-hotkey", decision: "go" } },
  { key: "n", help: "no-go", action: { type: "gate-hotkey", decision: "no_go" } },
  {
    key: "j",
    when: "artifact-drawer",
    help: "next report (opens it)",
    action: { type: "drawer-step", dir: 1 },
  },
  {
    key: "k",
    when: "artifact-drawer",
    help: "previous report",
    action: { type: "drawer-step", dir: -1 },
  },
  {
    key: "Enter",
    when: "artifact-drawer",
    help: "open selected report",
    action: { type: "review", action: "open" },
  },
  {
    key: "a",
    when: "artifact-drawer",
    help: "accept",
    action: { type: "review", action: "accept" },
  },
  {
    key: "x",
    when: "artifact-drawer",
    help: "reject",
    action: { type: "review", action: "reject" },
  },
  {
    key: "s",
    when: "artifact-drawer",
    help: "submit accepted report",
    action: { type: "review", action: "submit" },
  },
  { key: "Escape", help: "dismiss menu / notice", action: { type: "dismiss" } },
];

export function lookupKey(key: string, mode: ViewMode): Action | null {
  for (const binding of KEYMAP) {
    if (binding.key === key && (binding.when === undefined || binding.when === mode)) {
      return binding.action;
    }
  }
  return null;
}

/** Bindings that apply in a mode, for the hint strip. */
export function bindingsFor(mode: ViewMode): KeyBinding[] {
  return KEYMAP.filter((b) => b.when === undefined || b.when === mode);
}
