/**
 * Status badges distill a robot's worst condition into three attention
 * levels.  The numeric criticality comes from the fleet on the health feed
 * (0 nominal, 1 sensor warn, 2 sensor fail, 3 battery low, 4 stuck,
 * 5 fallen); a comms blackout is at least a caution even at criticality 0.
 */

import type { RobotHealth } from "./types.js";

export type BadgeLevel = "nominal" | "caution" | "critical";

export interface StatusBadge {
  robot: string;
  level: BadgeLevel;
  label: string;
}

export const LEVEL_RANK: Record<BadgeLevel, number> = {
  nominal: 0,
  caution: 1,
  critical: 2,
};

const CRITICAL_FLOOR = 3; // battery low and worse demand immediate attention

function levelOf(criticality: number, commsLost: boolean): BadgeLevel {
  if (criticality >= CRITICAL_FLOOR) return "critical";
  if (criticality >= 1 || commsLost) return "caution";
  return "nominal";
}

function worstSensor(alerts: Record<string, string>): string | null {
  let warn: string | null = null;
  for (const [sensor, status] of Object.entries(alerts).sort()) {
    if (status === "fail") return `${sensor} fail`;
    if (status === "warn" && warn === null) warn = `${sensor} warn`;
  }
  return warn;
}

export function badgeFor(health: RobotHealth): StatusBadge {
  const criticality = health.criticality ?? 0;
  const commsLost = health.comms === "disconnected";
  let label: string;
  if (criticality >= 5) label = "fallen";
  else if (criticality >= 4) label = "stuck";
  else if (criticality >= 3) label = "battery low";
  else if (criticality >= 1) label = worstSensor(health.alerts ?? {}) ?? "sensor alert";
  else if (commsLost) label = "comms lost";
  else label = "nominal";
  return { robot: health.robot, level: levelOf(criticality, commsLost), label };
}

/** Critical dominates caution dominates nominal, never the other way. */
export function worstLevel(levels: Iterable<BadgeLevel>): BadgeLevel {
  let worst: BadgeLevel = "nominal";
  for (const level of levels) {
    if (LEVEL_RANK[level] > LEVEL_RANK[worst]) worst = level;
  }
  return worst;
}
