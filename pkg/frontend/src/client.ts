/**
 * Thin HTTP layer: every mutation the console makes goes through here, as a
 * POST to /command or /artifacts/{id}/review (plus the /telemetry feed).
 * The poster is injectable so the action tests never touch a network.
 */

import type { OutRequest } from "./update.js";
import type { TelemetryBody } from "./types.js";

export interface HttpResult {
  ok: boolean;
  status: number;
  body: Record<string, unknown> | null;
}

export type Poster = (path: string, body: unknown) => Promise<HttpResult>;

export function fetchPoster(base: string): Poster {
  return async (path, body) => {
    const response = await fetch(base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    let decoded: Record<string, unknown> | null = null;
    try {
      decoded = (await response.json()) as Record<string, unknown>;
    } catch {
      decoded = null;
    }
    return { ok: response.ok, status: response.status, body: decoded };
  };
}

export function send(post: Poster, request: OutRequest): Promise<HttpResult> {
  if (request.kind === "command") {
    return post("/command", request.body);
  }
  return post(`/artifacts/${encodeURIComponent(request.artifact)}/review`, request.body);
}

export function postTelemetry(post: Poster, batch: TelemetryBody): Promise<HttpResult> {
  return post("/telemetry", batch);
}

/** Human-sized reason for the notice strip. */
export function describeRejection(result: HttpResult): string {
  const reason = result.body?.["reason"];
  if (typeof reason === "string" && reason !== "") return reason;
  return `request failed (http ${result.status})`;
}
