/**
 * Server-sent events, consumed by hand over fetch streaming so reconnects
 * and resume cursors stay under our control (and under test).  The service
 * frames every record as
 *
 *     id: <seq>\nevent: <kind>\ndata: <json>\n\n
 *
 * with ": keepalive" comment frames while idle.  On reconnect the console
 * asks for ?from=<last seq + 1>; the cursor drops anything already seen, so
 * an overlapping resume can't double-apply events.
 */

import type { EventRecord } from "./types.js";

export interface SseFrame {
  id: string | null;
  event: string | null;
  data: string | null;
}

export interface ParseResult {
  frames: SseFrame[];
  /** Unterminated tail, to prepend to the next chunk. */
  rest: string;
}

/** Split buffered stream text into complete frames; comments are dropped. */
export function parseStream(buffer: string): ParseResult {
  const frames: SseFrame[] = [];
  const parts = buffer.split("\n\n");
  const rest = parts.pop() ?? "";
  for (const part of parts) {
    const frame = parseFrame(part);
    if (frame !== null) frames.push(frame);
  }
  return { frames, rest };
}

function parseFrame(block: string): SseFrame | null {
  let id: string | null = null;
  let event: string | null = null;
  const data: string[] = [];
  for (const line of block.split("\n")) {
    if (line === "" || line.startsWith(":")) continue; // comment / keepalive
    const colon = line.indexOf(":");
    const field = colon === -1 ? line : line.slice(0, colon);
    let value = colon === -1 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    if (field === "id") id = value;
    else if (field === "event") event = value;
    else if (field === "data") data.push(value);
  }
  if (id === null && event === null && data.length === 0) return null;
  return { id, event, data: data.length > 0 ? data.join("\n") : null };
}

/**
 * Ordered-delivery cursor over the event stream.  Tracks the last applied
 * seq for resume, flags staleness across disconnects, and counts gaps
 * (which the resume contract should make impossible).
 */
export class EventCursor {
  lastSeq = -1;
  stale = false;
  gaps = 0;

  /** Returns the decoded record, or null for keepalives and duplicates. */
  accept(frame: SseFrame): EventRecord | null {
    if (frame.data === null) return null;
    const record = JSON.parse(frame.data) as EventRecord;
    if (record.seq <= this.lastSeq) return null; // overlap on resume
    if (record.seq > this.lastSeq + 1) this.gaps += 1;
    this.lastSeq = record.seq;
    this.stale = false;
    return record;
  }

  markDisconnected(): void {
    this.stale = true;
  }

  /** Query string for the next connection attempt. */
  resumeQuery(): string {
    return `?from=${this.lastSeq + 1}`;
  }
}
