/**
 * Operator instrumentation: cursor position sampled at 1.5 Hz plus a record
 * of every view switch, batched for POST /telemetry.  The service insists on
 * non-decreasing timestamps within a batch, so the buffer clamps clock
 * oddities instead of letting a whole batch bounce.
 */

import type { CursorSampleOut, TelemetryBody, ViewSwitchOut } from "./types.js";

export const SAMPLE_HZ = 1.5;

export class TelemetryBuffer {
  private readonly period: number;
  private position: [number, number] | null = null;
  private view: string;
  private lastSampleT = -Infinity;
  private lastT = -Infinity;
  private samples: CursorSampleOut[] = [];
  private switches: ViewSwitchOut[] = [];

  constructor(initialView: string, rateHz: number = SAMPLE_HZ) {
    this.view = initialView;
    this.period = 1 / rateHz;
  }

  /** Latest cursor position in screen pixels (from mousemove). */
  movedTo(x: number, y: number): void {
    this.position = [x, y];
  }

  /**
   * Called on every poll tick; emits on an ideal 1/rate grid, so polling
   * faster than the rate cannot oversample and coarse polling still
   * averages out to the configured rate instead of drifting slow.
   */
  sample(t: number): boolean {
    if (this.position === null) return false;
    if (t - this.lastSampleT < this.period - 1e-9) return false;
    // advance the grid; resync after a long gap rather than bursting
    this.lastSampleT =
      t - this.lastSampleT > 2 * this.period ? t : this.lastSampleT + this.period;
    this.samples.push({
      t: this.clamp(t),
      x: this.position[0],
      y: this.position[1],
      view: this.view,
    });
    return true;
  }

  recordSwitch(t: number, view: string): void {
    if (view === this.view) return;
    this.view = view;
    this.switches.push({ t: this.clamp(t), view });
  }

  /** Drain the pending batch; null when there is nothing to send. */
  flush(): TelemetryBody | null {
    if (this.samples.length === 0 && this.switches.length === 0) return null;
    const batch = { samples: this.samples, switches: this.switches };
    this.samples = [];
    this.switches = [];
    return batch;
  }

  private clamp(t: number): number {
    const out = Math.max(t, this.lastT);
    this.lastT = out;
    return out;
  }
}
