import { describe, expect, it } from "vitest";

import { SAMPLE_HZ, TelemetryBuffer } from "../src/telemetry.js";

describe("cursor sampling", () => {
  it("averages the configured rate under fast polling", () => {
    const buf = new TelemetryBuffer("split");
    buf.movedTo(100, 200);
    for (let tick = 0; tick < 600; tick++) buf.sample(tick * 0.1); // 60s at 10 Hz polling
    const batch = buf.flush()!;
    const rate = batch.samples.length / 60;
    expect(Math.abs(rate - SAMPLE_HZ)).toBeLessThanOrEqual(0.05);
  });

  it("does not drift slow when polling is coarser than the sample period", () => {
    const buf = new TelemetryBuffer("split");
    buf.movedTo(0, 0);
    for (let tick = 0; tick < 120; tick++) buf.sample(tick * 0.5); // 60s at 2 Hz polling
    const batch = buf.flush()!;
    const rate = batch.samples.length / 60;
    expect(Math.abs(rate - SAMPLE_HZ)).toBeLessThanOrEqual(0.05);
  });

  it("cannot oversample no matter how hot the poll loop runs", () => {
    const buf = new TelemetryBuffer("split");
    buf.movedTo(0, 0);
    for (let tick = 0; tick < 6000; tick++) buf.sample(tick * 0.001); // 6s at 1 kHz
    const count = buf.flush()!.samples.length;
    expect(count).toBeLessThanOrEqual(Math.ceil(6 * SAMPLE_HZ) + 1);
    expect(count).toBeGreaterThanOrEqual(Math.floor(6 * SAMPLE_HZ));
  });

  it("a long idle gap resyncs the grid instead of bursting", () => {
    const buf = new TelemetryBuffer("split");
    buf.movedTo(0, 0);
    expect(buf.sample(0)).toBe(true);
    expect(buf.sample(100)).toBe(true); // resync here
    expect(buf.sample(100.1)).toBe(false); // no catch-up burst
    expect(buf.sample(100.7)).toBe(true);
  });

  it("stays silent until the cursor has actually moved", () => {
    const buf = new TelemetryBuffer("split");
    expect(buf.sample(0)).toBe(false);
    expect(buf.flush()).toBeNull();
  });

  it("samples carry the latest position and the current view", () => {
    const buf = new TelemetryBuffer("split");
    buf.movedTo(10, 20);
    buf.movedTo(30, 40);
    buf.sample(1);
    buf.recordSwitch(2, "health-grid");
    buf.sample(3);
    const batch = buf.flush()!;
    expect(batch.samples[0]).toEqual({ t: 1, x: 30, y: 40, view: "split" });
    expect(batch.samples[1]).toEqual({ t: 3, x: 30, y: 40, view: "health-grid" });
  });
});

describe("view switches", () => {
  it("records changes and drops same-view repeats", () => {
    const buf = new TelemetryBuffer("split");
    buf.recordSwitch(1, "split"); // already there
    buf.recordSwitch(2, "expanded-map");
    buf.recordSwitch(3, "expanded-map"); // repeat
    buf.recordSwitch(4, "split");
    const batch = buf.flush()!;
    expect(batch.switches).toEqual([
      { t: 2, view: "expanded-map" },
      { t: 4, view: "split" },
    ]);
    expect(batch.samples).toEqual([]);
  });
});

describe("batching", () => {
  it("flush drains everything and then reports empty", () => {
    const buf = new TelemetryBuffer("split");
    buf.movedTo(1, 1);
    buf.sample(0);
    buf.recordSwitch(1, "artifact-drawer");
    const first = buf.flush()!;
    expect(first.samples.length).toBe(1);
    expect(first.switches.length).toBe(1);
    expect(buf.flush()).toBeNull();
  });

  it("timestamps never go backwards within the outgoing stream", () => {
    const buf = new TelemetryBuffer("split");
    buf.movedTo(0, 0);
    buf.sample(10);
    buf.recordSwitch(9.5, "health-grid"); // clock skew: event timestamped before the sample
    buf.sample(11);
    const batch = buf.flush()!;
    expect(batch.switches[0].t).toBe(10); // clamped forward
    const ts = [...batch.samples.map((s) => s.t), ...batch.switches.map((s) => s.t)].sort(
      (a, b) => a - b,
    );
    expect(ts).toEqual([10, 10, 11]);
  });
});
