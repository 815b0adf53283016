import { describe, expect, it } from "vitest";

import { initialState, reduce, targetPosition, TRAIL_LENGTH } from "./state.js";
import type { BridgeState, StepRecord, Topology } from "./types.js";

const topology: Topology = {
  dimension: 2,
  vertex_count: 6,
  edges: [[0, 3], [3, 5], [0, 5], [1, 4], [3, 4], [1, 3], [2, 5], [4, 5], [2, 4]],
  triangles: [[0, 1, 2], [3, 4, 5], [6, 7, 8]],
  rollers: [],
  fixed_dofs: [[0, 0], [0, 1], [1, 1]],
  home: [0, 0, 2, 0, 1, 1.732, 1, 0, 1.5, 0.866, 0.5, 0.866],
  target_vertex: 2,
};

function record(seq: number, extra: Partial<StepRecord> = {}): StepRecord {
  return {
    k: seq,
    seq,
    time: seq * 0.5,
    x_est: topology.home.slice(),
    x_true: topology.home.slice(),
    d_cmd: [0, 0, 0, 0, 0, 0],
    d_real: [0, 0, 0, 0, 0, 0],
    h: 0.75,
    sigma_crit: 0.755,
    solve_status: "optimal",
    solve_time: 0.001,
    goal: [1, 1.732],
    objective: 0,
    manip: { M: 1, condition_number: 1.5, axes: [1, 0.5], angle: 0.2 },
    broken: [],
    plant_failed: [],
    detected: [],
    ...extra,
  };
}

function snapshot(rec: StepRecord | null): BridgeState {
  return {
    seq: rec ? rec.seq + 1 : 0,
    paused: false,
    fault: null,
    record: rec,
    goal: [1, 1.732],
    broken: rec ? rec.broken : [],
    plant_failed: [],
    barrier: { enabled: true, sigma_min: 0.01, alpha: 0.3, dt: 0.5, substeps: 10 },
    mode: "closed_loop",
    dt: 0.5,
    topology,
    overlays: [],
  };
}

describe("reducer", () => {
  it("rebuilds the same view from a snapshot (reload invariant)", () => {
    const rec = record(4, { broken: [1] });
    const a = reduce(initialState(), { type: "snapshot", state: snapshot(rec) });
    const b = reduce(initialState(), { type: "snapshot", state: snapshot(rec) });
    expect(a).toEqual(b);
    expect(a.record?.seq).toBe(4);
    expect(a.broken).toEqual([1]);
    expect(a.barrier?.alpha).toBe(0.3);
  });

  it("appends records to the trail and settles pending commands", () => {
    let s = reduce(initialState(), { type: "snapshot", state: snapshot(record(0)) });
    s = reduce(s, { type: "command_sent", kind: "goal", now: 1 });
    expect(s.pending).toHaveLength(1);
    const moved = record(1);
    moved.x_est = topology.home.slice();
    moved.x_est[4] = 1.1; // target vertex x moved
    s = reduce(s, { type: "record", record: moved });
    expect(s.pending).toHaveLength(0);
    expect(s.trail.length).toBe(2);
    expect(s.trail[1][0]).toBeCloseTo(1.1);
    expect(s.connection).toBe("live");
  });

  it("ignores stale or duplicate records", () => {
    let s = reduce(initialState(), { type: "snapshot", state: snapshot(record(5)) });
    const before = s;
    s = reduce(s, { type: "record", record: record(5) });
    expect(s).toBe(before);
    s = reduce(s, { type: "record", record: record(3) });
    expect(s).toBe(before);
  });

  it("caps the trail length", () => {
    let s = reduce(initialState(), { type: "snapshot", state: snapshot(record(0)) });
    for (let i = 1; i <= TRAIL_LENGTH + 20; i++) {
      s = reduce(s, { type: "record", record: record(i) });
    }
    expect(s.trail.length).toBe(TRAIL_LENGTH);
  });

  it("tracks connection status transitions", () => {
    let s = initialState();
    expect(s.connection).toBe("connecting");
    s = reduce(s, { type: "connection", status: "stale" });
    expect(s.connection).toBe("stale");
  });

  it("reads the target position from the estimate", () => {
    const rec = record(0);
    expect(targetPosition(topology, rec)).toEqual([1, 1.732]);
  });
});
