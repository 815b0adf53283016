// View state and its reducer. Rendering never mutates simulation state; every
// user action becomes a POST and shows as "pending" until a newer record
// reflects it.

import type {
  BarrierSettings,
  BridgeState,
  Connection,
  Overlay,
  StepRecord,
  Topology,
} from "./types.js";

export const TRAIL_LENGTH = 160;

export interface ViewState {
  topology: Topology | null;
  record: StepRecord | null;
  trail: [number, number][];
  goal: [number, number] | null;
  broken: number[];
  barrier: BarrierSettings | null;
  overlays: Overlay[];
  paused: boolean;
  fault: string | null;
  connection: Connection;
  pending: { kind: string; since: number }[];
}

export function initialState(): ViewState {
  return {
    topology: null,
    record: null,
    trail: [],
    goal: null,
    broken: [],
    barrier: null,
    overlays: [],
    paused: false,
    fault: null,
    connection: "connecting",
    pending: [],
  };
}

export type Action =
  | { type: "snapshot"; state: BridgeState }
  | { type: "record"; record: StepRecord }
  | { type: "connection"; status: Connection }
  | { type: "command_sent"; kind: string; now: number }
  | { type: "paused"; paused: boolean };

export function targetPosition(topology: Topology, record: StepRecord): [number, number] {
  const d = topology.dimension;
  const t = topology.target_vertex;
  return [record.x_est[t * d], record.x_est[t * d + 1]];
}

function pushTrail(trail: [number, number][], pt: [number, number]): [number, number][] {
  const next = trail.concat([pt]);
  return next.length > TRAIL_LENGTH ? next.slice(next.length - TRAIL_LENGTH) : next;
}

export function reduce(state: ViewState, action: Action): ViewState {
  switch (action.type) {
    case "snapshot": {
      const s = action.state;
      const trail =
        s.record && s.topology
          ? pushTrail([], targetPosition(s.topology, s.record))
          : [];
      return {
        ...state,
        topology: s.topology,
        record: s.record,
        trail,
        goal: s.goal,
        broken: s.broken,
        barrier: s.barrier,
        overlays: s.overlays,
        paused: s.paused,
        fault: s.fault,
        pending: [],
      };
    }
    case "record": {
      const rec = action.record;
      if (state.record && rec.seq <= state.record.seq) {
        return state; // stale or duplicate delivery
      }
      const trail = state.topology
        ? pushTrail(state.trail, targetPosition(state.topology, rec))
        : state.trail;
      return {
        ...state,
        record: rec,
        trail,
        goal: rec.goal,
        broken: rec.broken,
        // a newer record settles all optimistic marks
        pending: [],
        connection: "live",
      };
    }
    case "connection":
      return { ...state, connection: action.status };
    case "command_sent":
      return {
        ...state,
        pending: state.pending.concat([{ kind: action.kind, since: action.now }]),
      };
    case "paused":
      return { ...state, paused: action.paused };
    default:
      return state;
  }
}
