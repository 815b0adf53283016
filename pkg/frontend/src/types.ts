// Wire types matching the bridge service payloads.

export interface RollerInfo {
  triangle: number;
  edge_plus: number;
  edge_minus: number;
  vertex: number;
  active: boolean;
}

export interface Topology {
  dimension: number;
  vertex_count: number;
  edges: [number, number][];
  triangles: number[][];
  rollers: RollerInfo[];
  fixed_dofs: [number, number][];
  home: number[];
  target_vertex: number;
}

export interface ManipInfo {
  M: number;
  condition_number: number | null;
  axes: [number, number];
  angle: number;
}

export interface StepRecord {
  k: number;
  seq: number;
  time: number;
  x_est: number[];
  x_true: number[];
  d_cmd: number[];
  d_real: number[];
  h: number;
  sigma_crit: number;
  solve_status: string;
  solve_time: number;
  goal: [number, number];
  objective: number;
  manip: ManipInfo;
  broken: number[];
  plant_failed: number[];
  detected: number[];
}

export interface BarrierSettings {
  enabled: boolean;
  sigma_min: number;
  alpha: number;
  dt: number;
  substeps: number;
}

export interface Overlay {
  kind: string;
  mode: string;
  center: [number, number];
  angles: number[];
  radii: number[];
  area_m2: number;
}

export interface BridgeState {
  seq: number;
  paused: boolean;
  fault: string | null;
  record: StepRecord | null;
  goal: [number, number];
  broken: number[];
  plant_failed: number[];
  barrier: BarrierSettings;
  mode: string;
  dt: number;
  topology: Topology;
  overlays: Overlay[];
}

export type Connection = "connecting" | "live" | "stale";
