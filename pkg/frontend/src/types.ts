// Wire schema mirrored from the simulator server.

export interface Telemetry {
  type: "telemetry";
  t: number;
  status: "RUNNING" | "TIMEOUT" | "SIGNAL_LOST";
  time_remaining: number;
  odometry: { x: number; y: number; heading: number };
  camera_yaw: number;
  rss_percent: number;
  rss_bars: number;
  symbols_found: string[];
  collision: boolean;
  collisions_total: number;
  applied_control: { v_forward: number; v_lateral: number; camera_yaw_rate: number };
  // VDOA mode only
  bar_segments?: number[];
  bar_brightness?: number;
}

export interface Hello {
  type: "hello";
  scenario: string;
  mode: Mode;
  seed?: number;
  time_limit_s?: number;
  replay?: boolean;
  records?: number;
}

export interface WallGeom {
  p1: [number, number];
  p2: [number, number];
}

export interface SymbolGeom {
  id: string;
  position: [number, number];
  normal: [number, number];
  size_cm2: number;
}

export interface MapGeometry {
  name: string;
  bounds: [[number, number], [number, number]];
  walls: WallGeom[];
  symbols: SymbolGeom[];
  spawn: { position: [number, number]; heading: number };
  time_limit_s: number;
  interface_mode: Mode;
}

export type Mode = "vdoa" | "bar";

export interface ControlMessage {
  type: "control";
  v_forward: number;
  v_lateral: number;
  camera_yaw_rate: number;
  mark_found: string | null;
  client_time: number;
}

export interface ViewState {
  telemetry: Telemetry | null;
  mode: Mode;
}
