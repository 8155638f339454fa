// Wire types for the session service (JSON over WebSocket, version 1).
// The UI never computes dynamics; every state it shows came from one of
// these frames.

export const PROTOCOL_VERSION = 1;

export interface ModelInfo {
  mode: "point-to-point" | "periodic";
  dim: number;
  s0: number;
  s_w: number;
  alpha: number;
  v_max: number;
  s_period: number | null;
  bounds: number[][]; // (d, 2) per-axis [lo, hi]
}

export interface HelloMsg {
  type: "hello";
  version: number;
  model: ModelInfo;
  nominal: number[][];
  tick_dt: number;
}

export interface StateFrame {
  type: "state";
  step: number;
  x: number[];
  s: number;
  phi_nom: number;
  phi_safe: number;
  phi: number;
  grad: number[];
  events: string[];
  terminated: boolean;
}

export interface AckMsg {
  type: "ack";
  command: string;
  client_tag: string | null;
  [extra: string]: unknown; // e.g. obstacle_id, frame
}

export interface ErrorMsg {
  type: "error";
  code: string;
  message: string;
  client_tag?: string | null;
  step?: number;
}

export interface ContourMsg {
  type: "contour";
  s: number;
  points: number[][];
  client_tag?: string | null;
}

// [step, kind, payload] rows, directly usable as a PerturbationSchedule
export type ScheduleRow = [number, string, number[]];

export interface LogMsg {
  type: "log";
  version: number;
  schedule: ScheduleRow[];
  client_tag?: string | null;
}

export interface FramesMsg {
  type: "frames";
  frames: StateFrame[];
  client_tag?: string | null;
}

export type ServerMsg =
  | HelloMsg
  | StateFrame
  | AckMsg
  | ErrorMsg
  | ContourMsg
  | LogMsg
  | FramesMsg;

export interface Command {
  type: string;
  payload?: Record<string, unknown>;
  client_tag: string;
}
