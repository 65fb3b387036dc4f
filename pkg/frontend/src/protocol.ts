// Wire protocol types, schema "rcm-wire-1" (see ../docs/wire-schema.json).
// One JSON object per WebSocket text frame; seq strictly increases per
// connection in each direction.

export const WIRE_SCHEMA = "rcm-wire-1";

export type Mode = "cartesian" | "spherical";

export interface HelloMsg {
  type: "hello";
  seq: number;
  schema: string;
  role: "commander" | "observer";
  dt: number;
  snapshot_hz: number;
  test_mode: boolean;
  limits: { max_tip_speed: number; max_angular_rate: number };
  workspace: { min: [number, number, number]; max: [number, number, number] };
  trocar: [number, number, number];
}

export interface StateMsg {
  type: "state";
  seq: number;
  tick: number;
  time: number;
  flange_p: [number, number, number];
  flange_q: [number, number, number, number];
  tip: [number, number, number];
  rcm: [number, number, number];
  mode: Mode;
  clutch: boolean;
  recording: boolean;
  deviation_mm: number;
  twist_v: [number, number, number];
  twist_w: [number, number, number];
  commanded: [number, number, number, number];
}

export interface VerdictMsg {
  type: "verdict";
  seq: number;
  in_reply_to: number;
  accepted: boolean;
  reason: string;
  rows?: number;
  path?: string;
}

export interface ErrorMsg {
  type: "error";
  seq: number;
  in_reply_to?: number | null;
  code: string;
  message: string;
}

export type ServerMsg = HelloMsg | StateMsg | VerdictMsg | ErrorMsg;

export type CartesianCommand = {
  type: "command_cartesian";
  v: [number, number, number];
  roll: number;
};

export type SphericalCommand = {
  type: "command_spherical";
  pitch: number;
  yaw: number;
  roll: number;
  trans: number;
};

export type RateCommand = CartesianCommand | SphericalCommand;

export type ClientMsg =
  | { type: "hello"; role: "commander" | "observer"; schema: string }
  | { type: "configure"; mode?: Mode; camera_frame?: boolean }
  | RateCommand
  | { type: "clutch"; engaged: boolean }
  | { type: "start_recording"; path: string }
  | { type: "stop_recording" }
  | { type: "step"; ticks: number };

export function isZeroCommand(cmd: RateCommand): boolean {
  if (cmd.type === "command_cartesian") {
    return cmd.v[0] === 0 && cmd.v[1] === 0 && cmd.v[2] === 0 && cmd.roll === 0;
  }
  return cmd.pitch === 0 && cmd.yaw === 0 && cmd.roll === 0 && cmd.trans === 0;
}

export function zeroCommand(mode: Mode): RateCommand {
  return mode === "cartesian"
    ? { type: "command_cartesian", v: [0, 0, 0], roll: 0 }
    : { type: "command_spherical", pitch: 0, yaw: 0, roll: 0, trans: 0 };
}
