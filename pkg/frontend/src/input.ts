// Keyboard / gamepad to rate-command mapping. Pure: a device snapshot plus
// mode, gains, and server limits map to one wire command (or null when the
// clutch is open), with speeds clamped to the server-announced limits.

import type { Mode, RateCommand } from "./protocol.js";

export interface InputSnapshot {
  /** KeyboardEvent.code values currently held down. */
  keys: Set<string>;
  /** Gamepad axes in [-1, 1]: [0] left X, [1] left Y, [2] right X, [3] right Y. */
  axes: number[];
  /** Gamepad buttons: [4]=LB retract, [5]=RB insert. */
  buttons: boolean[];
}

export interface Gains {
  linear: number; // m/s at full deflection
  angular: number; // rad/s at full deflection
}

export const DEFAULT_GAINS: Gains = { linear: 0.02, angular: 0.4 };

export interface Limits {
  max_tip_speed: number;
  max_angular_rate: number;
}

const DEADZONE = 0.15;

export function emptyInput(): InputSnapshot {
  return { keys: new Set(), axes: [0, 0, 0, 0], buttons: [] };
}

function deadzone(x: number): number {
  return Math.abs(x) < DEADZONE ? 0 : x;
}

function key(input: InputSnapshot, code: string): number {
  return input.keys.has(code) ? 1 : 0;
}

/** Planar + depth + roll axes in [-1, 1] from whichever device is active. */
export function readAxes(input: InputSnapshot): { x: number; y: number; z: number; roll: number } {
  // keyboard: A/D -> x, W/S -> y, R/F -> insert/retract, Q/E -> roll
  let x = key(input, "KeyD") - key(input, "KeyA");
  let y = key(input, "KeyW") - key(input, "KeyS");
  let z = key(input, "KeyF") - key(input, "KeyR"); // insert is -z in the base frame
  let roll = key(input, "KeyE") - key(input, "KeyQ");
  if (x === 0 && y === 0 && z === 0 && roll === 0) {
    x = deadzone(input.axes[0] ?? 0);
    y = -deadzone(input.axes[1] ?? 0); // stick up = forward
    z = (input.buttons[4] ? 1 : 0) - (input.buttons[5] ? 1 : 0);
    roll = deadzone(input.axes[2] ?? 0);
  }
  return { x, y, z, roll };
}

function clampAbs(v: number, limit: number): number {
  return Math.max(-limit, Math.min(limit, v));
}

/**
 * Map a device snapshot to a rate command for the active mode.
 * Returns null when the clutch is open: no commands flow.
 */
export function inputToCommand(
  input: InputSnapshot,
  mode: Mode,
  gains: Gains,
  limits: Limits,
  clutchEngaged: boolean,
): RateCommand | null {
  if (!clutchEngaged) return null;
  const a = readAxes(input);
  if (mode === "cartesian") {
    let vx = a.x * gains.linear;
    let vy = a.y * gains.linear;
    let vz = a.z * gains.linear;
    // diagonal inputs must not exceed the tip-speed limit in norm
    const speed = Math.hypot(vx, vy, vz);
    const cap = Math.min(gains.linear, limits.max_tip_speed);
    if (speed > cap && speed > 0) {
      const k = cap / speed;
      vx *= k;
      vy *= k;
      vz *= k;
    }
    return {
      type: "command_cartesian",
      v: [vx, vy, vz],
      roll: clampAbs(a.roll * gains.angular, limits.max_angular_rate),
    };
  }
  // spherical: W/S pitch, A/D yaw, Q/E roll, R/F translate along the shaft
  return {
    type: "command_spherical",
    pitch: clampAbs(a.y * gains.angular, limits.max_angular_rate),
    yaw: clampAbs(a.x * gains.angular, limits.max_angular_rate),
    roll: clampAbs(a.roll * gains.angular, limits.max_angular_rate),
    trans: clampAbs(-a.z * gains.linear, limits.max_tip_speed), // R key = insert = +trans
  };
}
