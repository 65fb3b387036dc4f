// UI session state: a pure reducer over server messages plus local input
// facts (clutch, pending toggles). Every rendered quantity is either taken
// verbatim from a server snapshot or is a pure function of one; the UI
// never fabricates robot state.

import type { HelloMsg, Mode, ServerMsg, StateMsg } from "./protocol.js";

export type ConnectionStatus = "disconnected" | "connecting" | "connected";

export interface UiSessionState {
  connection: ConnectionStatus;
  hello: HelloMsg | null;
  snapshot: StateMsg | null;
  clutchEngaged: boolean;
  cameraFrame: boolean;
  lastError: string | null;
  lastVerdictReason: string | null;
}

export function initialState(): UiSessionState {
  return {
    connection: "disconnected",
    hello: null,
    snapshot: null,
    clutchEngaged: false,
    cameraFrame: false,
    lastError: null,
    lastVerdictReason: null,
  };
}

export function onConnecting(s: UiSessionState): UiSessionState {
  return { ...initialState(), connection: "connecting" };
}

export function onDisconnected(s: UiSessionState): UiSessionState {
  // keep the last snapshot for the greyed-out viewport, but drop authority
  return { ...s, connection: "disconnected", clutchEngaged: false };
}

export function onServerMsg(s: UiSessionState, msg: ServerMsg): UiSessionState {
  switch (msg.type) {
    case "hello":
      return { ...s, connection: "connected", hello: msg, lastError: null };
    case "state":
      return { ...s, snapshot: msg };
    case "verdict":
      return { ...s, lastVerdictReason: msg.reason };
    case "error":
      return { ...s, lastError: `${msg.code}: ${msg.message}` };
  }
}

export function setClutch(s: UiSessionState, engaged: boolean): UiSessionState {
  return { ...s, clutchEngaged: engaged };
}

export function setCameraFrame(s: UiSessionState, on: boolean): UiSessionState {
  return { ...s, cameraFrame: on };
}

export const activeMode = (s: UiSessionState): Mode => s.snapshot?.mode ?? "cartesian";

export const isRecording = (s: UiSessionState): boolean => s.snapshot?.recording ?? false;

/** Live deviation readout in mm, straight from the latest snapshot. */
export function deviationMm(s: UiSessionState): number | null {
  return s.snapshot ? s.snapshot.deviation_mm : null;
}

export function formatDeviation(s: UiSessionState): string {
  const d = deviationMm(s);
  return d === null ? "--.---" : d.toFixed(3);
}

/** Commands may be emitted only while connected with the clutch engaged. */
export function commandsEnabled(s: UiSessionState): boolean {
  return s.connection === "connected" && s.clutchEngaged;
}

/** Mode switches are only legal while commanded motion is zero. */
export function modeSwitchAllowed(s: UiSessionState): boolean {
  if (s.connection !== "connected" || s.snapshot === null) return false;
  return s.snapshot.commanded.every((r) => r === 0);
}
