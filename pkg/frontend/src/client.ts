// WebSocket client for the control server: handshake, sequenced sends,
// latest-snapshot-wins state delivery, clutch semantics (release sends an
// immediate zero command), and a command pump rate-limited well below the
// server tick rate.
//
// The WebSocket constructor is injected so the same class runs in the
// browser (native WebSocket) and under Node tests (the `ws` package).

import type { ClientMsg, HelloMsg, Mode, RateCommand, ServerMsg, StateMsg } from "./protocol.js";
import { WIRE_SCHEMA, isZeroCommand, zeroCommand } from "./protocol.js";

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  // handler slots typed loosely so both the browser WebSocket and the
  // Node `ws` client satisfy the interface
  onopen: ((ev?: any) => any) | null;
  onmessage: ((ev: { data: any }) => any) | null;
  onclose: ((ev?: any) => any) | null;
  onerror: ((ev?: any) => any) | null;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface TeleopClientEvents {
  onHello?(msg: HelloMsg): void;
  onState?(msg: StateMsg): void;
  onVerdict?(msg: ServerMsg & { type: "verdict" }): void;
  onError?(msg: ServerMsg & { type: "error" }): void;
  onClose?(): void;
}

/** Minimum interval between rate commands; 20 Hz is far below the 500 Hz tick. */
export const COMMAND_PERIOD_MS = 50;

export class TeleopClient {
  private ws: WebSocketLike | null = null;
  private seq = 0;
  private lastCommandAt = -Infinity;
  private lastSent: RateCommand | null = null;
  clutchEngaged = false;
  hello: HelloMsg | null = null;
  latestState: StateMsg | null = null;

  constructor(
    private readonly makeSocket: WebSocketFactory,
    private readonly events: TeleopClientEvents = {},
  ) {}

  connect(url: string): Promise<HelloMsg> {
    return new Promise((resolve, reject) => {
      const ws = this.makeSocket(url);
      this.ws = ws;
      ws.onopen = () => {
        this.sendRaw({ type: "hello", role: "commander", schema: WIRE_SCHEMA });
      };
      ws.onerror = (e) => reject(new Error(`websocket error: ${String(e)}`));
      ws.onclose = () => {
        this.ws = null;
        this.hello = null;
        this.clutchEngaged = false;
        this.events.onClose?.();
      };
      ws.onmessage = (ev) => {
        const msg = JSON.parse(String(ev.data)) as ServerMsg;
        switch (msg.type) {
          case "hello":
            this.hello = msg;
            this.events.onHello?.(msg);
            resolve(msg);
            break;
          case "state":
            this.latestState = msg; // latest wins; rendering reads this
            this.events.onState?.(msg);
            break;
          case "verdict":
            this.events.onVerdict?.(msg);
            break;
          case "error":
            this.events.onError?.(msg);
            break;
        }
      };
    });
  }

  get connected(): boolean {
    return this.ws !== null && this.hello !== null;
  }

  close(): void {
    this.ws?.close();
  }

  private sendRaw(msg: ClientMsg): number {
    if (!this.ws) throw new Error("not connected");
    this.seq += 1;
    this.ws.send(JSON.stringify({ seq: this.seq, ...msg }));
    return this.seq;
  }

  setClutch(engaged: boolean): void {
    if (!this.ws) return;
    const was = this.clutchEngaged;
    this.clutchEngaged = engaged;
    this.sendRaw({ type: "clutch", engaged });
    if (was && !engaged) {
      // release must measurably stop the instrument right away
      const mode: Mode = this.latestState?.mode ?? "cartesian";
      this.sendRaw(zeroCommand(mode));
      this.lastSent = null;
    }
  }

  /**
   * Rate-limited command pump: forwards the command if the clutch is
   * engaged, enough time has passed, and the value changed (a repeated
   * identical command is redundant because the server holds the latest).
   */
  pumpCommand(cmd: RateCommand | null, nowMs: number): boolean {
    if (!this.ws || !this.clutchEngaged || cmd === null) return false;
    if (nowMs - this.lastCommandAt < COMMAND_PERIOD_MS) return false;
    if (this.lastSent !== null && JSON.stringify(this.lastSent) === JSON.stringify(cmd)) {
      return false;
    }
    // suppress repeated zeros, but always send the first zero after motion
    if (isZeroCommand(cmd) && this.lastSent !== null && isZeroCommand(this.lastSent)) {
      return false;
    }
    this.sendRaw(cmd);
    this.lastSent = cmd;
    this.lastCommandAt = nowMs;
    return true;
  }

  /** Direct send path for deterministic tests (no rate limiting). */
  sendCommandNow(cmd: RateCommand): number {
    return this.sendRaw(cmd);
  }

  configure(opts: { mode?: Mode; camera_frame?: boolean }): number {
    return this.sendRaw({ type: "configure", ...opts });
  }

  startRecording(path: string): number {
    return this.sendRaw({ type: "start_recording", path });
  }

  stopRecording(): number {
    return this.sendRaw({ type: "stop_recording" });
  }

  /** Test-mode only: advance simulated time on the server. */
  step(ticks: number): number {
    return this.sendRaw({ type: "step", ticks });
  }
}
