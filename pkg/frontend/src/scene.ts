// 3-D viewport rendering: trocar point, instrument shaft line, flange, tip,
// and the workspace box on a 2-D canvas via a fixed orbit projection, plus
// a scrolling deviation sparkline. Projection math is pure and exported for
// tests; drawing needs a CanvasRenderingContext2D.

import type { StateMsg } from "./protocol.js";

export interface Camera {
  yaw: number; // rad, about +z
  pitch: number; // rad, elevation
  scale: number; // px per meter
  center: [number, number, number]; // look-at point, base frame
}

export const DEFAULT_CAMERA: Camera = {
  yaw: Math.PI / 5,
  pitch: Math.PI / 7,
  scale: 1400,
  center: [0, 0, 0.1],
};

/** Orthographic orbit projection: base-frame point to canvas [px, py, depth]. */
export function project(cam: Camera, p: [number, number, number], w: number, h: number): [number, number, number] {
  const x = p[0] - cam.center[0];
  const y = p[1] - cam.center[1];
  const z = p[2] - cam.center[2];
  const cy = Math.cos(cam.yaw), sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch), sp = Math.sin(cam.pitch);
  // yaw about z, then pitch the view axis; screen x right, y up
  const rx = cy * x + sy * y;
  const ry = -sy * x + cy * y;
  const sx = rx;
  const sz = cp * z - sp * ry;
  const depth = cp * ry + sp * z;
  return [w / 2 + cam.scale * sx, h / 2 - cam.scale * sz, depth];
}

export interface SceneColors {
  background: string;
  box: string;
  shaft: string;
  trocar: string;
  tip: string;
  flange: string;
  text: string;
}

const LIVE: SceneColors = {
  background: "#10151c",
  box: "#2e4057",
  shaft: "#9ecbff",
  trocar: "#ff5566",
  tip: "#ffd166",
  flange: "#8affc1",
  text: "#d7e3f4",
};

const GREYED: SceneColors = {
  background: "#14161a",
  box: "#2a2d33",
  shaft: "#555a63",
  trocar: "#6a5257",
  tip: "#6a6657",
  flange: "#576a60",
  text: "#787f8a",
};

function boxEdges(min: [number, number, number], max: [number, number, number]): Array<[[number, number, number], [number, number, number]]> {
  const [x0, y0, z0] = min;
  const [x1, y1, z1] = max;
  const c: [number, number, number][] = [
    [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
    [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
  ];
  const e: Array<[number, number]> = [
    [0, 1], [1, 2], [2, 3], [3, 0],
    [4, 5], [5, 6], [6, 7], [7, 4],
    [0, 4], [1, 5], [2, 6], [3, 7],
  ];
  return e.map(([a, b]) => [c[a], c[b]]);
}

export interface SceneInputs {
  snapshot: StateMsg | null;
  workspace: { min: [number, number, number]; max: [number, number, number] } | null;
  connected: boolean;
  clutchEngaged: boolean;
  cameraFrame: boolean;
}

export function renderScene(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  w: number,
  h: number,
  s: SceneInputs,
): void {
  const colors = s.connected ? LIVE : GREYED;
  ctx.fillStyle = colors.background;
  ctx.fillRect(0, 0, w, h);

  const line = (a: [number, number, number], b: [number, number, number], color: string, width = 1) => {
    const pa = project(cam, a, w, h);
    const pb = project(cam, b, w, h);
    ctx.strokeStyle = color;
    ctx.lineWidth = width;
    ctx.beginPath();
    ctx.moveTo(pa[0], pa[1]);
    ctx.lineTo(pb[0], pb[1]);
    ctx.stroke();
  };
  const dot = (p: [number, number, number], color: string, r: number) => {
    const pp = project(cam, p, w, h);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(pp[0], pp[1], r, 0, 2 * Math.PI);
    ctx.fill();
  };

  if (s.workspace) {
    for (const [a, b] of boxEdges(s.workspace.min, s.workspace.max)) {
      line(a, b, colors.box);
    }
  }

  const snap = s.snapshot;
  if (snap) {
    // infinite shaft line, drawn well past both the flange and the tip
    const f = snap.flange_p;
    const t = snap.tip;
    const d: [number, number, number] = [t[0] - f[0], t[1] - f[1], t[2] - f[2]];
    const n = Math.hypot(d[0], d[1], d[2]) || 1;
    const u: [number, number, number] = [d[0] / n, d[1] / n, d[2] / n];
    const ext = 0.08;
    const a: [number, number, number] = [f[0] - u[0] * ext, f[1] - u[1] * ext, f[2] - u[2] * ext];
    const b: [number, number, number] = [t[0] + u[0] * ext, t[1] + u[1] * ext, t[2] + u[2] * ext];
    line(a, b, colors.shaft, 2);
    line(f, t, colors.shaft, 3);

    dot(snap.rcm, colors.trocar, 5);
    dot(t, colors.tip, 4);

    // flange as a small square marker
    const pf = project(cam, f, w, h);
    ctx.strokeStyle = colors.flange;
    ctx.lineWidth = 2;
    ctx.strokeRect(pf[0] - 5, pf[1] - 5, 10, 10);
  }

  ctx.fillStyle = colors.text;
  ctx.font = "12px monospace";
  const devText = snap ? snap.deviation_mm.toFixed(3) : "--.---";
  const lines = [
    `deviation ${devText} mm`,
    `mode ${snap?.mode ?? "-"}  clutch ${s.clutchEngaged ? "ENGAGED" : "open"}`,
    `recording ${snap?.recording ? "ON" : "off"}  camera-frame ${s.cameraFrame ? "ON" : "off"}`,
    s.connected ? "" : "DISCONNECTED",
  ];
  lines.forEach((text, i) => text && ctx.fillText(text, 10, 18 + 16 * i));
}

/** Fixed-capacity scrolling series for the deviation sparkline. */
export class Sparkline {
  private values: number[] = [];
  constructor(readonly capacity = 600) {}

  push(v: number): void {
    this.values.push(v);
    if (this.values.length > this.capacity) this.values.shift();
  }

  get data(): readonly number[] {
    return this.values;
  }

  get max(): number {
    return this.values.reduce((a, b) => Math.max(a, b), 0);
  }

  clear(): void {
    this.values = [];
  }

  draw(ctx: CanvasRenderingContext2D, w: number, h: number, connected: boolean): void {
    ctx.fillStyle = connected ? "#0d1117" : "#14161a";
    ctx.fillRect(0, 0, w, h);
    const peak = Math.max(this.max, 1e-6);
    ctx.strokeStyle = connected ? "#58a6ff" : "#555a63";
    ctx.lineWidth = 1;
    ctx.beginPath();
    this.values.forEach((v, i) => {
      const x = (i / Math.max(1, this.capacity - 1)) * w;
      const y = h - 2 - (v / peak) * (h - 6);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.fillStyle = connected ? "#8b949e" : "#787f8a";
    ctx.font = "10px monospace";
    ctx.fillText(`peak ${peak.toFixed(3)} mm`, 6, 12);
  }
}
