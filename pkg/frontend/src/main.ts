// Browser entry point: wires the WebSocket client, keyboard/gamepad input,
// the 3-D viewport, and the deviation sparkline together.

import { TeleopClient } from "./client.js";
import { DEFAULT_GAINS, emptyInput, inputToCommand, type InputSnapshot } from "./input.js";
import type { Mode } from "./protocol.js";
import { DEFAULT_CAMERA, Sparkline, renderScene, type Camera } from "./scene.js";
import {
  activeMode,
  commandsEnabled,
  formatDeviation,
  initialState,
  modeSwitchAllowed,
  onConnecting,
  onDisconnected,
  onServerMsg,
  setCameraFrame,
  setClutch,
} from "./state.js";

const viewport = document.getElementById("viewport") as HTMLCanvasElement;
const sparkCanvas = document.getElementById("sparkline") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const devEl = document.getElementById("deviation")!;
const connectBtn = document.getElementById("connect") as HTMLButtonElement;
const urlInput = document.getElementById("url") as HTMLInputElement;
const recordBtn = document.getElementById("record") as HTMLButtonElement;
const modeBtn = document.getElementById("mode") as HTMLButtonElement;
const cameraBtn = document.getElementById("camera-frame") as HTMLButtonElement;
const gainInput = document.getElementById("gain") as HTMLInputElement;

let ui = initialState();
const input: InputSnapshot = emptyInput();
const spark = new Sparkline(600);
const camera: Camera = { ...DEFAULT_CAMERA };
let gains = { ...DEFAULT_GAINS };
let recordCounter = 0;

const client = new TeleopClient((url) => new WebSocket(url) as unknown as import("./client.js").WebSocketLike, {
  onHello(msg) {
    ui = onServerMsg(ui, msg);
    refreshControls();
  },
  onState(msg) {
    ui = onServerMsg(ui, msg);
    if (ui.connection === "connected") spark.push(msg.deviation_mm);
  },
  onVerdict(msg) {
    ui = onServerMsg(ui, msg);
  },
  onError(msg) {
    ui = onServerMsg(ui, msg);
    statusEl.textContent = ui.lastError ?? "";
  },
  onClose() {
    ui = onDisconnected(ui);
    refreshControls();
  },
});

connectBtn.addEventListener("click", async () => {
  if (client.connected) {
    client.close();
    return;
  }
  ui = onConnecting(ui);
  refreshControls();
  try {
    await client.connect(urlInput.value);
  } catch (e) {
    ui = onDisconnected(ui);
    statusEl.textContent = String(e);
  }
  refreshControls();
});

recordBtn.addEventListener("click", () => {
  if (!client.connected) return;
  if (ui.snapshot?.recording) {
    client.stopRecording();
  } else {
    recordCounter += 1;
    client.startRecording(`teleop-episode-${recordCounter}.csv`);
  }
});

modeBtn.addEventListener("click", () => {
  if (!modeSwitchAllowed(ui)) {
    statusEl.textContent = "mode switch needs zero commanded motion";
    return;
  }
  const next: Mode = activeMode(ui) === "cartesian" ? "spherical" : "cartesian";
  client.configure({ mode: next });
});

cameraBtn.addEventListener("click", () => {
  ui = setCameraFrame(ui, !ui.cameraFrame);
  client.configure({ camera_frame: ui.cameraFrame });
  refreshControls();
});

gainInput.addEventListener("change", () => {
  const v = Number(gainInput.value);
  if (Number.isFinite(v) && v > 0) gains = { ...gains, linear: v / 1000 };
});

// clutch: hold Space (dead-man pedal semantics)
window.addEventListener("keydown", (ev) => {
  if (ev.code === "Space") {
    ev.preventDefault();
    if (!ui.clutchEngaged && client.connected) {
      ui = setClutch(ui, true);
      client.setClutch(true);
    }
    return;
  }
  input.keys.add(ev.code);
});

window.addEventListener("keyup", (ev) => {
  if (ev.code === "Space") {
    ev.preventDefault();
    if (ui.clutchEngaged) {
      ui = setClutch(ui, false);
      client.setClutch(false); // sends the immediate zero command
    }
    return;
  }
  input.keys.delete(ev.code);
});

// viewport orbit with mouse drag
let dragging = false;
let lastX = 0;
let lastY = 0;
viewport.addEventListener("mousedown", (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
});
window.addEventListener("mouseup", () => (dragging = false));
window.addEventListener("mousemove", (ev) => {
  if (!dragging) return;
  camera.yaw += (ev.clientX - lastX) * 0.01;
  camera.pitch = Math.max(-1.4, Math.min(1.4, camera.pitch + (ev.clientY - lastY) * 0.01));
  lastX = ev.clientX;
  lastY = ev.clientY;
});
viewport.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  camera.scale = Math.max(200, Math.min(6000, camera.scale * (ev.deltaY < 0 ? 1.1 : 0.9)));
});

function pollGamepad(): void {
  const pads = navigator.getGamepads?.() ?? [];
  const pad = pads.find((p) => p && p.connected);
  if (!pad) return;
  input.axes = pad.axes.slice(0, 4) as number[];
  input.buttons = pad.buttons.map((b) => b.pressed);
}

function refreshControls(): void {
  connectBtn.textContent = client.connected ? "disconnect" : "connect";
  const disabled = !client.connected;
  recordBtn.disabled = disabled;
  modeBtn.disabled = disabled;
  cameraBtn.disabled = disabled;
  cameraBtn.textContent = `camera frame: ${ui.cameraFrame ? "on" : "off"}`;
}

function frame(nowMs: number): void {
  pollGamepad();
  if (commandsEnabled(ui) && client.hello) {
    const cmd = inputToCommand(input, activeMode(ui), gains, client.hello.limits, ui.clutchEngaged);
    client.pumpCommand(cmd, nowMs);
  }
  renderScene(viewport.getContext("2d")!, camera, viewport.width, viewport.height, {
    snapshot: ui.snapshot,
    workspace: client.hello?.workspace ?? null,
    connected: ui.connection === "connected",
    clutchEngaged: ui.clutchEngaged,
    cameraFrame: ui.cameraFrame,
  });
  spark.draw(sparkCanvas.getContext("2d")!, sparkCanvas.width, sparkCanvas.height, ui.connection === "connected");
  devEl.textContent = `${formatDeviation(ui)} mm`;
  requestAnimationFrame(frame);
}

refreshControls();
requestAnimationFrame(frame);
