"""Networked control server: NDJSON over TCP plus the same JSON payloads
over a WebSocket endpoint for the browser UI.

One authoritative commander drives the control loop; any number of
observers receive state snapshots. Every inbound command passes the safety
gate before it can influence the loop, and a rejected command provably
never reaches the solver. Exactly one task owns the simulator state;
connection handlers exchange messages with it through per-connection
queues, and a slow consumer only ever loses snapshots (latest wins), never
stalls the loop.

In live mode the loop paces itself to the wall clock and zeroes commands
older than the staleness budget. In test mode time is simulated: the
commander advances the loop explicitly with `step` messages, which makes
scripted sessions replay byte-identically.
"""
from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass

from .config import AppConfig
from .episode import write_csv
from .errors import ModeSwitchWhileMoving, RcmError
from .geometry import Vec3, cross
from .metrics import shaft_deviation_mm
from .simulator import ControlLoop
from .solver import InstrumentState, remap_camera_command

SCHEMA = "rcm-wire-1"

REASON_OK = "ok"
REASON_LIMIT = "limit-exceeded"
REASON_WORKSPACE = "workspace"
REASON_SHALLOW = "shallow-insertion"
REASON_STALE = "stale-command"


@dataclass(frozen=True)
class SafetyVerdict:
    accepted: bool
    reason: str


@dataclass(frozen=True)
class ActionCommand:
    """Parsed rate command, either mode, as seen by the safety gate."""

    mode: str
    values: tuple[float, float, float, float]


def _predicted_tip_velocity(cmd: ActionCommand, state: InstrumentState) -> Vec3:
    """Commanded tip velocity from the command kinematics alone (the solver
    is never consulted for rejected candidates)."""
    if cmd.mode == "cartesian":
        return Vec3(cmd.values[0], cmd.values[1], cmd.values[2])
    pitch, yaw, roll, trans = cmd.values
    r_ee_hat = state.r_ee.normalized()
    omega = Vec3(pitch, yaw, 0.0) + r_ee_hat * roll
    return r_ee_hat * trans + cross(omega, state.r_shaft)


def validate_action(
    cmd: ActionCommand,
    state: InstrumentState,
    cfg: AppConfig,
    age_s: float = 0.0,
) -> SafetyVerdict:
    """Safety gate: rate limits, one-step workspace and insertion
    prediction, and command staleness."""
    rcm = cfg.rcm
    if cmd.mode == "cartesian":
        v = Vec3(cmd.values[0], cmd.values[1], cmd.values[2])
        if v.norm() > rcm.max_tip_speed or abs(cmd.values[3]) > rcm.max_angular_rate:
            return SafetyVerdict(False, REASON_LIMIT)
    else:
        pitch, yaw, roll, trans = cmd.values
        if max(abs(pitch), abs(yaw), abs(roll)) > rcm.max_angular_rate or abs(trans) > rcm.max_tip_speed:
            return SafetyVerdict(False, REASON_LIMIT)

    dt = cfg.sim.dt
    tip_next = state.p_tip + _predicted_tip_velocity(cmd, state) * dt
    lo, hi = cfg.server.workspace_min, cfg.server.workspace_max
    if not (lo.x <= tip_next.x <= hi.x and lo.y <= tip_next.y <= hi.y and lo.z <= tip_next.z <= hi.z):
        return SafetyVerdict(False, REASON_WORKSPACE)

    insertion_next = (tip_next - rcm.p_rcm).norm()
    if insertion_next < rcm.min_insertion:
        return SafetyVerdict(False, REASON_SHALLOW)
    if insertion_next > rcm.max_insertion:
        return SafetyVerdict(False, REASON_WORKSPACE)

    if age_s > cfg.server.staleness_budget_s:
        return SafetyVerdict(False, REASON_STALE)
    return SafetyVerdict(True, REASON_OK)


class _Connection:
    """Transport-agnostic client connection.

    All outbound traffic flows through one writer task: control replies are
    queued in order and never dropped, state snapshots occupy a latest-wins
    slot so a slow consumer sheds snapshots instead of stalling anything.
    """

    def __init__(self, send_text):
        self._send_text = send_text
        self.role = "observer"
        self.greeted = False
        self.last_seq = 0
        self.out_seq = 0
        self._control: list[dict] = []
        self._snapshot: dict | None = None
        self._wakeup = asyncio.Event()

    def push(self, msg: dict) -> None:
        self._control.append(msg)
        self._wakeup.set()

    def offer_snapshot(self, msg: dict) -> None:
        self._snapshot = msg
        self._wakeup.set()

    async def run_writer(self) -> None:
        while True:
            await self._wakeup.wait()
            self._wakeup.clear()
            while self._control or self._snapshot is not None:
                if self._control:
                    msg = self._control.pop(0)
                else:
                    msg, self._snapshot = self._snapshot, None
                self.out_seq += 1
                msg["seq"] = self.out_seq
                await self._send_text(json.dumps(msg))


class ControlServer:
    def __init__(self, cfg: AppConfig):
        self.cfg = cfg
        self.loop = ControlLoop(cfg.sim, cfg.limits, cfg.start_flange, config_hash=cfg.config_hash)
        self.tick_index = 0
        self.connections: set[_Connection] = set()
        self.commander: _Connection | None = None
        self.camera_frame = False
        self.recording_path: str | None = None
        self._last_command_at = 0.0
        self._tcp_server = None
        self._ws_server = None

    # -- state snapshots -----------------------------------------------------

    def snapshot(self) -> dict:
        s = self.loop.state
        q = s.flange.orientation
        dev = shaft_deviation_mm(s.flange.position, q, self.cfg.calib, self.cfg.rcm.p_rcm)
        return {
            "type": "state",
            "tick": self.tick_index,
            "time": s.time,
            "flange_p": list(s.flange.position.to_tuple()),
            "flange_q": list(q.to_tuple()),
            "tip": list(s.instrument.p_tip.to_tuple()),
            "rcm": list(self.cfg.rcm.p_rcm.to_tuple()),
            "mode": self.loop.mode,
            "clutch": self.loop.clutch_engaged,
            "recording": self.loop.record is not None,
            "deviation_mm": dev,
            "twist_v": list(s.last_twist.linear.to_tuple()),
            "twist_w": list(s.last_twist.angular.to_tuple()),
            "commanded": list(self.loop.commanded_rates),
        }

    def _broadcast(self, exclude: _Connection | None = None) -> None:
        snap = self.snapshot()
        for conn in self.connections:
            if conn is exclude or not conn.greeted:
                continue
            conn.offer_snapshot(dict(snap))

    # -- control loop --------------------------------------------------------

    def _tick(self) -> None:
        self.loop.tick()
        self.tick_index += 1

    async def _run_live(self) -> None:
        dt = self.cfg.sim.dt
        snap_every = max(1, round(1.0 / (self.cfg.server.snapshot_hz * dt)))
        next_t = time.monotonic()
        while True:
            next_t += dt
            if (
                self.loop.commanded_rates != (0.0, 0.0, 0.0, 0.0)
                and time.monotonic() - self._last_command_at > self.cfg.server.staleness_budget_s
            ):
                self.loop.set_rates((0.0, 0.0, 0.0, 0.0))  # stalled client: hold
            self._tick()
            if self.tick_index % snap_every == 0:
                self._broadcast()
            delay = next_t - time.monotonic()
            if delay > 0:
                await asyncio.sleep(delay)

    # -- message handling ------------------------------------------------------

    def _reply_verdict(self, conn: _Connection, msg: dict, verdict: SafetyVerdict) -> None:
        conn.push(
            {
                "type": "verdict",
                "in_reply_to": msg.get("seq"),
                "accepted": verdict.accepted,
                "reason": verdict.reason,
            }
        )

    def _reply_error(self, conn: _Connection, msg: dict, code: str, message: str) -> None:
        conn.push(
            {"type": "error", "in_reply_to": msg.get("seq"), "code": code, "message": message}
        )

    async def handle_message(self, conn: _Connection, text: str) -> None:
        try:
            msg = json.loads(text)
            if not isinstance(msg, dict):
                raise ValueError("message must be a JSON object")
        except ValueError as e:
            self._reply_error(conn, {}, "bad-message", f"unparseable message: {e}")
            return

        seq = msg.get("seq")
        if not isinstance(seq, int) or seq <= conn.last_seq:
            self._reply_error(conn, msg, "bad-seq", "seq must be a strictly increasing integer")
            return
        conn.last_seq = seq

        mtype = msg.get("type")
        if mtype == "hello":
            await self._handle_hello(conn, msg)
            return
        if not conn.greeted:
            self._reply_error(conn, msg, "bad-message", "say hello first")
            return

        if mtype in ("command_cartesian", "command_spherical"):
            await self._handle_command(conn, msg)
        elif mtype == "configure":
            await self._handle_configure(conn, msg)
        elif mtype == "clutch":
            await self._handle_clutch(conn, msg)
        elif mtype == "start_recording":
            await self._handle_start_recording(conn, msg)
        elif mtype == "stop_recording":
            await self._handle_stop_recording(conn, msg)
        elif mtype == "step":
            await self._handle_step(conn, msg)
        else:
            self._reply_error(conn, msg, "bad-message", f"unknown message type {mtype!r}")

    async def _handle_hello(self, conn: _Connection, msg: dict) -> None:
        if msg.get("schema") != SCHEMA:
            self._reply_error(conn, msg, "schema", f"server speaks {SCHEMA}")
            return
        role = msg.get("role", "observer")
        if role == "commander":
            if self.commander is not None:
                self._reply_error(conn, msg, "busy", "another commander is connected")
                return
            self.commander = conn
        conn.role = role
        conn.greeted = True
        cfg = self.cfg
        conn.push(
            {
                "type": "hello",
                "schema": SCHEMA,
                "role": role,
                "dt": cfg.sim.dt,
                "snapshot_hz": cfg.server.snapshot_hz,
                "test_mode": cfg.server.test_mode,
                "limits": {
                    "max_tip_speed": cfg.rcm.max_tip_speed,
                    "max_angular_rate": cfg.rcm.max_angular_rate,
                },
                "workspace": {
                    "min": list(cfg.server.workspace_min.to_tuple()),
                    "max": list(cfg.server.workspace_max.to_tuple()),
                },
                "trocar": list(cfg.rcm.p_rcm.to_tuple()),
            }
        )
        conn.push(self.snapshot())

    def _require_commander(self, conn: _Connection) -> bool:
        return conn is self.commander

    async def _handle_command(self, conn: _Connection, msg: dict) -> None:
        if not self._require_commander(conn):
            self._reply_error(conn, msg, "not-commander", "only the commander may send commands")
            return
        try:
            if msg["type"] == "command_cartesian":
                v = Vec3(float(msg["v"][0]), float(msg["v"][1]), float(msg["v"][2]))
                if self.camera_frame:
                    v = remap_camera_command(v, self.cfg.server.camera_pose)
                cmd = ActionCommand("cartesian", (v.x, v.y, v.z, float(msg.get("roll", 0.0))))
            else:
                cmd = ActionCommand(
                    "spherical",
                    (
                        float(msg.get("pitch", 0.0)),
                        float(msg.get("yaw", 0.0)),
                        float(msg.get("roll", 0.0)),
                        float(msg.get("trans", 0.0)),
                    ),
                )
        except (KeyError, TypeError, ValueError, IndexError) as e:
            self._reply_error(conn, msg, "bad-message", f"malformed command: {e}")
            return
        if cmd.mode != self.loop.mode:
            self._reply_error(
                conn, msg, "wrong-mode", f"loop is in {self.loop.mode} mode; configure first"
            )
            return
        verdict = validate_action(cmd, self.loop.state.instrument, self.cfg)
        if verdict.accepted:
            self.loop.set_rates(cmd.values)
            self._last_command_at = time.monotonic()
        self._reply_verdict(conn, msg, verdict)

    async def _handle_configure(self, conn: _Connection, msg: dict) -> None:
        if not self._require_commander(conn):
            self._reply_error(conn, msg, "not-commander", "only the commander may configure")
            return
        if "camera_frame" in msg:
            self.camera_frame = bool(msg["camera_frame"])
        if "mode" in msg:
            try:
                self.loop.set_mode(str(msg["mode"]))
            except (ModeSwitchWhileMoving, RcmError) as e:
                self._reply_error(conn, msg, "mode-switch-while-moving", str(e))
                return
        self._reply_verdict(conn, msg, SafetyVerdict(True, REASON_OK))

    async def _handle_clutch(self, conn: _Connection, msg: dict) -> None:
        if not self._require_commander(conn):
            self._reply_error(conn, msg, "not-commander", "only the commander may clutch")
            return
        self.loop.set_clutch(bool(msg.get("engaged", False)))
        self._reply_verdict(conn, msg, SafetyVerdict(True, REASON_OK))

    async def _handle_start_recording(self, conn: _Connection, msg: dict) -> None:
        if not self._require_commander(conn):
            self._reply_error(conn, msg, "not-commander", "only the commander may record")
            return
        path = msg.get("path")
        if not isinstance(path, str) or not path:
            self._reply_error(conn, msg, "bad-message", "start_recording needs a path")
            return
        self.recording_path = path
        self.loop.start_recording()
        self._reply_verdict(conn, msg, SafetyVerdict(True, REASON_OK))

    async def _handle_stop_recording(self, conn: _Connection, msg: dict) -> None:
        if not self._require_commander(conn):
            self._reply_error(conn, msg, "not-commander", "only the commander may record")
            return
        record = self.loop.stop_recording()
        if record is None or not record.rows:
            self._reply_error(conn, msg, "bad-message", "no recording in progress")
            return
        try:
            write_csv(record, self.recording_path)
        except OSError as e:
            self._reply_error(conn, msg, "io", str(e))
            return
        conn.push(
            {
                "type": "verdict",
                "in_reply_to": msg.get("seq"),
                "accepted": True,
                "reason": REASON_OK,
                "rows": len(record.rows),
                "path": self.recording_path,
            }
        )

    async def _handle_step(self, conn: _Connection, msg: dict) -> None:
        if not self.cfg.server.test_mode:
            self._reply_error(conn, msg, "bad-message", "step is only valid in test mode")
            return
        if not self._require_commander(conn):
            self._reply_error(conn, msg, "not-commander", "only the commander may step")
            return
        ticks = msg.get("ticks", 1)
        if not isinstance(ticks, int) or ticks < 1 or ticks > 1_000_000:
            self._reply_error(conn, msg, "bad-message", "ticks must be a positive integer")
            return
        try:
            for _ in range(ticks):
                self._tick()
        except RcmError as e:
            self._reply_error(conn, msg, "runtime", str(e))
            return
        conn.push(self.snapshot())  # ordered queue: the commander sees every step result
        self._broadcast(exclude=conn)

    # -- connection lifecycle ---------------------------------------------------

    async def _on_disconnect(self, conn: _Connection) -> None:
        self.connections.discard(conn)
        if conn is self.commander:
            self.commander = None
            self.loop.set_rates((0.0, 0.0, 0.0, 0.0))  # zero-command hold

    async def _serve_connection(self, conn: _Connection, reader_iter) -> None:
        self.connections.add(conn)
        writer_task = asyncio.create_task(conn.run_writer())
        try:
            async for text in reader_iter:
                await self.handle_message(conn, text)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            writer_task.cancel()
            await self._on_disconnect(conn)

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        async def send_text(text: str) -> None:
            writer.write(text.encode() + b"\n")
            await writer.drain()

        async def lines():
            while True:
                line = await reader.readline()
                if not line:
                    return
                stripped = line.decode().strip()
                if stripped:
                    yield stripped

        conn = _Connection(send_text)
        try:
            await self._serve_connection(conn, lines())
        finally:
            writer.close()

    async def _handle_ws(self, websocket) -> None:
        request = getattr(websocket, "request", None)
        if request is not None and getattr(request, "path", "/ws") not in ("/ws", "/"):
            await websocket.close(code=1008, reason="connect to /ws")
            return

        async def send_text(text: str) -> None:
            await websocket.send(text)

        async def texts():
            async for message in websocket:
                if isinstance(message, bytes):
                    message = message.decode()
                yield message

        conn = _Connection(send_text)
        await self._serve_connection(conn, texts())

    # -- entry ---------------------------------------------------------------------

    async def start(self) -> tuple[int, int]:
        from websockets.asyncio.server import serve as ws_serve

        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, host="127.0.0.1", port=self.cfg.server.tcp_port
        )
        self._ws_server = await ws_serve(
            self._handle_ws, host="127.0.0.1", port=self.cfg.server.ws_port
        )
        tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        ws_port = next(iter(self._ws_server.sockets)).getsockname()[1]
        return tcp_port, ws_port

    async def run(self) -> None:
        tcp_port, ws_port = await self.start()
        mode = "test" if self.cfg.server.test_mode else "live"
        print(f"READY tcp={tcp_port} ws={ws_port} mode={mode}", flush=True)
        if self.cfg.server.test_mode:
            await asyncio.Event().wait()  # ticks are driven by step messages
        else:
            await self._run_live()

    async def close(self) -> None:
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()


def serve_forever(cfg: AppConfig) -> None:
    try:
        asyncio.run(ControlServer(cfg).run())
    except KeyboardInterrupt:
        pass
