"""YAML configuration and command-script loading.

One config file carries the pivot geometry, shaft calibration, profiler
limits, simulator settings, and server settings; see configs/default.yaml
for the documented schema. The config hash ties recorded episodes to the
exact kinematic setup they were produced with.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError, ScriptError
from .geometry import Pose, Rotation, Vec3
from .profiler import ProfilerLimits
from .simulator import CommandScript, Perturbation, ScriptEntry, SimConfig
from .solver import RcmConfig, ShaftCalibration


@dataclass(frozen=True)
class ServerConfig:
    tcp_port: int = 5555
    ws_port: int = 8765
    snapshot_hz: float = 60.0
    staleness_budget_s: float = 0.1
    workspace_min: Vec3 = Vec3(-0.15, -0.15, -0.2)
    workspace_max: Vec3 = Vec3(0.15, 0.15, 0.08)
    camera_pose: Pose = field(default_factory=Pose.identity)
    test_mode: bool = False


@dataclass(frozen=True)
class AppConfig:
    rcm: RcmConfig
    calib: ShaftCalibration
    limits: ProfilerLimits
    sim: SimConfig
    start_flange: Pose
    server: ServerConfig
    config_hash: str


def _vec(raw, name: str) -> Vec3:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ConfigError(f"{name} must be a list of 3 numbers")
    return Vec3(float(raw[0]), float(raw[1]), float(raw[2]))


def _quat(raw, name: str) -> Rotation:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise ConfigError(f"{name} must be a list of 4 numbers (w, x, y, z)")
    return Rotation(*(float(v) for v in raw)).normalized()


def _snapshot_hash(rcm: RcmConfig, calib: ShaftCalibration, limits: ProfilerLimits, dt: float) -> str:
    snapshot = {
        "rcm": {
            "trocar": rcm.p_rcm.to_tuple(),
            "min_insertion": rcm.min_insertion,
            "max_insertion": rcm.max_insertion,
            "max_tip_speed": rcm.max_tip_speed,
            "max_angular_rate": rcm.max_angular_rate,
        },
        "calibration": {
            "tip_offset": calib.tip_offset_flange.to_tuple(),
            "shaft_dir": calib.shaft_dir_flange.to_tuple(),
        },
        "profiler": {
            "max_accel": limits.max_accel,
            "max_jerk": limits.max_jerk,
            "base_duration": limits.base_duration_d,
        },
        "dt": dt,
    }
    return hashlib.sha256(json.dumps(snapshot, sort_keys=True).encode()).hexdigest()


def parse_config(doc: dict) -> AppConfig:
    try:
        rcm_d = doc.get("rcm", {})
        rcm = RcmConfig(
            p_rcm=_vec(rcm_d.get("trocar", [0.0, 0.0, 0.1]), "rcm.trocar"),
            min_insertion=float(rcm_d.get("min_insertion", 0.02)),
            max_insertion=float(rcm_d.get("max_insertion", 0.30)),
            max_tip_speed=float(rcm_d.get("max_tip_speed", 0.05)),
            max_angular_rate=float(rcm_d.get("max_angular_rate", 1.5)),
        )
        cal_d = doc.get("calibration", {})
        calib = ShaftCalibration(
            tip_offset_flange=_vec(cal_d.get("tip_offset", [0.0, 0.0, -0.30]), "calibration.tip_offset"),
            shaft_dir_flange=_vec(cal_d.get("shaft_dir", [0.0, 0.0, -1.0]), "calibration.shaft_dir").normalized(),
        )
        prof_d = doc.get("profiler", {})
        limits = ProfilerLimits(
            max_accel=float(prof_d.get("max_accel", 0.5)),
            max_jerk=float(prof_d.get("max_jerk", 20.0)),
            base_duration_d=float(prof_d.get("base_duration", 0.5)),
        )
        sim_d = doc.get("simulator", {})
        pert = None
        if "perturbation" in sim_d and sim_d["perturbation"]:
            p_d = sim_d["perturbation"]
            amplitude = float(p_d.get("amplitude", 0.0))
            if amplitude > 0.0:
                pert = Perturbation(
                    amplitude=amplitude,
                    frequency=float(p_d.get("frequency", 1.0)),
                    axis=_vec(p_d.get("axis", [1.0, 0.0, 0.0]), "perturbation.axis"),
                )
        dt = float(sim_d.get("dt", 0.002))
        sim = SimConfig(rcm=rcm, calib=calib, dt=dt, perturbation=pert)
        start_flange = Pose(
            _vec(sim_d.get("start_position", [0.0, 0.0, 0.3]), "simulator.start_position"),
            _quat(sim_d.get("start_quaternion", [1.0, 0.0, 0.0, 0.0]), "simulator.start_quaternion"),
        )
        srv_d = doc.get("server", {})
        server = ServerConfig(
            tcp_port=int(srv_d.get("tcp_port", 5555)),
            ws_port=int(srv_d.get("ws_port", 8765)),
            snapshot_hz=float(srv_d.get("snapshot_hz", 60.0)),
            staleness_budget_s=float(srv_d.get("staleness_budget_s", 0.1)),
            workspace_min=_vec(srv_d.get("workspace_min", [-0.15, -0.15, -0.2]), "server.workspace_min"),
            workspace_max=_vec(srv_d.get("workspace_max", [0.15, 0.15, 0.08]), "server.workspace_max"),
            camera_pose=Pose(
                _vec(srv_d.get("camera_position", [0.0, 0.0, 0.0]), "server.camera_position"),
                _quat(srv_d.get("camera_quaternion", [1.0, 0.0, 0.0, 0.0]), "server.camera_quaternion"),
            ),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, AttributeError) as e:
        raise ConfigError(str(e)) from e
    return AppConfig(
        rcm=rcm,
        calib=calib,
        limits=limits,
        sim=sim,
        start_flange=start_flange,
        server=server,
        config_hash=_snapshot_hash(rcm, calib, limits, dt),
    )


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return parse_config(doc)


def default_config() -> AppConfig:
    return parse_config({})


def _entry_lines(path: Path) -> list[int]:
    """1-based source line of each commands[] item, for error messages."""
    try:
        root = yaml.compose(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError):
        return []
    if root is None or not hasattr(root, "value"):
        return []
    for key_node, value_node in getattr(root, "value", []):
        if getattr(key_node, "value", None) == "commands":
            return [item.start_mark.line + 1 for item in getattr(value_node, "value", [])]
    return []


def load_script(path: str | Path) -> CommandScript:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ScriptError(f"cannot read script {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ScriptError(f"cannot parse script {path}: {e}") from e
    if not isinstance(doc, dict) or "duration" not in doc:
        raise ScriptError(f"script {path} must be a mapping with a 'duration' key")
    lines = _entry_lines(path)
    raw_entries = doc.get("commands", []) or []
    entries = []
    prev_t = float("-inf")
    for i, raw in enumerate(raw_entries):
        where = f"line {lines[i]}" if i < len(lines) else f"commands[{i}]"
        if not isinstance(raw, dict):
            raise ScriptError(f"{path} {where}: entry must be a mapping")
        try:
            t = float(raw["t"])
            mode = str(raw["mode"])
            values = tuple(float(v) for v in raw["values"])
        except (KeyError, TypeError, ValueError) as e:
            raise ScriptError(f"{path} {where}: {e}") from e
        if len(values) != 4:
            raise ScriptError(f"{path} {where}: values must have 4 entries")
        if mode not in ("cartesian", "spherical"):
            raise ScriptError(f"{path} {where}: unknown mode {mode!r}")
        if t <= prev_t:
            raise ScriptError(f"{path} {where}: time {t} does not increase past {prev_t}")
        prev_t = t
        entries.append(ScriptEntry(t=t, mode=mode, values=values))
    try:
        return CommandScript(duration=float(doc["duration"]), entries=tuple(entries))
    except (TypeError, ValueError) as e:
        raise ScriptError(f"{path}: {e}") from e
