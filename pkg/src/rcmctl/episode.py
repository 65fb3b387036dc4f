"""Episode recording and deterministic CSV round-tripping.

One episode = one contiguous control-loop run. The CSV layout is the
package's interchange contract: header comment lines carrying the schema
version, control period, config hash, and shaft calibration, then one row
per control tick. Floats are serialized with shortest round-trip precision
so write -> read -> write is byte-stable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyEpisode, MalformedRow, NonMonotoneTime, SchemaMismatch
from .geometry import Pose, Rotation, Twist, Vec3
from .solver import ShaftCalibration

SCHEMA_VERSION = "rcm-episode-v1"

MODES = ("cartesian", "spherical")

COLUMNS = (
    "time_s",
    "ee_x", "ee_y", "ee_z",
    "ee_qw", "ee_qx", "ee_qy", "ee_qz",
    "tip_x", "tip_y", "tip_z",
    "mode",
    "cmd_0", "cmd_1", "cmd_2", "cmd_3",
    "twist_vx", "twist_vy", "twist_vz",
    "twist_wx", "twist_wy", "twist_wz",
    "rcm_x", "rcm_y", "rcm_z",
)

_QUAT_TOL = 1e-9
_TIP_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class EpisodeRow:
    time_s: float
    flange: Pose
    tip: Vec3
    mode: str
    cmd: tuple[float, float, float, float]
    twist: Twist
    rcm: Vec3


@dataclass(frozen=True, slots=True)
class EpisodeHeader:
    dt: float
    config_hash: str
    calib: ShaftCalibration
    schema: str = SCHEMA_VERSION


@dataclass
class EpisodeRecord:
    header: EpisodeHeader
    rows: list[EpisodeRow] = field(default_factory=list)

    def times(self) -> list[float]:
        return [r.time_s for r in self.rows]

    @property
    def duration(self) -> float:
        return self.rows[-1].time_s - self.rows[0].time_s if self.rows else 0.0


def _f(x: float) -> str:
    # repr() is the shortest decimal that parses back to the same bits
    return repr(float(x))


def _vec_csv(v: Vec3) -> str:
    return f"{_f(v.x)},{_f(v.y)},{_f(v.z)}"


def _row_line(r: EpisodeRow) -> str:
    q = r.flange.orientation
    return ",".join(
        (
            _f(r.time_s),
            _vec_csv(r.flange.position),
            f"{_f(q.w)},{_f(q.x)},{_f(q.y)},{_f(q.z)}",
            _vec_csv(r.tip),
            r.mode,
            ",".join(_f(c) for c in r.cmd),
            _vec_csv(r.twist.linear),
            _vec_csv(r.twist.angular),
            _vec_csv(r.rcm),
        )
    )


def serialize(rec: EpisodeRecord) -> str:
    """Render the record to its canonical CSV text."""
    if not rec.rows:
        raise EmptyEpisode("refusing to write a record with no rows")
    h = rec.header
    lines = [
        f"# schema={h.schema}",
        f"# dt={_f(h.dt)}",
        f"# config_sha256={h.config_hash}",
        f"# tip_offset={_vec_csv(h.calib.tip_offset_flange)}",
        f"# shaft_dir={_vec_csv(h.calib.shaft_dir_flange)}",
        ",".join(COLUMNS),
    ]
    lines.extend(_row_line(r) for r in rec.rows)
    return "\n".join(lines) + "\n"


def write_csv(rec: EpisodeRecord, destination: str | Path) -> None:
    path = Path(destination)
    text = serialize(rec)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OSError(f"failed to write episode to {path}: {e}") from e


def _parse_header(lines: list[str]) -> tuple[EpisodeHeader, int]:
    meta: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        key, _, value = body.partition("=")
        meta[key.strip()] = value.strip()
        i += 1
    if meta.get("schema") != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"expected schema {SCHEMA_VERSION!r}, got {meta.get('schema')!r}"
        )
    try:
        dt = float(meta["dt"])
        tip = Vec3(*(float(s) for s in meta["tip_offset"].split(",")))
        shaft = Vec3(*(float(s) for s in meta["shaft_dir"].split(",")))
        config_hash = meta["config_sha256"]
    except (KeyError, ValueError, TypeError) as e:
        raise SchemaMismatch(f"bad or missing header field: {e}") from e
    header = EpisodeHeader(
        dt=dt, config_hash=config_hash,
        calib=ShaftCalibration(tip_offset_flange=tip, shaft_dir_flange=shaft),
    )
    if i >= len(lines) or lines[i] != ",".join(COLUMNS):
        raise SchemaMismatch("column header row does not match the v1 schema")
    return header, i + 1


def _parse_row(line: str, row_num: int, calib: ShaftCalibration) -> EpisodeRow:
    parts = line.split(",")
    if len(parts) != len(COLUMNS):
        raise MalformedRow(row_num, f"expected {len(COLUMNS)} fields, got {len(parts)}")
    mode = parts[11]
    if mode not in MODES:
        raise MalformedRow(row_num, f"unknown mode {mode!r}")
    try:
        nums = [float(p) for p in parts[:11]] + [float(p) for p in parts[12:]]
    except ValueError as e:
        raise MalformedRow(row_num, str(e)) from e
    if not all(math.isfinite(x) for x in nums):
        raise MalformedRow(row_num, "non-finite value")
    t = nums[0]
    pos = Vec3(nums[1], nums[2], nums[3])
    quat = Rotation(nums[4], nums[5], nums[6], nums[7])
    if abs(quat.norm() - 1.0) > _QUAT_TOL:
        raise MalformedRow(row_num, f"quaternion norm {quat.norm()!r} not unit")
    tip = Vec3(nums[8], nums[9], nums[10])
    flange = Pose(pos, quat)
    derived_tip = flange.transform_point(calib.tip_offset_flange)
    if (derived_tip - tip).norm() > _TIP_TOL:
        raise MalformedRow(row_num, "tip position inconsistent with flange pose and calibration")
    cmd = (nums[11], nums[12], nums[13], nums[14])
    twist = Twist(Vec3(nums[15], nums[16], nums[17]), Vec3(nums[18], nums[19], nums[20]))
    rcm = Vec3(nums[21], nums[22], nums[23])
    return EpisodeRow(time_s=t, flange=flange, tip=tip, mode=mode, cmd=cmd, twist=twist, rcm=rcm)


def read_csv(source: str | Path) -> EpisodeRecord:
    """Parse and validate an episode file. Row numbers in errors are
    1-based over data rows."""
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise OSError(f"failed to read episode from {path}: {e}") from e
    lines = text.splitlines()
    header, first_data = _parse_header(lines)
    rows: list[EpisodeRow] = []
    prev_t = None
    for n, line in enumerate(lines[first_data:], start=1):
        if not line:
            continue
        row = _parse_row(line, n, header.calib)
        if prev_t is not None and row.time_s <= prev_t:
            raise NonMonotoneTime(
                f"row {n}: time {row.time_s!r} does not increase past {prev_t!r}"
            )
        prev_t = row.time_s
        rows.append(row)
    if not rows:
        raise EmptyEpisode(f"{path} contains no data rows")
    return EpisodeRecord(header=header, rows=rows)
