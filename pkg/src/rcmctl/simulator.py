"""Virtual robot: rigid-body twist integration plus the closed control loop.

The simulator stands in for a manipulator executing Cartesian velocity
commands: position integrates linearly, orientation through the exact
axis-angle exponential of omega*dt, renormalized every step. An optional
sinusoidal trocar perturbation displaces the flange laterally to emulate
tissue compliance; the controller keeps targeting the nominal pivot, so
perturbed episodes show realistic nonzero deviation traces.

Everything here is deterministic: no wall clock, no randomness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .episode import EpisodeHeader, EpisodeRecord, EpisodeRow
from .errors import ModeSwitchWhileMoving, ScriptError
from .geometry import Pose, Rotation, Twist, Vec3, ZERO3
from .profiler import DofState, ProfilerLimits, retarget, sample
from .solver import (
    CartesianTipCommand,
    InstrumentState,
    RcmConfig,
    ShaftCalibration,
    SphericalCommand,
    reconstruct_state,
    solve_cartesian_tip,
    solve_spherical,
)


@dataclass(frozen=True, slots=True)
class Perturbation:
    """Sinusoidal lateral displacement of the flange (m, Hz)."""

    amplitude: float
    frequency: float
    axis: Vec3 = Vec3(1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.amplitude < 0.0:
            raise ValueError("perturbation amplitude must be >= 0")

    def offset(self, t: float) -> Vec3:
        if self.amplitude == 0.0:
            return ZERO3
        return self.axis.normalized() * (
            self.amplitude * math.sin(2.0 * math.pi * self.frequency * t)
        )


@dataclass(frozen=True, slots=True)
class SimConfig:
    rcm: RcmConfig
    calib: ShaftCalibration
    dt: float = 0.002  # 500 Hz control period
    perturbation: Perturbation | None = None

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True, slots=True)
class SimState:
    time: float
    flange: Pose
    instrument: InstrumentState
    last_twist: Twist


def initial_state(flange: Pose, cfg: SimConfig) -> SimState:
    return SimState(
        time=0.0,
        flange=flange,
        instrument=reconstruct_state(flange, cfg.calib, cfg.rcm),
        last_twist=Twist.zero(),
    )


def step(state: SimState, twist: Twist, cfg: SimConfig) -> SimState:
    """Advance one control period under a constant twist."""
    dt = cfg.dt
    t_new = state.time + dt
    position = state.flange.position + twist.linear * dt
    orientation = Rotation.exp(twist.angular * dt) * state.flange.orientation
    if cfg.perturbation is not None:
        position = position + cfg.perturbation.offset(t_new) - cfg.perturbation.offset(state.time)
    flange = Pose(position, orientation)
    return SimState(
        time=t_new,
        flange=flange,
        instrument=reconstruct_state(flange, cfg.calib, cfg.rcm),
        last_twist=twist,
    )


@dataclass(frozen=True, slots=True)
class ScriptEntry:
    t: float
    mode: str
    values: tuple[float, float, float, float]


@dataclass(frozen=True, slots=True)
class CommandScript:
    """Timed rate commands. Values are (vx, vy, vz, roll) in cartesian mode
    and (pitch, yaw, roll, trans) in spherical mode."""

    duration: float
    entries: tuple[ScriptEntry, ...] = ()

    def __post_init__(self):
        prev = -math.inf
        for e in self.entries:
            if e.t <= prev:
                raise ScriptError(f"script times must be strictly increasing at t={e.t}")
            if e.mode not in ("cartesian", "spherical"):
                raise ScriptError(f"unknown mode {e.mode!r} at t={e.t}")
            prev = e.t
        if self.duration < 0.0:
            raise ScriptError("script duration must be >= 0")


_MOTIONLESS_TOL = 1e-12


class ControlLoop:
    """Profiler -> solver -> simulator pipeline, one instance per episode.

    Rate commands integrate into per-DOF virtual position targets; each DOF
    runs an independent quintic profiler seeded from its own previous sample
    (never from measured state), so the command stream stays C^2. The
    profiled instantaneous velocities feed the RCM solver every tick.
    """

    def __init__(
        self,
        cfg: SimConfig,
        limits: ProfilerLimits,
        start_flange: Pose,
        mode: str = "cartesian",
        config_hash: str = "",
    ):
        self.cfg = cfg
        self.limits = limits
        self.config_hash = config_hash
        self.state = initial_state(start_flange, cfg)
        self.clutch_engaged = True
        self.record: EpisodeRecord | None = None
        self.mode = ""
        self._rates = (0.0, 0.0, 0.0, 0.0)
        self._enter_mode(mode)

    # -- mode and command intake ------------------------------------------

    def _enter_mode(self, mode: str) -> None:
        tip = self.state.instrument.p_tip
        if mode == "cartesian":
            coords = [tip.x, tip.y, tip.z, 0.0]  # tip position + virtual roll angle
        elif mode == "spherical":
            # virtual pitch/yaw/roll angles + actual insertion depth
            coords = [0.0, 0.0, 0.0, self.state.instrument.r_shaft.norm()]
        else:
            raise ScriptError(f"unknown mode {mode!r}")
        self.mode = mode
        self._rates = (0.0, 0.0, 0.0, 0.0)
        self._targets = list(coords)
        self._dof = [DofState(c) for c in coords]
        self._segments: list = [None, None, None, None]

    def set_mode(self, mode: str) -> None:
        if mode == self.mode:
            return
        moving = any(
            abs(d.vel) > _MOTIONLESS_TOL or abs(d.acc) > _MOTIONLESS_TOL for d in self._dof
        ) or any(r != 0.0 for r in self._rates)
        if moving:
            raise ModeSwitchWhileMoving(
                f"cannot switch to {mode} while commanded motion is active"
            )
        self._enter_mode(mode)

    def set_rates(self, values: tuple[float, float, float, float]) -> None:
        """Latest-wins rate command for the active mode. Ignored while the
        clutch is open (open clutch means hold)."""
        if self.clutch_engaged:
            self._rates = tuple(float(v) for v in values)

    def set_clutch(self, engaged: bool) -> None:
        self.clutch_engaged = bool(engaged)
        if not engaged:
            self._rates = (0.0, 0.0, 0.0, 0.0)

    @property
    def commanded_rates(self) -> tuple[float, float, float, float]:
        return self._rates

    # -- recording ---------------------------------------------------------

    def start_recording(self) -> None:
        self.record = EpisodeRecord(
            header=EpisodeHeader(
                dt=self.cfg.dt, config_hash=self.config_hash, calib=self.cfg.calib
            )
        )
        self._append_row((0.0, 0.0, 0.0, 0.0), Twist.zero())

    def stop_recording(self) -> EpisodeRecord | None:
        rec, self.record = self.record, None
        return rec

    def _append_row(self, cmd: tuple[float, float, float, float], twist: Twist) -> None:
        if self.record is None:
            return
        s = self.state
        self.record.rows.append(
            EpisodeRow(
                time_s=s.time,
                flange=s.flange,
                tip=s.instrument.p_tip,
                mode=self.mode,
                cmd=cmd,
                twist=twist,
                rcm=self.cfg.rcm.p_rcm,
            )
        )

    # -- control tick ------------------------------------------------------

    def _profiled_rates(self) -> tuple[float, float, float, float]:
        # a new segment is cut when the target moves; a frozen target lets
        # the current segment run to completion (exact rest at the target)
        t = self.state.time
        dt = self.cfg.dt
        out = [0.0, 0.0, 0.0, 0.0]
        for i in range(4):
            dof = self._dof[i]
            if self._rates[i] != 0.0:
                self._targets[i] += self._rates[i] * dt
                seg = retarget(dof, self._targets[i], self.limits, t)
                self._segments[i] = seg
            else:
                seg = self._segments[i]
                if seg is None or (
                    dof.vel == 0.0 and dof.acc == 0.0 and dof.pos == self._targets[i]
                ):
                    continue  # already holding the target
            nxt = sample(seg, t + dt)
            self._dof[i] = DofState(nxt.pos, nxt.vel, nxt.acc)
            out[i] = nxt.vel
        return tuple(out)

    def _solve(self, rates: tuple[float, float, float, float]) -> tuple[Twist, tuple]:
        rcm = self.cfg.rcm
        if self.mode == "cartesian":
            v = Vec3(rates[0], rates[1], rates[2])
            speed = v.norm()
            if speed > rcm.max_tip_speed:  # transient pursuit overshoot: scale down
                v = v * (rcm.max_tip_speed / speed)
            roll = _clamp_abs(rates[3], rcm.max_angular_rate)
            cmd = CartesianTipCommand(v_tip=v, omega_roll=roll)
            twist = solve_cartesian_tip(self.state.instrument, cmd, rcm)
            return twist, (v.x, v.y, v.z, roll)
        pitch = _clamp_abs(rates[0], rcm.max_angular_rate)
        yaw = _clamp_abs(rates[1], rcm.max_angular_rate)
        roll = _clamp_abs(rates[2], rcm.max_angular_rate)
        trans = _clamp_abs(rates[3], rcm.max_tip_speed)
        cmd = SphericalCommand(omega_pitch=pitch, omega_yaw=yaw, omega_roll=roll, v_trans=trans)
        twist = solve_spherical(self.state.instrument, cmd, rcm)
        return twist, (pitch, yaw, roll, trans)

    def tick(self) -> None:
        """Run one control period: profile, solve, integrate, record."""
        rates = self._profiled_rates()
        twist, executed = self._solve(rates)
        self.state = step(self.state, twist, self.cfg)
        self._append_row(executed, twist)


def _clamp_abs(x: float, limit: float) -> float:
    if x > limit:
        return limit
    if x < -limit:
        return -limit
    return x


def run_episode(
    script: CommandScript,
    cfg: SimConfig,
    limits: ProfilerLimits,
    start_flange: Pose,
    config_hash: str = "",
) -> EpisodeRecord:
    """Deterministic closed-loop run of a timed command script.

    Script entries take effect at the first tick whose time is >= entry.t;
    the record gets the initial state plus one row per tick.
    """
    mode = script.entries[0].mode if script.entries else "cartesian"
    loop = ControlLoop(cfg, limits, start_flange, mode=mode, config_hash=config_hash)
    loop.start_recording()
    n_steps = round(script.duration / cfg.dt)
    pending = list(script.entries)
    for k in range(n_steps):
        t = k * cfg.dt
        while pending and pending[0].t <= t + 1e-12:
            entry = pending.pop(0)
            try:
                loop.set_mode(entry.mode)
                loop.set_rates(entry.values)
            except ModeSwitchWhileMoving as e:
                raise ScriptError(f"script entry at t={entry.t}: {e}") from e
        try:
            loop.tick()
        except Exception as e:
            e.step_index = k  # type: ignore[attr-defined]
            raise
    rec = loop.stop_recording()
    assert rec is not None
    return rec
