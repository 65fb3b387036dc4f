"""Closed-form velocity solver for trocar-constrained instrument motion.

Maps tip-space commands to flange twists analytically, so the instrument
shaft keeps passing through the pivot point without iterative optimization.
Two input parameterizations are supported: Cartesian tip velocity plus
shaft roll, and spherical rates (pitch / yaw / roll / insertion).
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import CommandLimitExceeded, InsertionTooShallow
from .geometry import Pose, Twist, Vec3, cross, rotate

_UNIT_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class RcmConfig:
    """Pivot location and kinematic limits for one instrument."""

    p_rcm: Vec3
    min_insertion: float = 0.02  # m; guards the 1/||r_shaft||^2 singularity
    max_insertion: float = 0.30  # m
    max_tip_speed: float = 0.05  # m/s
    max_angular_rate: float = 1.5  # rad/s

    def __post_init__(self):
        if not (0.0 < self.min_insertion < self.max_insertion):
            raise ValueError("require 0 < min_insertion < max_insertion")
        if self.max_tip_speed <= 0.0 or self.max_angular_rate <= 0.0:
            raise ValueError("kinematic limits must be positive")


@dataclass(frozen=True, slots=True)
class ShaftCalibration:
    """Instrument geometry in the flange frame.

    `tip_offset_flange` points from the flange origin to the instrument tip;
    `shaft_dir_flange` is the unit shaft axis. A lateral tool-holder offset
    shows up as a tip offset that is not parallel to the shaft axis.
    """

    tip_offset_flange: Vec3
    shaft_dir_flange: Vec3

    def __post_init__(self):
        if abs(self.shaft_dir_flange.norm() - 1.0) > _UNIT_TOL:
            raise ValueError("shaft_dir_flange must be unit length")
        if abs(self.tip_offset_flange.dot(self.shaft_dir_flange)) < 1e-12:
            raise ValueError("tip_offset_flange must have a component along the shaft axis")


@dataclass(frozen=True, slots=True)
class InstrumentState:
    """Instantaneous instrument geometry in the base frame.

    r_ee = p_rcm - p_ee (flange to pivot) and r_shaft = p_tip - p_rcm
    (pivot to tip) hold by construction; build via `reconstruct_state`.
    """

    p_ee: Vec3
    p_tip: Vec3
    r_ee: Vec3
    r_shaft: Vec3


@dataclass(frozen=True, slots=True)
class CartesianTipCommand:
    """Desired tip velocity (base frame) plus roll rate about the shaft."""

    v_tip: Vec3
    omega_roll: float = 0.0


@dataclass(frozen=True, slots=True)
class SphericalCommand:
    """Pivot rates about base x (pitch) and y (yaw), shaft roll, and
    insertion/retraction speed along the shaft."""

    omega_pitch: float = 0.0
    omega_yaw: float = 0.0
    omega_roll: float = 0.0
    v_trans: float = 0.0

    def rates(self) -> tuple[float, float, float, float]:
        return (self.omega_pitch, self.omega_yaw, self.omega_roll, self.v_trans)


def reconstruct_state(flange: Pose, calib: ShaftCalibration, config: RcmConfig) -> InstrumentState:
    """Rebuild tip position and pivot vectors from the current flange pose."""
    p_ee = flange.position
    p_tip = p_ee + rotate(flange.orientation, calib.tip_offset_flange)
    r_ee = config.p_rcm - p_ee
    r_shaft = p_tip - config.p_rcm
    if r_shaft.norm() < config.min_insertion:
        raise InsertionTooShallow(
            f"insertion {r_shaft.norm():.6f} m < min_insertion {config.min_insertion:.6f} m"
        )
    return InstrumentState(p_ee=p_ee, p_tip=p_tip, r_ee=r_ee, r_shaft=r_shaft)


def shaft_line(flange: Pose, calib: ShaftCalibration) -> tuple[Vec3, Vec3]:
    """Infinite shaft line (anchor point, unit direction) in the base frame,
    reconstructed by applying the flange orientation to the calibrated axis."""
    anchor = flange.position + rotate(flange.orientation, calib.tip_offset_flange)
    direction = rotate(flange.orientation, calib.shaft_dir_flange)
    return anchor, direction


def solve_cartesian_tip(
    state: InstrumentState, cmd: CartesianTipCommand, config: RcmConfig
) -> Twist:
    """Flange twist realizing tip velocity `v_tip` and shaft roll `omega_roll`
    while the shaft keeps passing through the pivot point.

    Tangential tip motion becomes a pure shaft rotation about the pivot,
    the parallel component becomes insertion, and the flange linear velocity
    compensates the angular term across the flange-to-pivot lever arm.
    """
    shaft_len = state.r_shaft.norm()
    if shaft_len < config.min_insertion:
        raise InsertionTooShallow(
            f"insertion {shaft_len:.6f} m < min_insertion {config.min_insertion:.6f} m"
        )
    if cmd.v_tip.norm() > config.max_tip_speed:
        raise CommandLimitExceeded(
            f"|v_tip| {cmd.v_tip.norm():.4f} m/s > max_tip_speed {config.max_tip_speed:.4f} m/s"
        )
    if abs(cmd.omega_roll) > config.max_angular_rate:
        raise CommandLimitExceeded(
            f"|omega_roll| {abs(cmd.omega_roll):.4f} rad/s > "
            f"max_angular_rate {config.max_angular_rate:.4f} rad/s"
        )

    shaft_hat = state.r_shaft * (1.0 / shaft_len)
    omega_pivot = cross(state.r_shaft, cmd.v_tip) * (1.0 / (shaft_len * shaft_len))
    omega_ee = omega_pivot + shaft_hat * cmd.omega_roll
    v_insertion = shaft_hat * cmd.v_tip.dot(shaft_hat)
    v_ee = v_insertion - cross(omega_ee, state.r_ee)
    return Twist(linear=v_ee, angular=omega_ee)


def solve_spherical(state: InstrumentState, cmd: SphericalCommand, config: RcmConfig) -> Twist:
    """Flange twist for pivot pitch/yaw rates (base-frame x and y), roll about
    the flange-to-pivot axis, and translation along it."""
    r_ee_len = state.r_ee.norm()
    if r_ee_len <= 0.0:
        raise InsertionTooShallow("flange coincides with the pivot point")
    rate_mag = max(abs(cmd.omega_pitch), abs(cmd.omega_yaw), abs(cmd.omega_roll))
    if rate_mag > config.max_angular_rate:
        raise CommandLimitExceeded(
            f"angular rate {rate_mag:.4f} rad/s > max_angular_rate "
            f"{config.max_angular_rate:.4f} rad/s"
        )
    if abs(cmd.v_trans) > config.max_tip_speed:
        raise CommandLimitExceeded(
            f"|v_trans| {abs(cmd.v_trans):.4f} m/s > max_tip_speed {config.max_tip_speed:.4f} m/s"
        )

    r_ee_hat = state.r_ee * (1.0 / r_ee_len)
    omega_ee = Vec3(cmd.omega_pitch, cmd.omega_yaw, 0.0) + r_ee_hat * cmd.omega_roll
    v_ee = r_ee_hat * cmd.v_trans - cross(omega_ee, state.r_ee)
    return Twist(linear=v_ee, angular=omega_ee)


def remap_camera_command(cmd_in_camera: Vec3, camera_pose_base: Pose) -> Vec3:
    """Re-express a velocity command given in the camera frame in the robot
    base frame. A velocity is direction-only, so camera translation is
    irrelevant; only its orientation enters."""
    return rotate(camera_pose_base.orientation, cmd_in_camera)


def trocar_point_velocity(twist: Twist, state: InstrumentState) -> Vec3:
    """Velocity of the rigid-body point currently at the pivot location.

    For a correct solve this is parallel to the shaft (pure sliding through
    the trocar); any perpendicular component is constraint violation.
    """
    return twist.linear + cross(twist.angular, state.r_ee)
