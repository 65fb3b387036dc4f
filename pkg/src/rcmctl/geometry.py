"""3-D vector / quaternion / pose / twist algebra for the RCM controller.

All lengths are meters, all angles radians. Rotations are unit quaternions
in scalar-first (w, x, y, z) order, renormalized after every composition
so long command integrations do not drift off the unit sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

_UNIT_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class Vec3:
    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)

    def to_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


ZERO3 = Vec3(0.0, 0.0, 0.0)


def cross(a: Vec3, b: Vec3) -> Vec3:
    """Right-handed cross product a x b."""
    return Vec3(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )


def point_to_line_distance(point: Vec3, line_origin: Vec3, line_dir: Vec3) -> float:
    """Minimum Euclidean distance from `point` to the infinite line
    through `line_origin` with unit direction `line_dir`."""
    if abs(line_dir.norm() - 1.0) > _UNIT_TOL:
        raise ValueError(f"line_dir must be unit length, got norm {line_dir.norm()!r}")
    rel = point - line_origin
    along = rel.dot(line_dir)
    perp = rel - line_dir * along
    return perp.norm()


@dataclass(frozen=True, slots=True)
class Rotation:
    """Unit quaternion, scalar-first (w, x, y, z)."""

    w: float
    x: float
    y: float
    z: float

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis: Vec3, angle: float) -> "Rotation":
        u = axis.normalized()
        half = 0.5 * angle
        s = math.sin(half)
        return Rotation(math.cos(half), u.x * s, u.y * s, u.z * s)

    @staticmethod
    def exp(rotvec: Vec3) -> "Rotation":
        """Quaternion exponential of a rotation vector (axis * angle).

        Exact axis-angle form; the small-angle branch keeps sin(t/2)/t
        well-conditioned near zero.
        """
        angle = rotvec.norm()
        half = 0.5 * angle
        if angle < 1e-12:
            # sin(half)/angle -> 0.5 as angle -> 0
            k = 0.5
        else:
            k = math.sin(half) / angle
        return Rotation(math.cos(half), rotvec.x * k, rotvec.y * k, rotvec.z * k).normalized()

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)

    def normalized(self) -> "Rotation":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero quaternion")
        return Rotation(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "Rotation":
        return Rotation(self.w, -self.x, -self.y, -self.z)

    inverse = conjugate  # unit quaternion

    def __mul__(self, other: "Rotation") -> "Rotation":
        """Hamilton product; result renormalized."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Rotation(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ).normalized()

    def to_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)


def rotate(r: Rotation, v: Vec3) -> Vec3:
    """Apply rotation r to vector v (q v q*), length-preserving."""
    # t = 2 q_vec x v; v' = v + w t + q_vec x t
    qv = Vec3(r.x, r.y, r.z)
    t = cross(qv, v) * 2.0
    return v + t * r.w + cross(qv, t)


@dataclass(frozen=True, slots=True)
class Pose:
    """Rigid transform: rotate then translate (position in the parent frame)."""

    position: Vec3
    orientation: Rotation

    @staticmethod
    def identity() -> "Pose":
        return Pose(ZERO3, Rotation.identity())

    def transform_point(self, p: Vec3) -> Vec3:
        return self.position + rotate(self.orientation, p)


def compose(a: Pose, b: Pose) -> Pose:
    """a then b expressed in a's parent frame: (a*b).p = a.p + R_a b.p."""
    return Pose(a.position + rotate(a.orientation, b.position), a.orientation * b.orientation)


def inverse(a: Pose) -> Pose:
    inv_r = a.orientation.conjugate()
    return Pose(rotate(inv_r, -a.position), inv_r)


@dataclass(frozen=True, slots=True)
class Twist:
    """Linear (m/s) and angular (rad/s) velocity, both in the base frame."""

    linear: Vec3
    angular: Vec3

    @staticmethod
    def zero() -> "Twist":
        return Twist(ZERO3, ZERO3)

    def is_finite(self) -> bool:
        return self.linear.is_finite() and self.angular.is_finite()
