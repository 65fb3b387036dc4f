"""Per-DOF fifth-order polynomial profiling toward a commanded target.

Each scalar degree of freedom gets its own quintic segment from the current
kinematic state (position, velocity, acceleration) to the target position
with zero terminal velocity and acceleration. Acceleration and jerk limits
are enforced by extending the segment duration until they hold.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DurationCapReached

_EXTEND_FACTOR = 1.1
_EXTEND_CAP = 100


@dataclass(frozen=True, slots=True)
class ProfilerLimits:
    max_accel: float  # units/s^2
    max_jerk: float  # units/s^3
    base_duration_d: float = 0.5  # s

    def __post_init__(self):
        if self.max_accel <= 0.0 or self.max_jerk <= 0.0 or self.base_duration_d <= 0.0:
            raise ValueError("profiler limits must be positive")


@dataclass(frozen=True, slots=True)
class DofState:
    """Kinematic state of one scalar DOF."""

    pos: float
    vel: float = 0.0
    acc: float = 0.0


@dataclass(frozen=True, slots=True)
class Sample:
    pos: float
    vel: float
    acc: float
    jerk: float


@dataclass(frozen=True, slots=True)
class ProfilerSegment:
    """One quintic segment; immutable once created.

    coeffs are in local time u = t - start_time, pos(u) = sum c_k u^k.
    """

    coeffs: tuple[float, float, float, float, float, float]
    start_time: float
    duration: float
    start: DofState
    target_pos: float

    @property
    def target(self) -> DofState:
        # segments always terminate at rest on the target
        return DofState(self.target_pos, 0.0, 0.0)

    def _eval(self, u: float) -> Sample:
        c0, c1, c2, c3, c4, c5 = self.coeffs
        pos = c0 + u * (c1 + u * (c2 + u * (c3 + u * (c4 + u * c5))))
        vel = c1 + u * (2 * c2 + u * (3 * c3 + u * (4 * c4 + u * 5 * c5)))
        acc = 2 * c2 + u * (6 * c3 + u * (12 * c4 + u * 20 * c5))
        jerk = 6 * c3 + u * (24 * c4 + u * 60 * c5)
        return Sample(pos, vel, acc, jerk)

    def peak_accel(self) -> float:
        """Exact max |acceleration| over the segment.

        Acceleration is cubic in u, so its interior extrema sit where the
        (quadratic) jerk vanishes; candidates are those roots plus the ends.
        """
        _, _, _, c3, c4, c5 = self.coeffs
        candidates = [0.0, self.duration]
        # 10 c5 u^2 + 4 c4 u + c3 = 0
        a, b, c = 10.0 * c5, 4.0 * c4, c3
        if a != 0.0:
            disc = b * b - 4.0 * a * c
            if disc >= 0.0:
                root = disc**0.5
                candidates.append((-b + root) / (2.0 * a))
                candidates.append((-b - root) / (2.0 * a))
        elif b != 0.0:
            candidates.append(-c / b)
        return max(
            abs(self._eval(u).acc) for u in candidates if 0.0 <= u <= self.duration
        )

    def peak_jerk(self) -> float:
        """Exact max |jerk| over the segment (quadratic: ends or vertex)."""
        _, _, _, _, c4, c5 = self.coeffs
        candidates = [0.0, self.duration]
        if c5 != 0.0:
            candidates.append(-c4 / (5.0 * c5))
        return max(
            abs(self._eval(u).jerk) for u in candidates if 0.0 <= u <= self.duration
        )


def _fit_quintic(current: DofState, target_pos: float, duration: float) -> tuple[float, ...]:
    """Quintic coefficients meeting (pos, vel, acc) now and (target, 0, 0)
    at the end of the segment."""
    d = duration
    p0, v0, a0 = current.pos, current.vel, current.acc
    aa = target_pos - p0 - v0 * d - 0.5 * a0 * d * d
    bb = -v0 - a0 * d
    cc = -a0
    d3 = d * d * d
    c3 = (20.0 * aa - 8.0 * bb * d + cc * d * d) / (2.0 * d3)
    c4 = (-30.0 * aa + 14.0 * bb * d - 2.0 * cc * d * d) / (2.0 * d3 * d)
    c5 = (12.0 * aa - 6.0 * bb * d + cc * d * d) / (2.0 * d3 * d * d)
    return (p0, v0, 0.5 * a0, c3, c4, c5)


def retarget(
    current: DofState, target_pos: float, limits: ProfilerLimits, now: float
) -> ProfilerSegment:
    """Cut a new segment from `current` to `target_pos` starting at `now`.

    The duration starts at the configured base value and is multiplied by
    1.1 until the segment's exact acceleration and jerk peaks fall within
    the limits.
    """
    duration = limits.base_duration_d
    for _ in range(_EXTEND_CAP):
        seg = ProfilerSegment(
            coeffs=_fit_quintic(current, target_pos, duration),
            start_time=now,
            duration=duration,
            start=current,
            target_pos=target_pos,
        )
        if seg.peak_accel() <= limits.max_accel and seg.peak_jerk() <= limits.max_jerk:
            return seg
        duration *= _EXTEND_FACTOR
    raise DurationCapReached(
        f"no duration within {_EXTEND_CAP} extensions satisfies "
        f"accel<={limits.max_accel}, jerk<={limits.max_jerk}"
    )


def sample(seg: ProfilerSegment, t: float) -> Sample:
    """Evaluate the segment at absolute time t, clamped to its time span.

    Past the end the true state is a hold at the target, so the clamped
    sample is exactly (target, 0, 0, 0) rather than the polynomial's
    rounding residue.
    """
    u = t - seg.start_time
    if u < 0.0:
        u = 0.0
    elif u >= seg.duration:
        return Sample(seg.target_pos, 0.0, 0.0, 0.0)
    return seg._eval(u)
