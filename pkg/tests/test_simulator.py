"""Simulator tests: integration accuracy, rigidity, determinism, and the
closed-loop pivot constraint."""
import math

import numpy as np
import pytest

from rcmctl.errors import ScriptError
from rcmctl.geometry import (
    Pose,
    Rotation,
    Twist,
    Vec3,
    point_to_line_distance,
    rotate,
)
from rcmctl.profiler import ProfilerLimits
from rcmctl.simulator import (
    CommandScript,
    ControlLoop,
    Perturbation,
    ScriptEntry,
    SimConfig,
    initial_state,
    run_episode,
    step,
)
from rcmctl.solver import RcmConfig, ShaftCalibration, shaft_line

RCM = RcmConfig(p_rcm=Vec3(0.0, 0.0, 0.1))
CALIB = ShaftCalibration(tip_offset_flange=Vec3(0.0, 0.0, -0.3), shaft_dir_flange=Vec3(0.0, 0.0, -1.0))
SIM = SimConfig(rcm=RCM, calib=CALIB, dt=0.002)
LIMITS = ProfilerLimits(max_accel=0.5, max_jerk=20.0, base_duration_d=0.5)
START = Pose(Vec3(0.0, 0.0, 0.3), Rotation.identity())


def test_zero_twist_only_advances_time():
    s0 = initial_state(START, SIM)
    s1 = step(s0, Twist.zero(), SIM)
    assert s1.time == pytest.approx(0.002)
    assert s1.flange.position == s0.flange.position
    assert s1.flange.orientation.to_tuple() == s0.flange.orientation.to_tuple()


def test_linear_twist_advances_position():
    s0 = initial_state(START, SIM)
    s1 = step(s0, Twist(Vec3(1.0, 0.0, 0.0), Vec3(0, 0, 0)), SIM)
    assert (s1.flange.position - Vec3(0.002, 0.0, 0.3)).norm() < 1e-15


def test_angular_integration_matches_closed_form():
    # pi rad/s about z for 1 s of 0.002 s steps -> 180 degrees about z
    s = initial_state(START, SIM)
    twist = Twist(Vec3(0, 0, 0), Vec3(0.0, 0.0, math.pi))
    for _ in range(500):
        s = step(s, twist, SIM)
    expected = Rotation.from_axis_angle(Vec3(0, 0, 1), math.pi)
    got = s.flange.orientation
    dot = abs(
        got.w * expected.w + got.x * expected.x + got.y * expected.y + got.z * expected.z
    )
    assert 1.0 - dot < 1e-6
    v = rotate(got, Vec3(1, 0, 0))
    assert (v - Vec3(-1, 0, 0)).norm() < 1e-6


def test_instrument_state_never_stale():
    s = initial_state(START, SIM)
    s = step(s, Twist(Vec3(0.01, 0.0, 0.0), Vec3(0, 0, 0)), SIM)
    assert (s.instrument.p_ee - s.flange.position).norm() == 0.0
    expected_tip = s.flange.position + rotate(s.flange.orientation, CALIB.tip_offset_flange)
    assert (s.instrument.p_tip - expected_tip).norm() == 0.0


PIVOT_SCRIPT = CommandScript(
    duration=5.0,
    entries=(
        ScriptEntry(t=0.0, mode="cartesian", values=(0.008, 0.0, 0.0, 0.0)),
        ScriptEntry(t=2.5, mode="cartesian", values=(-0.008, 0.0, 0.0, 0.0)),
    ),
)


def episode_max_deviation_m(record) -> float:
    worst = 0.0
    for row in record.rows:
        anchor, direction = shaft_line(row.flange, CALIB)
        d = point_to_line_distance(RCM.p_rcm, anchor, direction.normalized())
        worst = max(worst, d)
    return worst


def test_single_pivot_episode_keeps_constraint():
    record = run_episode(PIVOT_SCRIPT, SIM, LIMITS, START)
    assert len(record.rows) == 2501
    assert episode_max_deviation_m(record) <= 1e-6


def test_shaft_length_conserved():
    record = run_episode(PIVOT_SCRIPT, SIM, LIMITS, START)
    lengths = [(row.tip - row.flange.position).norm() for row in record.rows]
    assert max(lengths) - min(lengths) < 1e-12


def test_empty_script_records_initial_state_only():
    record = run_episode(CommandScript(duration=0.0), SIM, LIMITS, START)
    assert len(record.rows) == 1
    assert record.rows[0].time_s == 0.0
    assert record.rows[0].twist == Twist.zero()


def test_identical_scripts_give_identical_records():
    a = run_episode(PIVOT_SCRIPT, SIM, LIMITS, START)
    b = run_episode(PIVOT_SCRIPT, SIM, LIMITS, START)
    assert a == b


def test_step_error_carries_step_index():
    # command straight down fast enough to cross min_insertion
    script = CommandScript(
        duration=20.0,
        entries=(ScriptEntry(t=0.0, mode="cartesian", values=(0.0, 0.0, 0.02, 0.0)),),
    )
    with pytest.raises(Exception) as exc_info:
        run_episode(script, SIM, LIMITS, START)
    assert hasattr(exc_info.value, "step_index")


def test_mode_switch_requires_pause():
    script = CommandScript(
        duration=4.0,
        entries=(
            ScriptEntry(t=0.0, mode="cartesian", values=(0.008, 0.0, 0.0, 0.0)),
            ScriptEntry(t=1.0, mode="spherical", values=(0.0, 0.0, 0.0, 0.0)),
        ),
    )
    with pytest.raises(ScriptError):
        run_episode(script, SIM, LIMITS, START)


def test_mode_switch_after_hold_works():
    script = CommandScript(
        duration=6.0,
        entries=(
            ScriptEntry(t=0.0, mode="cartesian", values=(0.005, 0.0, 0.0, 0.0)),
            ScriptEntry(t=1.0, mode="cartesian", values=(0.0, 0.0, 0.0, 0.0)),
            ScriptEntry(t=3.0, mode="spherical", values=(0.05, 0.0, 0.0, 0.0)),
        ),
    )
    record = run_episode(script, SIM, LIMITS, START)
    modes = {row.mode for row in record.rows}
    assert modes == {"cartesian", "spherical"}
    assert episode_max_deviation_m(record) <= 1e-6


def test_perturbation_displaces_shaft_line():
    amp = 5e-5  # 0.05 mm
    sim = SimConfig(rcm=RCM, calib=CALIB, dt=0.002, perturbation=Perturbation(amplitude=amp, frequency=1.0))
    script = CommandScript(
        duration=10.0,
        entries=(ScriptEntry(t=0.0, mode="cartesian", values=(0.002, 0.0, 0.0, 0.0)),),
    )
    record = run_episode(script, sim, LIMITS, START)
    devs = []
    for row in record.rows:
        anchor, direction = shaft_line(row.flange, CALIB)
        devs.append(point_to_line_distance(RCM.p_rcm, anchor, direction.normalized()))
    devs = np.array(devs)
    # the trace follows |amp * sin(2 pi t)| up to the slow commanded pivot
    assert devs.max() == pytest.approx(amp, rel=0.15)
    assert np.median(devs) == pytest.approx(amp * math.sin(math.pi / 4), rel=0.2)


def test_script_validation():
    with pytest.raises(ScriptError):
        CommandScript(
            duration=1.0,
            entries=(
                ScriptEntry(t=1.0, mode="cartesian", values=(0, 0, 0, 0)),
                ScriptEntry(t=0.5, mode="cartesian", values=(0, 0, 0, 0)),
            ),
        )
    with pytest.raises(ScriptError):
        CommandScript(duration=1.0, entries=(ScriptEntry(t=0.0, mode="warp", values=(0, 0, 0, 0)),))


def test_clutch_zeroes_rates_and_blocks_commands():
    loop = ControlLoop(SIM, LIMITS, START)
    loop.set_rates((0.005, 0.0, 0.0, 0.0))
    assert loop.commanded_rates[0] == 0.005
    loop.set_clutch(False)
    assert loop.commanded_rates == (0.0, 0.0, 0.0, 0.0)
    loop.set_rates((0.005, 0.0, 0.0, 0.0))  # ignored while open
    assert loop.commanded_rates == (0.0, 0.0, 0.0, 0.0)
    loop.set_clutch(True)
    loop.set_rates((0.005, 0.0, 0.0, 0.0))
    assert loop.commanded_rates[0] == 0.005
