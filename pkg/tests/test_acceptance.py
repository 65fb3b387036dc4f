"""Acceptance suite: every exit criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion. The whole suite is desk-scale (< 5 minutes).
"""
import asyncio
import random
import time
from pathlib import Path

import numpy as np
import pytest

from rcmctl.config import load_config, load_script, parse_config
from rcmctl.episode import read_csv, serialize, write_csv
from rcmctl.geometry import Pose, Rotation, Vec3, cross, point_to_line_distance, rotate
from rcmctl.metrics import downsample, ldlj, sparc, tip_speed_series
from rcmctl.profiler import DofState, ProfilerLimits, retarget, sample
from rcmctl.server import ActionCommand, ControlServer, REASON_LIMIT, REASON_SHALLOW, REASON_STALE, validate_action
from rcmctl.simulator import initial_state, run_episode
from rcmctl.solver import (
    CartesianTipCommand,
    SphericalCommand,
    solve_cartesian_tip,
    solve_spherical,
    trocar_point_velocity,
)

from test_server import NdjsonClient
from test_solver import CONFIG as SOLVER_CONFIG, random_state

ROOT = Path(__file__).resolve().parent.parent
APP = load_config(ROOT / "configs" / "default.yaml")
SCRIPT = load_script(ROOT / "configs" / "scripts" / "pivot_insertion_roll.yaml")


@pytest.fixture(scope="module")
def episode():
    t0 = time.perf_counter()
    record = run_episode(SCRIPT, APP.sim, APP.limits, APP.start_flange, APP.config_hash)
    return record, time.perf_counter() - t0


def ok(name, detail):
    print(f"\n[ACCEPT] {name}: PASS ({detail})")


def test_c1_rcm_identity_analytical():
    rng = random.Random(4242)

    def rand_dir():
        return Vec3(rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1)).normalized()

    n = 10_000
    states = [random_state(rng, SOLVER_CONFIG) for _ in range(n)]
    cart = [(rand_dir() * rng.uniform(0, 0.045), rng.uniform(-1.4, 1.4)) for _ in range(n)]
    sph = [
        SphericalCommand(
            rng.uniform(-1.4, 1.4), rng.uniform(-1.4, 1.4), rng.uniform(-1.4, 1.4),
            rng.uniform(-0.045, 0.045),
        )
        for _ in range(n)
    ]

    t0 = time.perf_counter()
    worst = 0.0
    for st, (v, roll) in zip(states, cart):
        twist = solve_cartesian_tip(st, CartesianTipCommand(v, roll), SOLVER_CONFIG)
        v_rcm = trocar_point_velocity(twist, st)
        axis = st.r_shaft.normalized()
        perp = v_rcm - axis * v_rcm.dot(axis)
        ratio = perp.norm() / (1.0 + v.norm() + abs(roll))
        worst = max(worst, ratio)
    for st, cmd in zip(states, sph):
        twist = solve_spherical(st, cmd, SOLVER_CONFIG)
        v_rcm = trocar_point_velocity(twist, st)
        axis = st.r_ee.normalized()
        perp = v_rcm - axis * v_rcm.dot(axis)
        budget = 1.0 + abs(cmd.v_trans) + abs(cmd.omega_pitch) + abs(cmd.omega_yaw) + abs(cmd.omega_roll)
        worst = max(worst, perp.norm() / budget)
    elapsed = time.perf_counter() - t0

    assert worst <= 1e-12
    assert elapsed < 1.0
    ok("C1 analytical RCM identity", f"{2*n} solves, worst perp ratio {worst:.2e}, {elapsed:.2f}s")


def test_c2_rcm_identity_integrated(episode):
    record, elapsed = episode
    assert elapsed < 5.0
    assert len(record.rows) == 30_001
    worst = 0.0
    calib = APP.calib
    for row in record.rows:
        anchor = row.flange.position + rotate(row.flange.orientation, calib.tip_offset_flange)
        direction = rotate(row.flange.orientation, calib.shaft_dir_flange).normalized()
        worst = max(worst, point_to_line_distance(APP.rcm.p_rcm, anchor, direction))
    assert worst <= 1e-6
    ok("C2 integrated RCM deviation", f"60 s episode, max {worst:.2e} m <= 1e-6 m, sim {elapsed:.2f}s")


def test_c3_worked_example_regression():
    state = initial_state(Pose(Vec3(0, 0, 0.3), Rotation.identity()), APP.sim).instrument
    twist = solve_cartesian_tip(state, CartesianTipCommand(v_tip=Vec3(0.01, 0.0, 0.0)), APP.rcm)
    assert (twist.angular - Vec3(0.0, -0.1, 0.0)).norm() <= 1e-12
    assert (twist.linear - Vec3(-0.02, 0.0, 0.0)).norm() <= 1e-12
    tip_vel = twist.linear + cross(twist.angular, state.p_tip - state.p_ee)
    assert (tip_vel - Vec3(0.01, 0.0, 0.0)).norm() <= 1e-12
    ok("C3 worked-example regression", "omega (0,-0.1,0), linear (-0.02,0,0) at 1e-12")


def test_c4_profiler_criteria():
    generous = ProfilerLimits(max_accel=1e9, max_jerk=1e12, base_duration_d=1.0)

    rng = random.Random(7)
    worst_res = 0.0
    for _ in range(200):
        cur = DofState(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 2))
        target = rng.uniform(-1, 1)
        seg = retarget(cur, target, generous, now=0.0)
        start = sample(seg, 0.0)
        end = sample(seg, seg.duration - 1e-15)
        worst_res = max(
            worst_res,
            abs(start.pos - cur.pos), abs(start.vel - cur.vel), abs(start.acc - cur.acc),
            abs(end.pos - target), abs(end.vel), abs(end.acc),
        )
    assert worst_res <= 1e-9

    seg = retarget(DofState(0.0), 1.0, generous, now=0.0)
    assert abs(sample(seg, 0.5).pos - 0.5) <= 1e-12
    grid = np.linspace(0.0, 1.0, 40001)
    peak_v = max(sample(seg, float(t)).vel for t in grid)
    assert abs(peak_v - 1.875) <= 1e-9

    limits = ProfilerLimits(max_accel=1e9, max_jerk=30.0, base_duration_d=0.5)
    seg = retarget(DofState(0.0), 1.0, limits, now=0.0)
    min_d = (60.0 / 30.0) ** (1.0 / 3.0)
    assert seg.duration >= min_d
    grid = np.arange(0.0, seg.duration, 1e-3)
    max_jerk = max(abs(sample(seg, float(t)).jerk) for t in grid)
    assert max_jerk <= 30.0 * (1 + 1e-9)
    ok(
        "C4 profiler",
        f"residuals {worst_res:.1e} <= 1e-9, midpoint exact, peak vel 1.875, "
        f"duration {seg.duration:.3f} >= {min_d:.3f}, jerk within limit",
    )


def test_c5_smoothness_invariances():
    fs = 100.0
    tau = np.linspace(0.0, 1.0, 200)
    bell = 0.01 * (30 * tau**2 - 60 * tau**3 + 30 * tau**4) / 1.875

    base_sparc = sparc(bell, fs)
    for k in (3.0, 250.0, 1e-3):
        assert abs(sparc(k * bell, fs) - base_sparc) <= 1e-9

    base_ldlj = ldlj(bell, fs)
    for k in (3.0, 250.0):
        assert abs(ldlj(k * bell, fs) - base_ldlj) <= 1e-6

    def smooth_bell(duration, fs_, peak):
        n = int(round(duration * fs_)) + 1
        t = np.arange(n) / fs_ / duration
        s = t**4 * (1 - t) ** 4
        return peak * s / s.max()

    for fs_, d0, tol in ((5.0, 60.0, 1e-3), (500.0, 8.0, 1e-5)):
        ref = ldlj(smooth_bell(d0, fs_, 0.01), fs_)
        for c in (2.0, 3.0):
            assert abs(ldlj(smooth_bell(d0 * c, fs_, 0.01 / c), fs_) - ref) <= tol

    long_bell = np.concatenate([bell * 100.0, np.zeros(1000)])
    t = np.arange(len(long_bell)) / fs
    sparcs, ldljs = [], []
    for amp in (0.01, 0.05, 0.10):
        rippled = long_bell + amp * np.sin(2 * np.pi * 8.0 * t)
        sparcs.append(sparc(rippled, fs))
        ldljs.append(ldlj(rippled, fs))
    assert sparcs[0] > sparcs[1] > sparcs[2]
    assert ldljs[0] > ldljs[1] > ldljs[2]

    rest = np.zeros(100)
    one = np.concatenate([bell, rest, np.zeros_like(bell)])
    two = np.concatenate([bell, rest, bell])
    assert sparc(two, fs) < sparc(one, fs)
    ok(
        "C5 smoothness invariances",
        "SPARC amp-invariant to 1e-9, LDLJ amp 1e-6 / duration 1e-3@5Hz 1e-5@500Hz, "
        "ripple ordering + two-bell ordering hold",
    )


def test_c6_sanity_band_vs_paper(episode):
    record, _ = episode
    times, speeds = tip_speed_series(record)
    _, resampled = downsample(times, speeds, 5.0)
    s = sparc(resampled, 5.0)
    l = ldlj(resampled, 5.0)
    assert -4.5 <= s <= -1.0
    assert -25.0 <= l <= -15.0
    ok("C6 sanity band", f"sparc {s:.3f} in [-4.5,-1.0], ldlj {l:.3f} in [-25,-15] at 5 Hz")


def test_c7_mode_consistency():
    state = initial_state(Pose(Vec3(0, 0, 0.3), Rotation.identity()), APP.sim).instrument
    worst = 0.0
    # equivalent cartesian speed is |pitch| * insertion; stay inside limits
    for pitch in (0.02, -0.07, 0.3, -0.45):
        sph = solve_spherical(state, SphericalCommand(omega_pitch=pitch), APP.rcm)
        v_equiv = cross(Vec3(pitch, 0.0, 0.0), state.r_shaft)
        cart = solve_cartesian_tip(state, CartesianTipCommand(v_tip=v_equiv), APP.rcm)
        worst = max(worst, (sph.angular - cart.angular).norm())
    assert worst <= 1e-9
    ok("C7 mode consistency", f"collinear pitch commands agree on omega to {worst:.1e}")


def test_c8_determinism_and_roundtrips(tmp_path, episode):
    record, _ = episode
    again = run_episode(SCRIPT, APP.sim, APP.limits, APP.start_flange, APP.config_hash)
    text_a = serialize(record)
    text_b = serialize(again)
    assert text_a == text_b

    p1, p2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    write_csv(record, p1)
    write_csv(read_csv(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()

    async def scripted_session(name):
        cfg = parse_config({"server": {"tcp_port": 0, "ws_port": 0}})
        object.__setattr__(cfg.server, "test_mode", True)
        server = ControlServer(cfg)
        tcp_port, _ = await server.start()
        out = tmp_path / name
        try:
            client = await NdjsonClient.connect(tcp_port)
            await client.hello()
            await client.request({"type": "start_recording", "path": str(out)})
            await client.request({"type": "command_cartesian", "v": [0.006, 0.0, 0.0], "roll": 0.2})
            await client.step(400)
            await client.request({"type": "command_spherical", "pitch": 0.0})  # wrong mode: no effect
            await client.request({"type": "command_cartesian", "v": [0.0, 0.0, 0.0], "roll": 0.0})
            await client.step(400)
            r = await client.request({"type": "stop_recording"})
            assert r["accepted"]
            client.close()
        finally:
            await server.close()
        return out.read_bytes()

    s1 = asyncio.run(scripted_session("s1.csv"))
    s2 = asyncio.run(scripted_session("s2.csv"))
    assert s1 == s2
    ok(
        "C8 determinism",
        f"simulate-twice identical ({len(text_a)} bytes), CSV write/read/write stable, "
        f"server replay identical ({len(s1)} bytes)",
    )


def test_c9_safety_gate_blocks_faults():
    async def scenario():
        cfg = parse_config({"server": {"tcp_port": 0, "ws_port": 0}})
        object.__setattr__(cfg.server, "test_mode", True)
        server = ControlServer(cfg)
        tcp_port, _ = await server.start()
        try:
            client = await NdjsonClient.connect(tcp_port)
            await client.hello()
            before = server.loop.state

            r = await client.request({"type": "command_cartesian", "v": [0.2, 0.0, 0.0], "roll": 0.0})
            assert not r["accepted"] and r["reason"] == REASON_LIMIT
            r = await client.request({"type": "command_cartesian", "v": [0.0, 0.0, 0.0], "roll": 9.0})
            assert not r["accepted"] and r["reason"] == REASON_LIMIT

            shallow_cfg = parse_config(
                {
                    "calibration": {"tip_offset": [0.0, 0.0, -0.2200049]},
                    "server": {"workspace_max": [0.15, 0.15, 0.15], "tcp_port": 0, "ws_port": 0},
                }
            )
            shallow = validate_action(
                ActionCommand("cartesian", (0.0, 0.0, 0.045, 0.0)),
                initial_state(shallow_cfg.start_flange, shallow_cfg.sim).instrument,
                shallow_cfg,
            )
            stale = validate_action(
                ActionCommand("cartesian", (0.01, 0.0, 0.0, 0.0)),
                server.loop.state.instrument,
                cfg,
                age_s=1.0,
            )
            assert stale.reason == REASON_STALE and not stale.accepted

            await client.step(50)
            after = server.loop.state
            assert after.flange.position == before.flange.position
            assert after.flange.orientation.to_tuple() == before.flange.orientation.to_tuple()
            assert server.loop.commanded_rates == (0.0, 0.0, 0.0, 0.0)
            client.close()
            return shallow
        finally:
            await server.close()

    shallow = asyncio.run(scenario())
    assert shallow.reason == REASON_SHALLOW and not shallow.accepted
    ok(
        "C9 safety gate",
        "limit, shallow-insertion, and stale faults all rejected with zero state delta",
    )
