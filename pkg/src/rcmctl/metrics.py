"""Evaluation pipeline: pivot-constraint deviation plus motion smoothness.

Deviation is the per-tick minimum distance between the commanded pivot
point and the shaft line reconstructed from the recorded flange pose and
calibration, reported in millimeters. Smoothness uses the spectral arc
length (SPARC) and the log dimensionless jerk (LDLJ) of the tip speed
profile, conventionally computed after downsampling to 5 Hz.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .episode import EpisodeRecord
from .errors import (
    AllZeroSignal,
    EmptyEpisode,
    RateTooLow,
    SeriesTooShort,
    ZeroPeakSpeed,
)
from .geometry import Vec3, cross, point_to_line_distance, rotate
from .solver import ShaftCalibration


@dataclass(frozen=True)
class SparcParams:
    cutoff_hz: float = 10.0
    amp_threshold: float = 0.05
    padding_level: int = 4


@dataclass(frozen=True)
class DeviationStats:
    mean_mm: float
    max_mm: float
    median_mm: float
    series_mm: np.ndarray
    times_s: np.ndarray


@dataclass(frozen=True)
class SmoothnessResult:
    sparc: float
    ldlj: float
    sample_rate_hz: float


def shaft_deviation_mm(flange_pos: Vec3, flange_rot, calib: ShaftCalibration, p_rcm: Vec3) -> float:
    """Distance (mm) from the pivot point to the infinite shaft line
    reconstructed from one flange pose."""
    anchor = flange_pos + rotate(flange_rot, calib.tip_offset_flange)
    direction = rotate(flange_rot, calib.shaft_dir_flange)
    return 1e3 * point_to_line_distance(p_rcm, anchor, direction.normalized())


def rcm_deviation_series(
    episode: EpisodeRecord, p_rcm: Vec3, calib: ShaftCalibration
) -> DeviationStats:
    """Per-tick deviation statistics over a recorded episode."""
    if not episode.rows:
        raise EmptyEpisode("episode has no rows")
    series = np.empty(len(episode.rows))
    times = np.empty(len(episode.rows))
    for i, row in enumerate(episode.rows):
        series[i] = shaft_deviation_mm(row.flange.position, row.flange.orientation, calib, p_rcm)
        times[i] = row.time_s
    return DeviationStats(
        mean_mm=float(np.mean(series)),
        max_mm=float(np.max(series)),
        median_mm=float(np.median(series)),
        series_mm=series,
        times_s=times,
    )


def tip_speed_series(episode: EpisodeRecord) -> tuple[np.ndarray, np.ndarray]:
    """(times, |tip velocity|) from the recorded twists (rigid-body transport
    of the flange twist to the tip point)."""
    if not episode.rows:
        raise EmptyEpisode("episode has no rows")
    times = np.empty(len(episode.rows))
    speeds = np.empty(len(episode.rows))
    for i, row in enumerate(episode.rows):
        lever = row.tip - row.flange.position
        v_tip = row.twist.linear + cross(row.twist.angular, lever)
        times[i] = row.time_s
        speeds[i] = v_tip.norm()
    return times, speeds


def downsample(
    times: np.ndarray, values: np.ndarray, target_hz: float
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform linear-interpolation resampling onto a grid starting at the
    first timestamp."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        raise EmptyEpisode("cannot downsample an empty series")
    if times.size < 2:
        raise SeriesTooShort("need at least 2 samples to resample")
    rate = 1.0 / float(np.median(np.diff(times)))
    if rate < target_hz * (1.0 - 1e-9):
        raise RateTooLow(f"input rate {rate:.3f} Hz < target {target_hz:.3f} Hz")
    span = times[-1] - times[0]
    n = int(np.floor(span * target_hz + 1e-9)) + 1
    grid = times[0] + np.arange(n) / target_hz
    return grid, np.interp(grid, times, values)


def sparc(speed: np.ndarray, fs: float, params: SparcParams = SparcParams()) -> float:
    """Negative spectral arc length of the normalized magnitude spectrum,
    restricted to the cutoff band and trimmed by the amplitude threshold
    (method of Balasubramanian et al.; nearer zero is smoother)."""
    speed = np.asarray(speed, dtype=float)
    if speed.size < 4:
        raise SeriesTooShort(f"SPARC needs >= 4 samples, got {speed.size}")
    if fs <= 0.0:
        raise ValueError("fs must be positive")
    if np.max(np.abs(speed)) == 0.0:
        raise AllZeroSignal("SPARC is undefined for an identically zero signal")

    nfft = int(2 ** (np.ceil(np.log2(speed.size)) + params.padding_level))
    f = np.arange(0, fs, fs / nfft)
    mag = np.abs(np.fft.fft(speed, nfft))
    mag = mag / np.max(mag)

    # one-sided spectrum: the arc is defined on [0, fs/2]; without this the
    # cutoff band would run into the mirrored half whenever fs < 2*cutoff
    # (e.g. the conventional 5 Hz analysis rate)
    half = nfft // 2 + 1
    f = f[:half]
    mag = mag[:half]

    keep = f <= params.cutoff_hz
    f_sel = f[keep]
    mag_sel = mag[keep]

    above = np.nonzero(mag_sel >= params.amp_threshold)[0]
    band = slice(above[0], above[-1] + 1)
    f_sel = f_sel[band]
    mag_sel = mag_sel[band]
    if f_sel.size < 2:
        return -0.0

    df = np.diff(f_sel) / (f_sel[-1] - f_sel[0])
    dm = np.diff(mag_sel)
    return float(-np.sum(np.sqrt(df**2 + dm**2)))


def _central_diff(x: np.ndarray, dt: float) -> np.ndarray:
    # reflection padding (mirror about the end sample) keeps end effects
    # deterministic and forces zero slope at the boundaries
    padded = np.concatenate(([x[1]], x, [x[-2]]))
    return (padded[2:] - padded[:-2]) / (2.0 * dt)


def ldlj(speed: np.ndarray, fs: float) -> float:
    """Log dimensionless jerk of a speed profile: -ln(T^3 / v_peak^2 * int j^2 dt)
    with jerk from two central differences (more negative is jerkier)."""
    speed = np.asarray(speed, dtype=float)
    if speed.size < 5:
        raise SeriesTooShort(f"LDLJ needs >= 5 samples, got {speed.size}")
    if fs <= 0.0:
        raise ValueError("fs must be positive")
    v_peak = float(np.max(np.abs(speed)))
    if v_peak == 0.0:
        raise ZeroPeakSpeed("LDLJ is undefined for an identically zero signal")
    dt = 1.0 / fs
    jerk = _central_diff(_central_diff(speed, dt), dt)
    # duration = actual time span; an N*dt convention breaks dimensionless
    # scale invariance by one sample period
    duration = (speed.size - 1) * dt
    jerk_cost = float(np.sum(jerk**2) * dt)
    return float(-np.log(duration**3 / v_peak**2 * jerk_cost))


def smoothness(
    speed: np.ndarray, fs: float, params: SparcParams = SparcParams()
) -> SmoothnessResult:
    return SmoothnessResult(sparc=sparc(speed, fs, params), ldlj=ldlj(speed, fs), sample_rate_hz=fs)


def episode_smoothness(
    episode: EpisodeRecord, target_hz: float = 5.0, params: SparcParams = SparcParams()
) -> SmoothnessResult:
    """Tip-speed smoothness of an episode, downsampled to the conventional
    analysis rate first."""
    times, speeds = tip_speed_series(episode)
    _, resampled = downsample(times, speeds, target_hz)
    return smoothness(resampled, target_hz, params)


REPORT_TABLE_COLUMNS = (
    "episode",
    "rows",
    "duration_s",
    "fs_hz",
    "dev_mean_mm",
    "dev_max_mm",
    "dev_median_mm",
    "sparc",
    "ldlj",
)


def format_report(
    name: str,
    episode: EpisodeRecord,
    dev: DeviationStats,
    smooth: SmoothnessResult,
    params: SparcParams,
) -> str:
    """One human-readable metrics block per episode."""
    return "\n".join(
        (
            f"episode: {name}",
            f"  rows: {len(episode.rows)}  duration_s: {episode.duration:.3f}",
            f"  rcm_deviation_mm: mean={dev.mean_mm:.6f} max={dev.max_mm:.6f} "
            f"median={dev.median_mm:.6f}",
            f"  sparc: {smooth.sparc:.4f}  (fs={smooth.sample_rate_hz:g} Hz, "
            f"cutoff={params.cutoff_hz:g} Hz, amp_th={params.amp_threshold:g}, "
            f"padlevel={params.padding_level})",
            f"  ldlj: {smooth.ldlj:.4f}",
        )
    )


def report_table_row(
    name: str, episode: EpisodeRecord, dev: DeviationStats, smooth: SmoothnessResult
) -> tuple:
    return (
        name,
        len(episode.rows),
        episode.duration,
        smooth.sample_rate_hz,
        dev.mean_mm,
        dev.max_mm,
        dev.median_mm,
        smooth.sparc,
        smooth.ldlj,
    )
