"""rcmctl: remote-center-of-motion instrument control toolkit.

Closed-form twist solver for trocar-constrained motion, quintic velocity
profiling, a rigid kinematic simulator, episode recording, smoothness and
constraint metrics, and a networked control server with teleop clients.
"""
from .errors import (
    AllZeroSignal,
    CommandLimitExceeded,
    ConfigError,
    DurationCapReached,
    EmptyEpisode,
    InsertionTooShallow,
    MalformedRow,
    ModeSwitchWhileMoving,
    NonMonotoneTime,
    RateTooLow,
    RcmError,
    SchemaMismatch,
    ScriptError,
    SeriesTooShort,
    ZeroPeakSpeed,
)
from .geometry import (
    Pose,
    Rotation,
    Twist,
    Vec3,
    compose,
    cross,
    inverse,
    point_to_line_distance,
    rotate,
)
from .profiler import DofState, ProfilerLimits, ProfilerSegment, retarget, sample
from .solver import (
    CartesianTipCommand,
    InstrumentState,
    RcmConfig,
    ShaftCalibration,
    SphericalCommand,
    reconstruct_state,
    remap_camera_command,
    shaft_line,
    solve_cartesian_tip,
    solve_spherical,
    trocar_point_velocity,
)
from .simulator import (
    CommandScript,
    ControlLoop,
    Perturbation,
    ScriptEntry,
    SimConfig,
    SimState,
    initial_state,
    run_episode,
    step,
)
from .episode import EpisodeHeader, EpisodeRecord, EpisodeRow, read_csv, write_csv
from .metrics import (
    DeviationStats,
    SmoothnessResult,
    SparcParams,
    downsample,
    episode_smoothness,
    ldlj,
    rcm_deviation_series,
    smoothness,
    sparc,
    tip_speed_series,
)
from .config import AppConfig, ServerConfig, default_config, load_config, load_script

__version__ = "0.1.0"
