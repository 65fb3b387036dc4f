"""Command-line entry point: offline simulation, metric reports, serving.

Exit codes: 0 success, 1 usage error, 2 validation error (bad config,
script, or episode file; degenerate metric input), 3 runtime error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import episode as episode_io
from .config import AppConfig, default_config, load_config, load_script
from .errors import (
    AllZeroSignal,
    ConfigError,
    EmptyEpisode,
    MalformedRow,
    NonMonotoneTime,
    RateTooLow,
    RcmError,
    SchemaMismatch,
    ScriptError,
    SeriesTooShort,
    ZeroPeakSpeed,
)
from .metrics import (
    REPORT_TABLE_COLUMNS,
    SparcParams,
    downsample,
    format_report,
    rcm_deviation_series,
    report_table_row,
    smoothness,
    tip_speed_series,
)
from .simulator import run_episode

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

_VALIDATION_ERRORS = (
    ConfigError,
    ScriptError,
    SchemaMismatch,
    MalformedRow,
    NonMonotoneTime,
    EmptyEpisode,
    SeriesTooShort,
    RateTooLow,
    AllZeroSignal,
    ZeroPeakSpeed,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_app_config(args) -> AppConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "dt", None):
        cfg = replace(cfg, sim=replace(cfg.sim, dt=args.dt))
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_app_config(args)
    script = load_script(args.script)
    record = run_episode(script, cfg.sim, cfg.limits, cfg.start_flange, cfg.config_hash)
    episode_io.write_csv(record, args.out)
    print(f"wrote {len(record.rows)} rows to {args.out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    cfg = _load_app_config(args)
    params = SparcParams()
    table_rows = []
    for path in args.episodes:
        record = episode_io.read_csv(path)
        dev = rcm_deviation_series(record, cfg.rcm.p_rcm, record.header.calib)
        times, speeds = tip_speed_series(record)
        _, resampled = downsample(times, speeds, args.fs)
        smooth = smoothness(resampled, args.fs, params)
        print(format_report(str(path), record, dev, smooth, params))
        if args.raw_rate_metrics:
            raw_fs = 1.0 / record.header.dt
            raw = smoothness(speeds, raw_fs, params)
            print(f"  raw-rate sparc: {raw.sparc:.4f}  ldlj: {raw.ldlj:.4f}  (fs={raw_fs:g} Hz)")
        table_rows.append(report_table_row(str(path), record, dev, smooth))
        if args.series:
            series_path = Path(args.series)
            lines = ["time_s,deviation_mm"]
            lines += [f"{float(t)!r},{float(d)!r}" for t, d in zip(dev.times_s, dev.series_mm)]
            series_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            print(f"  wrote deviation series to {series_path}")
    if args.out:
        out = Path(args.out)
        lines = [",".join(REPORT_TABLE_COLUMNS)]
        lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in row) for row in table_rows]
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote metrics table to {out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from dataclasses import replace as _replace

    from .server import serve_forever

    cfg = _load_app_config(args)
    server_cfg = cfg.server
    if args.tcp_port is not None:
        server_cfg = _replace(server_cfg, tcp_port=args.tcp_port)
    if args.ws_port is not None:
        server_cfg = _replace(server_cfg, ws_port=args.ws_port)
    if args.test_mode:
        server_cfg = _replace(server_cfg, test_mode=True)
    cfg = replace(cfg, server=server_cfg)
    serve_forever(cfg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcmctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scripted offline episode and write CSV")
    p_sim.add_argument("--script", required=True, help="command script (YAML)")
    p_sim.add_argument("--config", help="configuration file (YAML)")
    p_sim.add_argument("--dt", type=float, help="override control period (s)")
    p_sim.add_argument("--out", required=True, help="output episode CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    p_met = sub.add_parser("metrics", help="compute deviation and smoothness metrics")
    p_met.add_argument("episodes", nargs="+", help="episode CSV file(s)")
    p_met.add_argument("--config", help="configuration file (YAML)")
    p_met.add_argument("--fs", type=float, default=5.0, help="smoothness analysis rate, Hz (default 5)")
    p_met.add_argument("--raw-rate-metrics", action="store_true", help="also report smoothness at the raw control rate")
    p_met.add_argument("--out", help="write machine-readable metrics table (CSV)")
    p_met.add_argument("--series", help="write per-tick deviation series (CSV)")
    p_met.set_defaults(func=cmd_metrics)

    p_srv = sub.add_parser("serve", help="start the control server")
    p_srv.add_argument("--config", help="configuration file (YAML)")
    p_srv.add_argument("--dt", type=float, help="override control period (s)")
    p_srv.add_argument("--tcp-port", type=int, help="NDJSON TCP port (0 = ephemeral)")
    p_srv.add_argument("--ws-port", type=int, help="WebSocket port (0 = ephemeral)")
    p_srv.add_argument("--test-mode", action="store_true", help="tick-driven simulated time (deterministic)")
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RcmError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
