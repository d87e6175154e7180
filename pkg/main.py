"""
wavemap - command-line entry point

Evolves the wave map into S^2 on the lattice and runs the blow-up analysis.
One file to see how configuration, runs and analysis connect.

Usage:
    python main.py evolve    --config run.ini --out runs/a
    python main.py evolve    --config run.ini --out runs/a --resume runs/a/snapshots/step_00000800.wmap
    python main.py fit       --series runs/a/origin.csv --window 0.865:0.8816 --out runs/a/fit.txt
    python main.py fit       --series runs/a/origin.csv --config run.ini [--ceiling 1e-6]
    python main.py search    --config search.ini --out runs/search [--resume] [--self-test]
    python main.py slice     --snapshot runs/a/snapshots/final.wmap --direction diag [--rescale 0.05]
    python main.py info      --snapshot runs/a/snapshots/final.wmap
    python main.py calibrate --config run.ini
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np
from dotenv import load_dotenv

# ============================================================
# BOOTSTRAP
# ============================================================

load_dotenv(override=False)  # exported env vars take precedence over .env

from core.config import RuntimeSettings, load_config
from core.constants import (
    NUMERICS, SCALING_METHOD_MAP, SLICE_DIRECTION_MAP, SearchOutcome, WaveMapError,
)
from core.critical_search import CriticalSearch, SearchConfig, bisect, synthetic_classifier
from core.diagnostics import extract_slice, rescaled_profile
from core.dynamics import rescaled_static_w
from core.evolution import Evolution, current_run
from core.grid import Grid
from core.initial_data import calibrate_geometry
from core.scaling_fit import default_window, fit_scaling
from core.series import RESCALED_COLUMNS, SLICE_COLUMNS, format_value, load_scaling_series
from core.snapshot import read_header, read_snapshot

logger = logging.getLogger("wavemap.main")

LOG_FORMAT = "%(asctime)s [%(name)s] [%(run)s] %(levelname)s: %(message)s"


class _RunTagFilter(logging.Filter):
    """Stamp every record with the short config hash of the run in progress."""

    def filter(self, record: logging.LogRecord) -> bool:  # type: ignore[override]
        record.run = current_run.get()
        return True


def setup_logging(settings: RuntimeSettings) -> None:
    level = getattr(logging, settings.log_level.upper(), logging.INFO)
    handler = logging.StreamHandler(sys.stderr)
    if settings.log_format == "json":
        from pythonjsonlogger import jsonlogger
        handler.setFormatter(jsonlogger.JsonFormatter(
            "%(asctime)s %(name)s %(levelname)s %(run)s %(message)s"
        ))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
    handler.addFilter(_RunTagFilter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


# ============================================================
# SUBCOMMANDS
# ============================================================

def cmd_evolve(args, settings: RuntimeSettings) -> int:
    config = load_config(args.config)
    out = Path(args.out) if args.out else settings.runs_root / config.hash_hex()[:12]
    summary = Evolution(config, out).run(resume=Path(args.resume) if args.resume else None)
    print(json.dumps({k: summary[k] for k in ("outcome", "t_final", "steps", "config_hash")}, sort_keys=True))
    return 0


def _parse_window(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise WaveMapError(f"window must look like t_lo:t_hi, got '{text}'")
    return float(lo), float(hi)


def _parse_pair(text: str) -> tuple[float, float]:
    a, sep, b = text.partition(",")
    if not sep:
        raise WaveMapError(f"initial guess must look like T0,b0, got '{text}'")
    return float(a), float(b)


def cmd_fit(args, settings: RuntimeSettings) -> int:
    series = load_scaling_series(Path(args.series), SCALING_METHOD_MAP[args.method])
    fit = load_config(args.config).fit if args.config else None
    if args.window:
        window = _parse_window(args.window)
    elif fit is not None:
        window = (fit.t_lo, fit.t_hi)
    else:
        window = default_window(series)
    if args.ceiling is not None:
        ceiling = args.ceiling
    else:
        ceiling = fit.residual_ceiling if fit is not None else NUMERICS.FIT_RESIDUAL_CEILING
    init = _parse_pair(args.init) if args.init else None
    result = fit_scaling(series, window, init, residual_ceiling=ceiling)
    if args.out:
        result.write(Path(args.out))
    print(f"T = {result.T:.17g}")
    print(f"b = {result.b:.17g}")
    print(f"residual = {result.residual:.17g}")
    return 0


def cmd_search(args, settings: RuntimeSettings) -> int:
    if args.self_test:
        cfg = SearchConfig(A_lo=0.0, A_hi=1.0, tol_A=1e-6, max_runs=32)
        a_star, trace = bisect(cfg, synthetic_classifier(0.5))
        ok = abs(a_star - 0.5) <= cfg.tol_A and len(trace) - 2 <= cfg.bisection_runs() + 1
        print(f"self-test: A*={a_star:.9f} runs={len(trace)} {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1

    if not args.config:
        raise WaveMapError("search needs --config unless --self-test is given")
    config = load_config(args.config)
    out = Path(args.out) if args.out else settings.runs_root / f"search_{config.hash_hex()[:12]}"
    a_star, trace = CriticalSearch(config, out, resume=args.resume).run()
    flipped = sum(1 for r in trace.records if r.outcome is SearchOutcome.FLIPPED)
    print(f"A* = {a_star:.12f}  ({len(trace)} runs, {flipped} flipped)")
    return 0


def _write_rows(columns, rows, out: Optional[str], config_hex: str) -> None:
    stream = open(out, "w") if out else sys.stdout
    try:
        stream.write(f"# config_hash={config_hex}\n")
        stream.write(",".join(columns) + "\n")
        for row in rows:
            stream.write(",".join(format_value(v) for v in row) + "\n")
    finally:
        if out:
            stream.close()


def cmd_slice(args, settings: RuntimeSettings) -> int:
    header, state = read_snapshot(Path(args.snapshot))
    grid = Grid(header.n)
    direction = SLICE_DIRECTION_MAP[args.direction]
    hex_hash = header.config_hash.hex()
    if args.rescale is not None:
        profile = rescaled_profile(state.q.w, grid, args.rescale, direction, time=state.t)
        rows = zip(profile.radii, profile.w_values, rescaled_static_w(profile.radii, 1.0))
        _write_rows(RESCALED_COLUMNS, rows, args.out, hex_hash)
    else:
        profile = extract_slice(state.q.w, grid, direction, state.t)
        _write_rows(SLICE_COLUMNS, zip(profile.radii, profile.w_values), args.out, hex_hash)
    return 0


def cmd_info(args, settings: RuntimeSettings) -> int:
    header = read_header(Path(args.snapshot))
    print(json.dumps(header.as_dict(), sort_keys=True, indent=2))
    return 0


def cmd_calibrate(args, settings: RuntimeSettings) -> int:
    config = load_config(args.config)
    n = config.grid.n
    h = 1.0 / (n - 1)
    r1_values = np.arange(args.r1_min, args.r1_max + 0.5 * h / args.substeps, h / args.substeps)
    widths = np.arange(args.width_min, args.width_max + 0.5 * h / args.substeps, h / args.substeps)
    candidates = calibrate_geometry(config.initial_params(), n, r1_values, widths)
    print("r1,r2,w_min_x,w_min_diag,deviation")
    for c in candidates[: args.top]:
        print(",".join(format_value(v) for v in (c.r1, c.r2, c.w_min_x, c.w_min_diag, c.deviation)))
    return 0


# ============================================================
# ENTRY
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavemap", description="wave map blow-up simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="evolve one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="run directory (default: $WAVEMAP_RUNS_ROOT/<hash>)")
    p.add_argument("--resume", help="snapshot to restart from")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("fit", help="fit the scaling law to an s(t) series")
    p.add_argument("--series", required=True)
    p.add_argument("--window", help="t_lo:t_hi (default: last 20%% of the decreasing branch)")
    p.add_argument("--config", help="take the window and residual ceiling from the [fit] section of a run config")
    p.add_argument("--ceiling", type=float, help="largest accepted sum of squared residuals")
    p.add_argument("--init", help="T0,b0 initial guess")
    p.add_argument("--method", default="gauss", choices=sorted(SCALING_METHOD_MAP))
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("search", help="bisect for the critical amplitude")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--resume", action="store_true", help="reuse finished run directories")
    p.add_argument("--self-test", action="store_true", help="bisect a synthetic threshold at 0.5")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("slice", help="profile of w from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--direction", default="x", choices=sorted(SLICE_DIRECTION_MAP))
    p.add_argument("--rescale", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("info", help="print a snapshot header")
    p.add_argument("--snapshot", required=True)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("calibrate", help="rank ring geometries against the reference w_min(0)")
    p.add_argument("--config", required=True)
    p.add_argument("--r1-min", type=float, default=0.05)
    p.add_argument("--r1-max", type=float, default=0.10)
    p.add_argument("--width-min", type=float, default=0.45)
    p.add_argument("--width-max", type=float, default=0.55)
    p.add_argument("--substeps", type=int, default=4, help="sweep points per grid spacing")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    settings = RuntimeSettings()
    setup_logging(settings)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, settings)
    except (WaveMapError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
