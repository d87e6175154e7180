"""
Series files - plot-ready CSV with provenance header

    # config_hash=<hex>
    t [time],w_origin [1],...
    0,1,...

Floats carry 17 significant digits, missing values are empty fields. Rows are
flushed as they are written so a killed run keeps everything up to the kill.
"""

import csv
import logging
from pathlib import Path
from typing import IO, Optional, Sequence

import numpy as np

from .constants import ScalingMethod
from .diagnostics import ScalingSeries

logger = logging.getLogger("wavemap.series")

ORIGIN_COLUMNS = (
    "t [time]", "w_origin [1]", "trace_H [1/length^2]", "det_H [1/length^4]",
    "s_gauss [length]", "s_mean [length]",
)
ENERGY_COLUMNS = (
    "t [time]", "E_kin [energy]", "E_pot [energy]", "E_tot [energy]",
    "E_kin_local [energy]", "E_pot_local [energy]", "E_tot_local [energy]",
)
CONSTRAINT_COLUMNS = (
    "t [time]", "lambda_max [1/time^2]", "projection_iters [1]",
    "constraint_max [1]", "tangency_max [1/time]",
)
MINIMA_COLUMNS = ("t [time]", "w_min_x_axis [1]", "w_min_diagonal [1]")
SLICE_COLUMNS = ("r [length]", "w [1]")
RESCALED_COLUMNS = ("r [length]", "w_rescaled [1]", "w_static [1]")
TRACE_COLUMNS = ("A [1]", "outcome [-]", "t_end [time]", "flip_time [time]",
                 "hover_duration [time]", "A_lo [1]", "A_hi [1]")


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if not np.isfinite(value):
        return ""
    return f"{value:.17g}"


def column_name(header: str) -> str:
    """'t [time]' -> 't'."""
    return header.split("[", 1)[0].strip()


class SeriesWriter:
    """
    Append-only CSV writer.

    With `keep_until` set and an existing file carrying the same config hash,
    rows whose first column is <= keep_until are preserved and the rest
    dropped (restart from a checkpoint).
    """

    def __init__(self, path: Path, columns: Sequence[str], config_hex: str,
                 keep_until: Optional[float] = None):
        self.path = Path(path)
        self.columns = tuple(columns)
        self.rows_written = 0
        kept = self._kept_rows(config_hex, keep_until) if keep_until is not None else []

        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file: IO[str] = open(self.path, "w", newline="")
        self._file.write(f"# config_hash={config_hex}\n")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(self.columns)
        for row in kept:
            self._writer.writerow(row)
            self.rows_written += 1
        self._file.flush()

    def _kept_rows(self, config_hex: str, keep_until: float) -> list[list[str]]:
        if not self.path.exists():
            return []
        with open(self.path, newline="") as f:
            first = f.readline().strip()
            if first != f"# config_hash={config_hex}":
                logger.warning(f"{self.path}: config hash differs, previous rows discarded")
                return []
            reader = csv.reader(f)
            next(reader, None)
            return [row for row in reader if row and float(row[0]) <= keep_until]

    def write(self, *values) -> None:
        self._writer.writerow([format_value(v) for v in values])
        self._file.flush()
        self.rows_written += 1

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "SeriesWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_table(path: Path, columns: Sequence[str], rows, config_hex: str) -> None:
    with SeriesWriter(path, columns, config_hex) as writer:
        for row in rows:
            writer.write(*row)


def read_series(path: Path) -> tuple[str, list[str], dict[str, np.ndarray]]:
    """
    Returns (config hash hex, column names, columns as float arrays).

    Empty fields become NaN; non-numeric columns are returned as object arrays.
    """
    with open(path, newline="") as f:
        first = f.readline().strip()
        config_hex = first.split("=", 1)[1] if first.startswith("# config_hash=") else ""
        reader = csv.reader(f)
        header = next(reader)
        rows = [row for row in reader if row]
    names = [column_name(h) for h in header]
    columns: dict[str, np.ndarray] = {}
    for k, name in enumerate(names):
        raw = [row[k] for row in rows]
        try:
            columns[name] = np.array([float(v) if v != "" else np.nan for v in raw])
        except ValueError:
            columns[name] = np.array(raw, dtype=object)
    return config_hex, names, columns


def load_scaling_series(path: Path, method: ScalingMethod = ScalingMethod.GAUSS_CURVATURE) -> ScalingSeries:
    """ScalingSeries from an origin CSV, or from any two-column (t, s) CSV."""
    _, names, columns = read_series(path)
    wanted = "s_gauss" if method is ScalingMethod.GAUSS_CURVATURE else "s_mean"
    s_name = wanted if wanted in columns else names[1]
    series = ScalingSeries(method=method)
    for t, s in zip(columns[names[0]], columns[s_name]):
        if np.isfinite(s):
            series.append(float(t), float(s))
    logger.info(f"Loaded {len(series)} scaling samples ({s_name}) from {path}")
    return series
