"""
Run configuration - INI text validated into frozen pydantic models

    [grid]          n
    [time]          dt | dt_over_h, t_end
    [initial_data]  A, B, r1, r2, sigma0, k
    [rattle]        projection_tol, max_projection_iters
    [diagnostics]   cadence, local_radius, slice_times, flip_threshold, flip_guard
    [output]        checkpoint_interval
    [fit]           t_lo, t_hi, residual_ceiling    (optional)
    [search]        A_lo, A_hi, tol_A, max_runs, t_end_cap, dispersal_fraction  (optional)

The config hash (SHA-256 over the canonical JSON dump) is stamped into every
artifact so a run directory can always be traced back to its configuration.
"""

import configparser
import hashlib
import json
import logging
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .constants import NUMERICS, REFERENCE, ConfigError, DomainError
from .grid import Grid
from .initial_data import InitialDataParams
from .rattle import RattleConfig

logger = logging.getLogger("wavemap.config")


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class GridSection(_Section):
    n: int = Field(..., ge=NUMERICS.MIN_POINTS_PER_AXIS)


class TimeSection(_Section):
    t_end: float = Field(..., gt=0)
    dt: Optional[float] = Field(None, gt=0)
    dt_over_h: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_step_rule(self):
        if self.dt is not None and self.dt_over_h is not None:
            raise ValueError("give either dt or dt_over_h, not both")
        return self

    def resolve_dt(self, grid: Grid) -> float:
        if self.dt is not None:
            return self.dt
        return (self.dt_over_h or NUMERICS.DT_OVER_H) * grid.h


class InitialDataSection(_Section):
    A: float = Field(..., ge=0)
    B: float = Field(REFERENCE.DEVIATION_B, gt=0, le=1)
    r1: float = Field(NUMERICS.RING_INNER, gt=0)
    r2: float = Field(NUMERICS.RING_OUTER, le=1)
    sigma0: float = Field(NUMERICS.SIGMA0, gt=0)
    k: int = Field(NUMERICS.HOMOTOPY_INDEX, ge=1, le=1)

    def to_params(self) -> InitialDataParams:
        return InitialDataParams(A=self.A, B=self.B, r1=self.r1, r2=self.r2,
                                 sigma0=self.sigma0, k=self.k)


class RattleSection(_Section):
    projection_tol: float = Field(NUMERICS.PROJECTION_TOL, gt=0)
    max_projection_iters: int = Field(NUMERICS.MAX_PROJECTION_ITERS, ge=1)


class DiagnosticsSection(_Section):
    cadence: int = Field(NUMERICS.CADENCE_STEPS, ge=1)
    local_radius: float = Field(NUMERICS.LOCAL_RADIUS, gt=0, le=1)
    slice_times: tuple[float, ...] = ()
    flip_threshold: float = NUMERICS.FLIP_THRESHOLD
    flip_guard: float = NUMERICS.FLIP_GUARD

    @field_validator("slice_times", mode="before")
    @classmethod
    def _split_times(cls, value):
        if isinstance(value, str):
            return tuple(float(part) for part in value.replace(",", " ").split())
        return value

    @field_validator("slice_times")
    @classmethod
    def _sorted_times(cls, value):
        return tuple(sorted(value))


class OutputSection(_Section):
    checkpoint_interval: int = Field(0, ge=0)     # steps; 0 = final snapshot only


class FitSection(_Section):
    t_lo: float
    t_hi: float
    residual_ceiling: float = Field(NUMERICS.FIT_RESIDUAL_CEILING, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.t_lo < self.t_hi:
            raise ValueError(f"fit window needs t_lo < t_hi, got [{self.t_lo}, {self.t_hi}]")
        return self


class SearchSection(_Section):
    A_lo: float = Field(..., ge=0)
    A_hi: float
    tol_A: float = Field(NUMERICS.SEARCH_TOL_A, gt=0)
    max_runs: int = Field(NUMERICS.SEARCH_MAX_RUNS, ge=2)
    t_end_cap: float = Field(NUMERICS.SEARCH_T_END_CAP, gt=0)
    dispersal_fraction: float = Field(NUMERICS.DISPERSAL_FRACTION, gt=0, lt=1)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.A_lo < self.A_hi:
            raise ValueError(f"search bracket needs A_lo < A_hi, got [{self.A_lo}, {self.A_hi}]")
        return self


class RunConfig(_Section):
    grid: GridSection
    time: TimeSection
    initial_data: InitialDataSection
    rattle: RattleSection = RattleSection()
    diagnostics: DiagnosticsSection = DiagnosticsSection()
    output: OutputSection = OutputSection()
    fit: Optional[FitSection] = None
    search: Optional[SearchSection] = None

    # --- derived objects ---

    def make_grid(self) -> Grid:
        return Grid(self.grid.n)

    def rattle_config(self) -> RattleConfig:
        return RattleConfig(
            dt=self.time.resolve_dt(self.make_grid()),
            projection_tol=self.rattle.projection_tol,
            max_projection_iters=self.rattle.max_projection_iters,
        )

    def initial_params(self) -> InitialDataParams:
        return self.initial_data.to_params()

    # --- provenance ---

    def config_hash(self) -> bytes:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).digest()

    def hash_hex(self) -> str:
        return self.config_hash().hex()

    # --- variants ---

    def with_amplitude(self, A: float) -> "RunConfig":
        return self.model_copy(update={"initial_data": self.initial_data.model_copy(update={"A": A})})

    def with_t_end(self, t_end: float) -> "RunConfig":
        return self.model_copy(update={"time": self.time.model_copy(update={"t_end": t_end})})

    def to_ini(self) -> str:
        """Serialise back to the INI layout load_config reads."""
        lines = []
        for name, section in self.model_dump().items():
            if section is None:
                continue
            lines.append(f"[{name}]")
            lines.extend(
                f"{key} = {_format_value(value)}" for key, value in section.items() if value is not None
            )
            lines.append("")
        return "\n".join(lines)


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, (tuple, list)):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


# ============================================================
# LOADING
# ============================================================

def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e

    raw = {name: dict(parser[name]) for name in parser.sections()}
    try:
        config = RunConfig.model_validate(raw)
        # geometry checks that need the grid
        params = config.initial_params()
        grid = config.make_grid()
        if params.r1 <= 2.0 * grid.h:
            raise DomainError(f"inner ring radius r1={params.r1} must exceed 2h={2.0 * grid.h:.6g}")
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()))
        raise ConfigError(f"{source}: invalid [{where}]: {first.get('msg')}") from e
    except DomainError as e:
        raise ConfigError(f"{source}: {e}") from e
    return config


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    config = parse_config_text(text, source=str(path))
    logger.info(f"Loaded config {path} (hash {config.hash_hex()[:12]})")
    return config


# ============================================================
# PROCESS SETTINGS
# ============================================================

class RuntimeSettings(BaseSettings):
    """Process-level knobs from the environment (WAVEMAP_*) or .env."""
    model_config = SettingsConfigDict(env_prefix="WAVEMAP_", extra="ignore")

    log_level: str = "INFO"
    log_format: Literal["text", "json"] = "text"
    runs_root: Path = Path("runs")
