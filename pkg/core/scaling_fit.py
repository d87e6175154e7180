"""
Scaling fit - blow-up time from the last sub-critical scaling function

    s(t) = K (T - t) exp(-sqrt(-ln(T - t) + b)),   K = 1.04 / e (frozen)

Only T and b are fitted. T is reparametrised as t_hi + exp(tau) so the
optimizer can never place the blow-up inside the fit window.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .constants import (
    NUMERICS, REFERENCE, DomainError, FitNonConvergence, FitWindowError,
)
from .diagnostics import ScalingSeries
from .snapshot import atomic_write

logger = logging.getLogger("wavemap.scaling_fit")

# smallest square-root argument evaluated while the optimizer wanders
_ARG_FLOOR = 1e-14


@dataclass(frozen=True)
class FitResult:
    T: float
    b: float
    residual: float
    window: tuple[float, float]
    samples: int = 0
    evaluations: int = 0

    def __post_init__(self):
        if self.residual < 0.0:
            raise DomainError(f"residual must be non-negative, got {self.residual}")

    def write(self, path: Path) -> None:
        """key = value report, written atomically."""
        path = Path(path)
        lines = [
            f"T = {self.T:.17g}",
            f"b = {self.b:.17g}",
            f"residual = {self.residual:.17g}",
            f"t_lo = {self.window[0]:.17g}",
            f"t_hi = {self.window[1]:.17g}",
            f"samples = {self.samples}",
            f"evaluations = {self.evaluations}",
        ]
        atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def read(cls, path: Path) -> "FitResult":
        values: dict[str, str] = {}
        for line in Path(path).read_text().splitlines():
            if "=" not in line or line.lstrip().startswith("#"):
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        return cls(
            T=float(values["T"]),
            b=float(values["b"]),
            residual=float(values["residual"]),
            window=(float(values["t_lo"]), float(values["t_hi"])),
            samples=int(values.get("samples", 0)),
            evaluations=int(values.get("evaluations", 0)),
        )


REFERENCE_FIT = FitResult(
    T=REFERENCE.FIT_T,
    b=REFERENCE.FIT_B,
    residual=REFERENCE.FIT_RESIDUAL,
    window=REFERENCE.FIT_WINDOW,
)
ALTERNATE_BLOWUP_TIME = REFERENCE.FIT_T_ALTERNATE


# ============================================================
# MODEL
# ============================================================

def model_s(t: float, T: float, b: float) -> float:
    """The scaling law; DomainError off its branch (t >= T or negative root argument)."""
    d = T - t
    if d <= 0.0:
        raise DomainError(f"model_s needs t < T, got t={t}, T={T}")
    arg = -math.log(d) + b
    if arg < 0.0:
        raise DomainError(f"model_s square-root argument is negative ({arg:.6g}) at t={t}")
    return NUMERICS.SCALING_PREFACTOR * d * math.exp(-math.sqrt(arg))


def _model_and_jacobian(t: np.ndarray, T: float, b: float):
    d = T - t
    root = np.sqrt(np.maximum(-np.log(d) + b, _ARG_FLOOR))
    decay = NUMERICS.SCALING_PREFACTOR * np.exp(-root)
    value = decay * d
    d_dT = decay * (1.0 + 1.0 / (2.0 * root))
    d_db = -value / (2.0 * root)
    return value, d_dT, d_db


def synthetic_series(T: float, b: float, times: Sequence[float]) -> ScalingSeries:
    """Noise-free series sampled from the model."""
    series = ScalingSeries()
    for t in times:
        series.append(t, model_s(t, T, b))
    return series


# ============================================================
# WINDOW AND INITIAL GUESS
# ============================================================

def default_window(series: ScalingSeries, fraction: float = NUMERICS.FIT_WINDOW_FRACTION) -> tuple[float, float]:
    """Last `fraction` of the decreasing branch (series start up to the minimum of s)."""
    if len(series) < NUMERICS.FIT_MIN_SAMPLES:
        raise FitWindowError(f"series has {len(series)} samples, need {NUMERICS.FIT_MIN_SAMPLES}")
    t_start = series.times[0]
    t_bottom, _ = series.minimum()
    t_lo = t_bottom - fraction * (t_bottom - t_start)
    return t_lo, t_bottom


def initial_guess(series: ScalingSeries, window: tuple[float, float]) -> tuple[float, float]:
    """T0 = t_hi + 2 s(t_hi), b0 = 0."""
    t, s = series.window(*window)
    if len(t) == 0:
        raise FitWindowError(f"no samples in window {window}")
    return window[1] + 2.0 * float(s[-1]), 0.0


# ============================================================
# FIT
# ============================================================

def fit_scaling(
    series: ScalingSeries,
    window: tuple[float, float],
    init: Optional[tuple[float, float]] = None,
    max_iterations: int = NUMERICS.FIT_MAX_ITERATIONS,
    residual_ceiling: float = NUMERICS.FIT_RESIDUAL_CEILING,
) -> FitResult:
    """
    Levenberg-Marquardt fit of (T, b) over `window`.

    Raises FitWindowError on a bad window or initial T, FitNonConvergence when
    the optimizer gives up or the residual exceeds `residual_ceiling`.
    """
    t_lo, t_hi = window
    if len(series) == 0 or t_lo < series.times[0] or t_hi > series.times[-1] or t_lo >= t_hi:
        span = (series.times[0], series.times[-1]) if len(series) else None
        raise FitWindowError(f"window [{t_lo}, {t_hi}] is not inside the series range {span}")
    t, s = series.window(t_lo, t_hi)
    if len(t) < NUMERICS.FIT_MIN_SAMPLES:
        raise FitWindowError(
            f"window [{t_lo}, {t_hi}] holds {len(t)} samples, need {NUMERICS.FIT_MIN_SAMPLES}"
        )

    T0, b0 = init if init is not None else initial_guess(series, window)
    if T0 <= t_hi:
        raise FitWindowError(f"initial blow-up time {T0} must exceed the window end {t_hi}")

    def residuals(x):
        value, _, _ = _model_and_jacobian(t, t_hi + math.exp(x[0]), x[1])
        return value - s

    def jacobian(x):
        offset = math.exp(x[0])
        _, d_dT, d_db = _model_and_jacobian(t, t_hi + offset, x[1])
        return np.column_stack([d_dT * offset, d_db])

    x0 = np.array([math.log(T0 - t_hi), b0])
    result = least_squares(
        residuals, x0, jac=jacobian, method="lm",
        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_iterations,
    )
    T = t_hi + math.exp(result.x[0])
    b = float(result.x[1])
    residual = float(np.sum(result.fun ** 2))

    if result.status <= 0 or not np.isfinite(residual):
        raise FitNonConvergence(
            f"Levenberg-Marquardt did not converge after {result.nfev} evaluations: {result.message}"
        )
    if residual > residual_ceiling:
        raise FitNonConvergence(f"fit residual {residual:.3e} exceeds ceiling {residual_ceiling:.3e}")
    if -math.log(T - t_lo) + b < 0.0:
        raise FitNonConvergence(f"fitted (T={T}, b={b}) leaves the model branch inside the window")

    logger.info(
        f"Scaling fit on [{t_lo}, {t_hi}] ({len(t)} samples): "
        f"T={T:.10f} b={b:.8f} residual={residual:.6e} ({result.nfev} evaluations)"
    )
    return FitResult(T=T, b=b, residual=residual, window=(t_lo, t_hi),
                     samples=len(t), evaluations=int(result.nfev))
