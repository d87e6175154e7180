"""
wavemap constants - Layer 0

Numerical defaults, classification enums and the exception hierarchy shared by
every module. Nothing in here depends on numpy so it can be imported by the
CLI bootstrap before the heavy modules load.

Designed for: constrained lattice evolution of the 2+1 wave map into S²
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Final


# ============================================================
# EXCEPTIONS
# ============================================================

class WaveMapError(Exception):
    """Base class for every error raised by the wavemap library."""
    pass


class GridError(WaveMapError, ValueError):
    """Grid too small for the stencils, or field shape/parity mismatch."""
    pass


class DomainError(WaveMapError, ValueError):
    """Argument outside the mathematical domain of an operation."""
    pass


class ProjectionFailure(WaveMapError):
    """
    The RATTLE position stage found no admissible multiplier at some grid points.

    Near blow-up this is a physical signal (the solution is being forced onto
    the sphere under extreme gradients), so the evolution driver records it as
    a run outcome instead of crashing.
    """

    def __init__(self, message: str, report=None, failed_points: int = 0):
        super().__init__(message)
        self.report = report
        self.failed_points = failed_points


class FitNonConvergence(WaveMapError):
    """Levenberg-Marquardt stopped without convergence or above the residual ceiling."""
    pass


class FitWindowError(WaveMapError, ValueError):
    """Fit window outside the series, too few samples, or initial T inside the window."""
    pass


class BracketInvalid(WaveMapError):
    """Bisection endpoints do not straddle the dispersal/blow-up threshold."""
    pass


class BudgetExhausted(WaveMapError):
    """Bisection needed more evolution runs than the configured budget."""
    pass


class ConfigError(WaveMapError):
    """Run configuration file unreadable or invalid."""
    pass


class SnapshotError(WaveMapError):
    """Snapshot file with bad magic, unsupported version or truncated payload."""
    pass


# ============================================================
# CLASSIFICATION ENUMS
# ============================================================

class Pole(Enum):
    """Sign of w_S in the static solution: NORTH has w(0,0) = +1."""
    NORTH = "north"
    SOUTH = "south"

    @property
    def sign(self) -> float:
        return 1.0 if self is Pole.NORTH else -1.0


class SliceDirection(Enum):
    X_AXIS = "x_axis"
    DIAGONAL = "diagonal"


class ScalingMethod(Enum):
    """How s(t) is read off the Hessian of w at the origin."""
    GAUSS_CURVATURE = "gauss_curvature"   # det H = 16 / s^4
    MEAN_CURVATURE = "mean_curvature"     # tr H = -8 / s^2


class RunOutcome(Enum):
    """Terminal classification of a single evolution."""
    DISPERSED_TRIVIAL = "dispersed-trivial"
    DISPERSED = "dispersed"
    FLIPPED = "flipped"
    PROJECTION_FAILURE = "projection-failure"
    INCONCLUSIVE = "inconclusive"
    FAILED = "failed"


class SearchOutcome(Enum):
    """Outcome of one bisection probe."""
    DISPERSED = "dispersed"
    FLIPPED = "flipped"
    INCONCLUSIVE = "inconclusive"


SLICE_DIRECTION_MAP = {d.value: d for d in SliceDirection}
SLICE_DIRECTION_MAP.update({"x": SliceDirection.X_AXIS, "diag": SliceDirection.DIAGONAL})
SCALING_METHOD_MAP = {m.value: m for m in ScalingMethod}
SCALING_METHOD_MAP.update({"gauss": ScalingMethod.GAUSS_CURVATURE,
                           "mean": ScalingMethod.MEAN_CURVATURE})


# ============================================================
# NUMERICAL DEFAULTS
# ============================================================

@dataclass(frozen=True)
class NumericalDefaults:
    """Frozen dataclass = one place for every tunable default."""

    # --- GRID ---
    MIN_POINTS_PER_AXIS: Final[int] = 9                 # two ghost layers never overlap

    # --- TIME STEPPING ---
    DT_OVER_H: Final[float] = 0.25                      # CFL-safe for unit wave speed
    PROJECTION_TOL: Final[float] = 1e-12
    MAX_PROJECTION_ITERS: Final[int] = 50
    MARGINAL_DISCRIMINANT: Final[float] = 1e-10         # relative to B^2; below -> Newton from 0

    # --- INITIAL DATA (geometry is not stated with the reference runs) ---
    RING_INNER: Final[float] = 0.07
    RING_OUTER: Final[float] = 0.57
    SIGMA0: Final[float] = math.pi / 8
    HOMOTOPY_INDEX: Final[int] = 1

    # --- DIAGNOSTICS ---
    CADENCE_STEPS: Final[int] = 8
    LOCAL_RADIUS: Final[float] = 0.25
    FLIP_THRESHOLD: Final[float] = 0.0
    FLIP_GUARD: Final[float] = 0.5                      # w(0,0) must have been above this
    ORIGIN_POLE_TOL: Final[float] = 0.5                 # s(t) recorded only while |w(0,0) - 1| < tol
    STATIC_ENERGY: Final[float] = 4.0 * math.pi

    # --- SCALING FIT ---
    SCALING_PREFACTOR: Final[float] = 1.04 / math.e     # frozen, never fitted
    FIT_MAX_ITERATIONS: Final[int] = 200
    FIT_RESIDUAL_CEILING: Final[float] = 1e-3
    FIT_MIN_SAMPLES: Final[int] = 8
    FIT_WINDOW_FRACTION: Final[float] = 0.2             # last 20% of the decreasing branch

    # --- CRITICAL SEARCH ---
    SEARCH_TOL_A: Final[float] = 1e-8
    SEARCH_MAX_RUNS: Final[int] = 64
    SEARCH_T_END: Final[float] = 1.5
    SEARCH_T_END_CAP: Final[float] = 6.0
    DISPERSAL_FRACTION: Final[float] = 0.1              # local E_pot must fall below 10% of peak
    HOVER_BAND: Final[float] = 0.05                     # s within 5% of its minimum


NUMERICS = NumericalDefaults()


# Reference values reported for the B = 0.8, N = 1281 runs.
@dataclass(frozen=True)
class ReferenceValues:
    CRITICAL_AMPLITUDE: Final[float] = 0.87150780
    LAST_SUBCRITICAL_AMPLITUDE: Final[float] = 0.87150779
    DEVIATION_B: Final[float] = 0.8
    RESOLUTION_N: Final[int] = 1281
    FIT_T: Final[float] = 0.93485135
    FIT_T_ALTERNATE: Final[float] = 0.94094524        # second published value for the same run
    FIT_B: Final[float] = -2.1435346
    FIT_RESIDUAL: Final[float] = 8.0327838e-9
    FIT_WINDOW: Final[tuple] = (0.865, 0.8816)
    T_MIN_X: Final[float] = 0.9296875
    T_MIN_DIAG: Final[float] = 0.929375
    W_MIN_X: Final[float] = -0.94862286
    W_MIN_DIAG: Final[float] = -0.94867828
    W0_MIN_X: Final[float] = 0.76663899
    W0_MIN_DIAG: Final[float] = 0.64367501


REFERENCE = ReferenceValues()
