"""
Initial data - ingoing ring bump with a broken-equivariance angular profile

    theta0(r, sigma) = A g(r) h(sigma)   on [r1, r2], 0 elsewhere
    g(r)             = [4 (r - r1)(r2 - r) / (r2 - r1)^2]^4
    h(sigma)         = h0(sigma) on [0, s0], 1 on [s0, pi/2 - s0], h0(pi/2 - sigma) beyond
    h0(sigma)        = B + (1 - B) S(sigma / s0)

S is the degree-9 smoothstep, whose first four derivatives vanish at both
ends, so h is C^4. B = 1 gives equivariant data.

Positions (u, v, w) = (sin th cos sig, sin th sin sig, cos th) lie on the
sphere by construction; velocities are the radial derivatives of the
positions (an ingoing ring) and are tangent analytically.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .constants import NUMERICS, REFERENCE, DomainError, SliceDirection
from .dynamics import Field3, SimState, tangency_residual
from .grid import Grid

logger = logging.getLogger("wavemap.initial_data")

_SLICE_ANGLE = {SliceDirection.X_AXIS: 0.0, SliceDirection.DIAGONAL: math.pi / 4}


@dataclass(frozen=True)
class InitialDataParams:
    A: float
    B: float = REFERENCE.DEVIATION_B
    r1: float = NUMERICS.RING_INNER
    r2: float = NUMERICS.RING_OUTER
    sigma0: float = NUMERICS.SIGMA0
    k: int = NUMERICS.HOMOTOPY_INDEX

    def __post_init__(self):
        if not (0.0 < self.B <= 1.0):
            raise DomainError(f"B must lie in (0, 1], got {self.B}")
        if not (0.0 < self.r1 < self.r2):
            raise DomainError(f"ring radii need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")
        if self.r2 > 1.0:
            raise DomainError(f"outer ring radius r2={self.r2} leaves the unit square")
        if not (0.0 < self.sigma0 <= math.pi / 4):
            raise DomainError(f"sigma0 must lie in (0, pi/4], got {self.sigma0}")
        if self.k != 1:
            raise DomainError(f"only homotopy index k = 1 is supported, got {self.k}")


# ============================================================
# PROFILES
# ============================================================

def smoothstep9(x):
    """126x^5 - 420x^6 + 540x^7 - 315x^8 + 70x^9 on [0, 1], clamped outside."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 5 * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + 70.0 * x))))


def angular_profile(sigma, params: InitialDataParams):
    """h(sigma) on [0, pi/2], symmetric about pi/4."""
    sigma = np.asarray(sigma, dtype=np.float64)
    folded = np.minimum(sigma, 0.5 * math.pi - sigma)
    h0 = params.B + (1.0 - params.B) * smoothstep9(folded / params.sigma0)
    return np.where(folded < params.sigma0, h0, 1.0)


def _ring_quadratic(r, params: InitialDataParams):
    width2 = (params.r2 - params.r1) ** 2
    return 4.0 * (r - params.r1) * (params.r2 - r) / width2


def radial_profile(r, params: InitialDataParams):
    r = np.asarray(r, dtype=np.float64)
    inside = (r >= params.r1) & (r <= params.r2)
    return np.where(inside, _ring_quadratic(r, params) ** 4, 0.0)


def radial_profile_derivative(r, params: InitialDataParams):
    r = np.asarray(r, dtype=np.float64)
    inside = (r >= params.r1) & (r <= params.r2)
    quad = _ring_quadratic(r, params)
    dquad = 4.0 * (params.r1 + params.r2 - 2.0 * r) / (params.r2 - params.r1) ** 2
    return np.where(inside, 4.0 * quad ** 3 * dquad, 0.0)


def theta0(r, sigma, params: InitialDataParams):
    """A g(r) h(sigma); returns a float for scalar input."""
    value = params.A * radial_profile(r, params) * angular_profile(sigma, params)
    return float(value) if np.ndim(value) == 0 else value


def theta0_dr(r, sigma, params: InitialDataParams):
    """Partial r-derivative of theta0 at fixed sigma."""
    value = params.A * radial_profile_derivative(r, params) * angular_profile(sigma, params)
    return float(value) if np.ndim(value) == 0 else value


# ============================================================
# LATTICE DATA
# ============================================================

def build_initial_state(params: InitialDataParams, grid: Grid) -> SimState:
    """Sample positions and ingoing velocities on the grid."""
    if params.r1 <= 2.0 * grid.h:
        raise DomainError(
            f"inner ring radius r1={params.r1} must exceed 2h={2.0 * grid.h:.6g} at N={grid.n}"
        )

    x, y = grid.coordinates()
    r = np.hypot(x, y)
    sigma = np.arctan2(y, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_s = np.where(r > 0.0, x / np.where(r > 0.0, r, 1.0), 0.0)
        sin_s = np.where(r > 0.0, y / np.where(r > 0.0, r, 1.0), 0.0)

    th = theta0(r, sigma, params)
    th_r = theta0_dr(r, sigma, params)
    sin_t, cos_t = np.sin(th), np.cos(th)

    q = Field3(sin_t * cos_s, sin_t * sin_s, cos_t)
    p = Field3(cos_t * th_r * cos_s, cos_t * th_r * sin_s, -sin_t * th_r)

    tangency = float(np.max(np.abs(tangency_residual(q, p))))
    if tangency > 1e-12:
        logger.warning(f"initial velocities not tangent: max |q.p| = {tangency:.3e}")
    logger.info(
        f"Initial data: A={params.A} B={params.B} r1={params.r1} r2={params.r2} "
        f"sigma0={params.sigma0:.6f} N={grid.n} max|q.p|={tangency:.2e}"
    )
    return SimState(q=q, p=p, t=0.0, step=0)


def initial_minimum(params: InitialDataParams, direction: SliceDirection) -> float:
    """Analytic minimum of w at t = 0 along a slice: cos(A h(sigma)) at the ring midpoint."""
    sigma = _SLICE_ANGLE[direction]
    return math.cos(params.A * float(angular_profile(sigma, params)))


def sampled_minimum(params: InitialDataParams, n: int, direction: SliceDirection) -> float:
    """Minimum of w at t = 0 over the grid nodes of a slice."""
    h = 1.0 / (n - 1)
    step = h * (math.sqrt(2.0) if direction is SliceDirection.DIAGONAL else 1.0)
    radii = np.arange(n) * step
    th = theta0(radii, _SLICE_ANGLE[direction], params)
    return float(np.min(np.cos(th)))


# ============================================================
# CALIBRATION
# ============================================================

@dataclass(frozen=True)
class CalibrationCandidate:
    r1: float
    r2: float
    w_min_x: float
    w_min_diag: float
    deviation: float


@dataclass(frozen=True)
class CalibrationTargets:
    w_min_x: float = REFERENCE.W0_MIN_X
    w_min_diag: float = REFERENCE.W0_MIN_DIAG


def calibrate_geometry(
    params: InitialDataParams,
    n: int,
    r1_values: Iterable[float],
    widths: Iterable[float],
    targets: Optional[CalibrationTargets] = None,
) -> list[CalibrationCandidate]:
    """
    Rank ring geometries by how closely the grid-sampled w_min(0) along both
    slices matches the targets. Best candidate first.

    Only the ring midpoint position relative to the grid nodes matters for the
    sampled minimum; the analytic minimum is cos(A h(sigma)) for every geometry.
    """
    targets = targets or CalibrationTargets()
    h = 1.0 / (n - 1)
    widths = list(widths)
    candidates: list[CalibrationCandidate] = []
    for r1 in r1_values:
        if r1 <= 2.0 * h:
            continue
        for width in widths:
            r2 = r1 + width
            if r2 > 1.0:
                continue
            trial = InitialDataParams(A=params.A, B=params.B, r1=r1, r2=r2,
                                      sigma0=params.sigma0, k=params.k)
            wx = sampled_minimum(trial, n, SliceDirection.X_AXIS)
            wd = sampled_minimum(trial, n, SliceDirection.DIAGONAL)
            deviation = max(abs(wx - targets.w_min_x), abs(wd - targets.w_min_diag))
            candidates.append(CalibrationCandidate(r1, r2, wx, wd, deviation))
    candidates.sort(key=lambda c: c.deviation)
    if candidates:
        best = candidates[0]
        logger.info(
            f"Calibration N={n}: best r1={best.r1:.6f} r2={best.r2:.6f} "
            f"w_min(0) x={best.w_min_x:.8f} diag={best.w_min_diag:.8f} dev={best.deviation:.3e}"
        )
    else:
        logger.warning(f"Calibration N={n}: no admissible geometry in the sweep")
    return candidates
