"""
Blow-up diagnostics - scaling function, flip detection, slices and minima

Near blow-up the solution looks like a shrinking static solution
w(t, r) ~ w_S(r / s(t)), whose Hessian at the origin is -4/s^2 times the
identity. s(t) is read off the measured Hessian either through its
determinant (Gauss curvature, the default) or its trace (mean curvature).

Everything here is a read-only analysis of lattice fields; nothing mutates
a SimState.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import NUMERICS, DomainError, ScalingMethod, SliceDirection
from .dynamics import SimState
from .grid import PARITY_W, Grid, ScalarField, apply_gradient_x, apply_gradient_y, apply_second_derivative

logger = logging.getLogger("wavemap.diagnostics")


# ============================================================
# HESSIAN AND SCALING FUNCTION
# ============================================================

def hessian_at_origin(w: ScalarField, grid: Grid) -> np.ndarray:
    """2x2 Hessian of w at (0, 0) with fourth-order stencils and even/even ghosts."""
    w_xx = apply_second_derivative(w, PARITY_W, grid, "x")[0, 0]
    w_yy = apply_second_derivative(w, PARITY_W, grid, "y")[0, 0]
    w_y = apply_gradient_y(w, PARITY_W, grid)
    w_xy = apply_gradient_x(w_y, PARITY_W.differentiated("y"), grid)[0, 0]
    return np.array([[w_xx, w_xy], [w_xy, w_yy]])


def scaling_from_hessian(
    H: np.ndarray, method: ScalingMethod = ScalingMethod.GAUSS_CURVATURE
) -> Optional[float]:
    """
    s from det H = 16/s^4 (Gauss) or tr H = -8/s^2 (mean).

    Returns None when the sign conditions fail, i.e. the data near the
    origin is not bump-like.
    """
    trace = float(H[0, 0] + H[1, 1])
    if method is ScalingMethod.GAUSS_CURVATURE:
        det = float(H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0])
        if det > 0.0 and trace < 0.0:
            return (16.0 / det) ** 0.25
        return None
    if trace < 0.0:
        return math.sqrt(-8.0 / trace)
    return None


@dataclass(frozen=True)
class OriginSample:
    """One row of the origin series."""
    t: float
    w_origin: float
    trace: float
    det: float
    s_gauss: Optional[float]
    s_mean: Optional[float]


def origin_sample(state: SimState, grid: Grid, pole_tol: float = NUMERICS.ORIGIN_POLE_TOL) -> OriginSample:
    """
    Hessian invariants at the origin and both scaling estimates.

    s is only recorded while w(0,0) stays near +1 and the Hessian is
    negative definite; otherwise both estimates are missing.
    """
    w = state.q.w
    H = hessian_at_origin(w, grid)
    w0 = float(w[0, 0])
    trace = float(np.trace(H))
    det = float(np.linalg.det(H))
    s_gauss = s_mean = None
    if abs(w0 - 1.0) < pole_tol and det > 0.0 and trace < 0.0:
        s_gauss = scaling_from_hessian(H, ScalingMethod.GAUSS_CURVATURE)
        s_mean = scaling_from_hessian(H, ScalingMethod.MEAN_CURVATURE)
    return OriginSample(t=state.t, w_origin=w0, trace=trace, det=det, s_gauss=s_gauss, s_mean=s_mean)


@dataclass
class ScalingSeries:
    """Recorded (t, s) pairs; missing samples are simply absent."""
    times: list[float] = field(default_factory=list)
    s_values: list[float] = field(default_factory=list)
    method: ScalingMethod = ScalingMethod.GAUSS_CURVATURE

    def append(self, t: float, s: Optional[float]) -> None:
        if s is None:
            return
        if not s > 0.0:
            raise DomainError(f"scaling function must be positive, got {s} at t={t}")
        self.times.append(float(t))
        self.s_values.append(float(s))

    def __len__(self) -> int:
        return len(self.times)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.times, dtype=np.float64), np.asarray(self.s_values, dtype=np.float64)

    def minimum(self) -> tuple[float, float]:
        """(t, s) at the smallest recorded s."""
        if not self.times:
            raise DomainError("empty scaling series has no minimum")
        k = int(np.argmin(self.s_values))
        return self.times[k], self.s_values[k]

    def window(self, t_lo: float, t_hi: float) -> tuple[np.ndarray, np.ndarray]:
        t, s = self.arrays()
        mask = (t >= t_lo) & (t <= t_hi)
        return t[mask], s[mask]

    @classmethod
    def from_samples(cls, samples: Sequence[OriginSample],
                     method: ScalingMethod = ScalingMethod.GAUSS_CURVATURE) -> "ScalingSeries":
        series = cls(method=method)
        for sample in samples:
            s = sample.s_gauss if method is ScalingMethod.GAUSS_CURVATURE else sample.s_mean
            series.append(sample.t, s)
        return series


def hover_duration(series: ScalingSeries, band: float = NUMERICS.HOVER_BAND) -> float:
    """Length of the contiguous time span around the minimum with s within `band` of it."""
    if len(series) == 0:
        return 0.0
    t, s = series.arrays()
    k = int(np.argmin(s))
    inside = s <= (1.0 + band) * s[k]
    lo = k
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    hi = k
    while hi < len(s) - 1 and inside[hi + 1]:
        hi += 1
    return float(t[hi] - t[lo])


def decrease_hover_increase(series: ScalingSeries, band: float = NUMERICS.HOVER_BAND,
                            rtol: float = 1e-2) -> bool:
    """
    True when s(t) falls to an interior minimum and rises again.

    Both ends must sit above the hover band, and each branch must be monotone
    up to a relative wiggle of `rtol`.
    """
    if len(series) < 3:
        return False
    _, s = series.arrays()
    k = int(np.argmin(s))
    if k == 0 or k == len(s) - 1:
        return False
    ceiling = (1.0 + band) * s[k]
    if s[0] <= ceiling or s[-1] <= ceiling:
        return False
    falling = np.all(s[1:k + 1] <= s[:k] * (1.0 + rtol))
    rising = np.all(s[k + 1:] >= s[k:-1] * (1.0 - rtol))
    return bool(falling and rising)


# ============================================================
# FLIP DETECTION
# ============================================================

@dataclass(frozen=True)
class FlipEvent:
    step_index: int
    time: float
    w_origin_before: float
    w_origin_after: float

    @property
    def clean(self) -> bool:
        """A genuine pole switch from near +1 to near -1."""
        return abs(self.w_origin_before - 1.0) < 0.5 and abs(self.w_origin_after + 1.0) < 0.5


class FlipDetector:
    """
    Streaming flip detection: w(t,0,0) drops below `threshold` after having
    been above `guard`. Fires once.
    """

    def __init__(self, threshold: float = NUMERICS.FLIP_THRESHOLD, guard: float = NUMERICS.FLIP_GUARD):
        self.threshold = threshold
        self.guard = guard
        self.armed = False
        self.event: Optional[FlipEvent] = None
        self._previous: Optional[float] = None

    def update(self, step_index: int, t: float, w_origin: float) -> Optional[FlipEvent]:
        if self.event is not None:
            return None
        if self.armed and w_origin < self.threshold:
            before = self._previous if self._previous is not None else w_origin
            self.event = FlipEvent(step_index, t, before, w_origin)
            if not self.event.clean:
                logger.warning(
                    f"flip at t={t:.8f} is not a clean pole switch "
                    f"(w before={before:.4f}, after={w_origin:.4f})"
                )
            return self.event
        if w_origin > self.guard:
            self.armed = True
        self._previous = w_origin
        return None

    def get_status(self) -> dict:
        return {"armed": self.armed, "previous": self._previous}

    def restore(self, status: dict) -> None:
        self.armed = bool(status["armed"])
        previous = status["previous"]
        self._previous = None if previous is None else float(previous)


def detect_flip(
    w_origin_history: Sequence[tuple[float, float]],
    threshold: float = NUMERICS.FLIP_THRESHOLD,
    guard: float = NUMERICS.FLIP_GUARD,
) -> Optional[FlipEvent]:
    """First sample where w(t,0,0) crosses below `threshold` after exceeding `guard`."""
    detector = FlipDetector(threshold, guard)
    for index, (t, w0) in enumerate(w_origin_history):
        event = detector.update(index, t, w0)
        if event is not None:
            return event
    return None


# ============================================================
# SLICES
# ============================================================

@dataclass(frozen=True)
class SliceProfile:
    direction: SliceDirection
    radii: np.ndarray
    w_values: np.ndarray
    time: float = 0.0

    def minimum(self) -> float:
        return float(np.min(self.w_values))


def slice_step(grid: Grid, direction: SliceDirection) -> float:
    """Euclidean distance between consecutive slice samples."""
    return grid.h * (math.sqrt(2.0) if direction is SliceDirection.DIAGONAL else 1.0)


def _slice_values(w: ScalarField, direction: SliceDirection) -> np.ndarray:
    if direction is SliceDirection.X_AXIS:
        return np.array(w[:, 0], dtype=np.float64)
    return np.array(np.diagonal(w), dtype=np.float64)


def extract_slice(w: ScalarField, grid: Grid, direction: SliceDirection, time: float = 0.0) -> SliceProfile:
    """w along the x-axis (w(ih, 0)) or the diagonal (w(ih, ih) at radius sqrt(2) ih)."""
    grid.check(w)
    radii = np.arange(grid.n) * slice_step(grid, direction)
    return SliceProfile(direction, radii, _slice_values(w, direction), time)


def interpolate_slice(values: np.ndarray, step: float, radii) -> np.ndarray:
    """
    Centred four-point Lagrange interpolation along a slice.

    Both slice ends are even reflection lines (origin by parity, far end by
    the Neumann closure), so two ghost values are mirrored on either side.
    """
    radii = np.asarray(radii, dtype=np.float64)
    length = step * (len(values) - 1)
    if np.any(radii < 0.0) or np.any(radii > length * (1.0 + 1e-12)):
        raise DomainError(f"interpolation radii must lie in [0, {length:.6g}]")
    padded = np.pad(values, 2, mode="reflect")
    xi = np.minimum(radii / step, len(values) - 1)
    i = np.minimum(np.floor(xi).astype(np.int64), len(values) - 2)
    f = xi - i
    # padded index of node i is i + 2
    p0, p1, p2, p3 = (padded[i + k] for k in (1, 2, 3, 4))
    return (
        -f * (f - 1.0) * (f - 2.0) / 6.0 * p0
        + (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0 * p1
        - (f + 1.0) * f * (f - 2.0) / 2.0 * p2
        + (f + 1.0) * f * (f - 1.0) / 6.0 * p3
    )


def rescaled_profile(
    w: ScalarField,
    grid: Grid,
    s: float,
    direction: SliceDirection,
    sample_radii=None,
    time: float = 0.0,
) -> SliceProfile:
    """
    w(s r_k) along a slice, for comparison against w_S(r_k).

    Default sample radii are the slice nodes r_k with s r_k still inside the slice.
    """
    if not s > 0.0:
        raise DomainError(f"scale must be positive, got {s}")
    grid.check(w)
    step = slice_step(grid, direction)
    length = step * (grid.n - 1)
    if sample_radii is None:
        sample_radii = np.arange(grid.n) * step
        sample_radii = sample_radii[s * sample_radii <= length]
    sample_radii = np.asarray(sample_radii, dtype=np.float64)
    values = interpolate_slice(_slice_values(w, direction), step, s * sample_radii)
    return SliceProfile(direction, sample_radii, values, time)


def profile_deviation(x_profile: SliceProfile, diag_profile: SliceProfile) -> float:
    """Max |w_x(r) - w_diag(r)| at the diagonal radii reachable by the x-axis slice."""
    step_x = float(x_profile.radii[1] - x_profile.radii[0])
    reach = x_profile.radii[-1]
    mask = diag_profile.radii <= reach
    interpolated = interpolate_slice(np.asarray(x_profile.w_values), step_x, diag_profile.radii[mask])
    return float(np.max(np.abs(interpolated - diag_profile.w_values[mask])))


# ============================================================
# MINIMA AND ISOTROPY
# ============================================================

class MinimumTracker:
    """Running global minimum of min_r w over a slice history."""

    def __init__(self, direction: SliceDirection):
        self.direction = direction
        self.samples = 0
        self.t_min: Optional[float] = None
        self.w_min: Optional[float] = None
        self.w_initial: Optional[float] = None

    def update(self, profile: SliceProfile) -> None:
        self.record(profile.time, profile.minimum())

    def record(self, t: float, value: float) -> None:
        if self.samples == 0:
            self.w_initial = value
        self.samples += 1
        if self.w_min is None or value < self.w_min:
            self.t_min, self.w_min = t, value

    def result(self) -> tuple[float, float]:
        if self.samples < 3:
            raise DomainError(f"minimum tracking needs at least 3 samples, got {self.samples}")
        return self.t_min, self.w_min


def track_minimum(history: Sequence[SliceProfile]) -> tuple[float, float]:
    """(t_min, w_min) of the global minimum of min_r w over the history."""
    if not history:
        raise DomainError("minimum tracking needs at least 3 samples, got 0")
    tracker = MinimumTracker(history[0].direction)
    for profile in history:
        tracker.update(profile)
    return tracker.result()


def relative_deviation(x: float, d: float) -> float:
    """|x - d| / |d|, the diagonal value as reference."""
    if d == 0.0:
        raise DomainError("relative deviation undefined for a zero reference value")
    return abs(x - d) / abs(d)


@dataclass(frozen=True)
class IsotropyReport:
    """x-axis versus diagonal comparison of the wave-packet minimum."""
    t_min_x: float
    t_min_diag: float
    w_min_x: float
    w_min_diag: float
    w0_min_x: float
    w0_min_diag: float

    @property
    def t_min_deviation(self) -> float:
        return relative_deviation(self.t_min_x, self.t_min_diag)

    @property
    def w_min_deviation(self) -> float:
        return relative_deviation(self.w_min_x, self.w_min_diag)

    @property
    def initial_deviation(self) -> float:
        return relative_deviation(self.w0_min_x, self.w0_min_diag)

    def isotropizes(self, factor: float = 100.0) -> bool:
        """Deviation at t_min is `factor` times smaller than at t = 0."""
        return max(self.t_min_deviation, self.w_min_deviation) * factor <= self.initial_deviation

    def as_dict(self) -> dict:
        return {
            "t_min": {"x_axis": self.t_min_x, "diagonal": self.t_min_diag,
                      "deviation": self.t_min_deviation},
            "w_min": {"x_axis": self.w_min_x, "diagonal": self.w_min_diag,
                      "deviation": self.w_min_deviation},
            "w_min_initial": {"x_axis": self.w0_min_x, "diagonal": self.w0_min_diag,
                              "deviation": self.initial_deviation},
        }

    @classmethod
    def from_trackers(cls, x: MinimumTracker, diag: MinimumTracker) -> "IsotropyReport":
        t_x, w_x = x.result()
        t_d, w_d = diag.result()
        return cls(t_x, t_d, w_x, w_d, x.w_initial, diag.w_initial)
