"""
RATTLE integrator - symplectic stepping with one sphere constraint per grid point

One step from (q, p):
  1. half kick   p+ = p + dt/2 (F(q) + L q)
  2. drift       q' = q + dt p+,  L chosen per point so that |q'| = 1
  3. half kick   p' = p+ + dt/2 (F(q') + M q'),  M chosen per point so that q'.p' = 0

Constraints couple only a point with itself, so stage 2 is a scalar quadratic
in L per point and stage 3 a scalar linear equation in M. The quadratic is
solved in closed form taking the root of smaller magnitude (the branch that
tends to L = 0 as dt -> 0); Newton iterations polish it and take over from
L = 0 where the discriminant is marginal. L = 2*lambda in terms of the
Lagrange multiplier of the field equations.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .constants import NUMERICS, DomainError, ProjectionFailure
from .dynamics import Field3, SimState, constraint_residual, force, tangency_residual
from .grid import Grid

logger = logging.getLogger("wavemap.rattle")

ForceFn = Callable[[Field3], Field3]


@dataclass(frozen=True)
class RattleConfig:
    dt: float
    projection_tol: float = NUMERICS.PROJECTION_TOL
    max_projection_iters: int = NUMERICS.MAX_PROJECTION_ITERS

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError(f"time step must be positive, got {self.dt}")
        if not self.projection_tol > 0:
            raise DomainError(f"projection tolerance must be positive, got {self.projection_tol}")
        if self.max_projection_iters < 1:
            raise DomainError("max_projection_iters must be at least 1")

    @classmethod
    def for_grid(cls, grid: Grid, dt_over_h: float = NUMERICS.DT_OVER_H, **kwargs) -> "RattleConfig":
        return cls(dt=dt_over_h * grid.h, **kwargs)


@dataclass(frozen=True)
class StepReport:
    lambda_max: float
    projection_iters_max: int
    constraint_residual_max: float
    tangency_residual_max: float = 0.0
    failed_points: int = 0

    @property
    def ok(self) -> bool:
        return self.failed_points == 0


def grid_force(grid: Grid) -> ForceFn:
    return lambda q: force(q, grid)


# ============================================================
# POSITION STAGE
# ============================================================

def _solve_position_multiplier(a: Field3, q: Field3, c: float, cfg: RattleConfig):
    """
    Per point, find L with |a + c L q|^2 = 1.

    Returns (L, iterations, failed_mask).
    """
    qq = q.norm2()
    A = c * c * qq
    B = 2.0 * c * a.dot(q)
    C = a.norm2() - 1.0

    disc = B * B - 4.0 * A * C
    marginal = disc <= NUMERICS.MARGINAL_DISCRIMINANT * B * B
    sign = np.where(B >= 0.0, 1.0, -1.0)
    denom = -B - sign * np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(denom != 0.0, 2.0 * C / denom, 0.0)
    lam = np.where(marginal, 0.0, lam)

    iters = np.zeros(lam.shape, dtype=np.int64)
    g = A * lam * lam + B * lam + C
    for _ in range(cfg.max_projection_iters):
        active = (np.abs(g) > cfg.projection_tol) | (marginal & (iters == 0))
        if not active.any():
            break
        slope = 2.0 * A * lam + B
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = np.where(active & (slope != 0.0), g / slope, 0.0)
        lam = lam - delta
        iters += active
        g = A * lam * lam + B * lam + C

    failed = ~np.isfinite(lam) | (np.abs(g) > cfg.projection_tol)
    return lam, iters, failed


# ============================================================
# STEP
# ============================================================

def rattle_step(
    state: SimState,
    cfg: RattleConfig,
    force_fn: ForceFn,
    current_force: Optional[Field3] = None,
) -> tuple[SimState, StepReport, Field3]:
    """
    Advance `state` by one RATTLE step.

    Returns the new state, its StepReport and the force at the new positions
    (so the caller can hand it back as `current_force` next step).
    Raises ProjectionFailure when the position stage has no admissible root.
    """
    dt = cfg.dt
    q, p = state.q, state.p
    f_old = current_force if current_force is not None else force_fn(q)

    # drift target without the constraint force
    a = q.plus(p, dt).plus(f_old, 0.5 * dt * dt)
    c = 0.5 * dt * dt
    lam, iters, failed = _solve_position_multiplier(a, q, c, cfg)

    n_failed = int(np.count_nonzero(failed))
    if n_failed:
        report = StepReport(
            lambda_max=float(np.nanmax(np.abs(np.where(failed, np.nan, 0.5 * lam)), initial=0.0)),
            projection_iters_max=int(iters.max()),
            constraint_residual_max=float("inf"),
            failed_points=n_failed,
        )
        raise ProjectionFailure(
            f"position stage failed at {n_failed} grid point(s), step {state.step + 1}",
            report=report, failed_points=n_failed,
        )

    q_new = a.plus(q, c * lam)
    p_half = p.plus(f_old, 0.5 * dt).plus(q, 0.5 * dt * lam)

    # velocity stage: linear in M
    f_new = force_fn(q_new)
    mu = -(2.0 / dt * q_new.dot(p_half) + q_new.dot(f_new)) / q_new.norm2()
    p_new = p_half.plus(f_new, 0.5 * dt).plus(q_new, 0.5 * dt * mu)

    phi_max = float(np.max(np.abs(constraint_residual(q_new))))
    report = StepReport(
        lambda_max=float(np.max(np.abs(0.5 * lam))),
        projection_iters_max=int(iters.max()),
        constraint_residual_max=phi_max,
        tangency_residual_max=float(np.max(np.abs(tangency_residual(q_new, p_new)))),
    )
    new_state = SimState(q=q_new, p=p_new, t=state.t + dt, step=state.step + 1)
    return new_state, report, f_new


class RattleIntegrator:
    """
    Stateful wrapper around rattle_step.

    Caches the force at the latest positions so each step evaluates the
    Laplacian once, and keeps worst-case counters for status reporting.
    """

    def __init__(self, cfg: RattleConfig, force_fn: ForceFn):
        self.cfg = cfg
        self.force_fn = force_fn
        self._cached: Optional[tuple[Field3, Field3]] = None
        self.steps_taken: int = 0
        self.worst_lambda: float = 0.0
        self.worst_iters: int = 0
        self.worst_constraint: float = 0.0
        self.worst_tangency: float = 0.0

    def step(self, state: SimState) -> tuple[SimState, StepReport]:
        current = None
        if self._cached is not None and self._cached[0] is state.q:
            current = self._cached[1]
        new_state, report, f_new = rattle_step(state, self.cfg, self.force_fn, current)
        self._cached = (new_state.q, f_new)
        self.steps_taken += 1
        self.worst_lambda = max(self.worst_lambda, report.lambda_max)
        self.worst_iters = max(self.worst_iters, report.projection_iters_max)
        self.worst_constraint = max(self.worst_constraint, report.constraint_residual_max)
        self.worst_tangency = max(self.worst_tangency, report.tangency_residual_max)
        return new_state, report

    def get_status(self) -> dict:
        return {
            "dt": self.cfg.dt,
            "steps_taken": self.steps_taken,
            "worst_lambda": self.worst_lambda,
            "worst_projection_iters": self.worst_iters,
            "worst_constraint_residual": self.worst_constraint,
            "worst_tangency_residual": self.worst_tangency,
        }

    def restore(self, status: dict) -> None:
        """Reload the counters from a get_status() dict saved with a checkpoint."""
        self.steps_taken = int(status["steps_taken"])
        self.worst_lambda = float(status["worst_lambda"])
        self.worst_iters = int(status["worst_projection_iters"])
        self.worst_constraint = float(status["worst_constraint_residual"])
        self.worst_tangency = float(status["worst_tangency_residual"])


# ============================================================
# PROJECTION (initial data cleanup, restarts)
# ============================================================

def project_to_constraint(q: Field3, p: Field3, tol: float = NUMERICS.PROJECTION_TOL) -> tuple[Field3, Field3]:
    """Normalise q pointwise and remove the normal component of p."""
    norm = np.sqrt(q.norm2())
    if np.any(norm < 0.5):
        bad = int(np.count_nonzero(norm < 0.5))
        raise DomainError(f"{bad} point(s) with |q| < 0.5, normalisation is ambiguous")

    q_hat = q.scaled(1.0 / norm)
    for _ in range(3):
        residual = constraint_residual(q_hat)
        if np.max(np.abs(residual)) <= tol:
            break
        q_hat = q_hat.scaled(1.0 / np.sqrt(q_hat.norm2()))

    p_tan = p.plus(q_hat, -q_hat.dot(p))
    return q_hat, p_tan
