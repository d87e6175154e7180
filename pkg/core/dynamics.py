"""
Wave map dynamics - the semi-discrete constrained Hamiltonian system

State: three lattice fields q = (u, v, w) on the sphere at every grid point and
their momenta p, which coincide with velocities because the kinetic metric is
the (uniform) cell weight. The equations of motion are

    q'' = Lap(q) + 2*lambda*q,    |q|^2 - 1 = 0   (pointwise)

with Lap the variational Laplacian of grid.py. This module provides the
unconstrained force Lap(q), the constraint, and the energy functionals
E = 1/2 * integral(|q_t|^2 + |q_x|^2 + |q_y|^2) over [-1,1]^2, normalised so
that the static solution carries energy 4*pi.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .constants import DomainError, Pole
from .grid import (
    COMPONENT_PARITIES, Grid, ScalarField,
    apply_gradient_x, apply_gradient_y, apply_laplacian, quadrature_weights,
)

logger = logging.getLogger("wavemap.dynamics")


@dataclass(frozen=True)
class Field3:
    """The three components (u, v, w) of a map into R^3, one array each."""
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.u, self.v, self.w)

    def dot(self, other: "Field3") -> np.ndarray:
        return self.u * other.u + self.v * other.v + self.w * other.w

    def norm2(self) -> np.ndarray:
        return self.dot(self)

    def scaled(self, factor) -> "Field3":
        return Field3(self.u * factor, self.v * factor, self.w * factor)

    def plus(self, other: "Field3", factor=1.0) -> "Field3":
        """self + factor * other (factor may be a pointwise array)."""
        return Field3(self.u + factor * other.u, self.v + factor * other.v,
                      self.w + factor * other.w)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all()
                    and np.isfinite(self.w).all())

    @classmethod
    def zeros_like(cls, ref: np.ndarray) -> "Field3":
        return cls(np.zeros_like(ref), np.zeros_like(ref), np.zeros_like(ref))


@dataclass(frozen=True)
class SimState:
    """Full phase-space point: positions, momenta, time and step counter."""
    q: Field3
    p: Field3
    t: float = 0.0
    step: int = 0

    def with_momenta(self, p: Field3) -> "SimState":
        return replace(self, p=p)


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    potential: float
    local_kinetic: Optional[float] = None
    local_potential: Optional[float] = None
    radius: Optional[float] = None

    @property
    def total(self) -> float:
        return self.kinetic + self.potential

    @property
    def local_total(self) -> Optional[float]:
        if self.local_kinetic is None or self.local_potential is None:
            return None
        return self.local_kinetic + self.local_potential


# ============================================================
# CONSTRAINT AND FORCE
# ============================================================

def constraint_residual(q: Field3) -> ScalarField:
    """phi = u^2 + v^2 + w^2 - 1 at every grid point."""
    return q.norm2() - 1.0


def tangency_residual(q: Field3, p: Field3) -> ScalarField:
    """Hidden constraint q . p (velocity tangent to the sphere)."""
    return q.dot(p)


def force(q: Field3, grid: Grid) -> Field3:
    """Unconstrained force: componentwise variational Laplacian of q."""
    pu, pv, pw = COMPONENT_PARITIES
    return Field3(
        apply_laplacian(q.u, pu, grid),
        apply_laplacian(q.v, pv, grid),
        apply_laplacian(q.w, pw, grid),
    )


def constrained_acceleration(q: Field3, grid: Grid) -> Field3:
    """Force projected onto the tangent plane of the sphere at each point."""
    f = force(q, grid)
    normal = f.dot(q) / q.norm2()
    return f.plus(q, -normal)


# ============================================================
# STATIC SOLUTIONS
# ============================================================

def static_solution(x, y, pole: Pole = Pole.NORTH):
    """Inverse stereographic projection; `pole` selects the sign of w."""
    r2 = x * x + y * y
    denom = 1.0 + r2
    return 2.0 * x / denom, 2.0 * y / denom, pole.sign * (1.0 - r2) / denom


def rescaled_static_w(r, s: float):
    """w_S(r / s) for the north-pole static solution."""
    rho2 = (np.asarray(r) / s) ** 2
    return (1.0 - rho2) / (1.0 + rho2)


def static_state(grid: Grid, pole: Pole = Pole.NORTH, scale: float = 1.0) -> SimState:
    """Static solution shrunk by `scale`, zero momenta."""
    x, y = grid.coordinates()
    u, v, w = static_solution(x / scale, y / scale, pole)
    q = Field3(u, v, w)
    return SimState(q=q, p=Field3.zeros_like(u))


# ============================================================
# ENERGY
# ============================================================

def _gradient_density(q: Field3, grid: Grid) -> np.ndarray:
    density = np.zeros(grid.shape)
    for comp, parity in zip(q.components(), COMPONENT_PARITIES):
        density += apply_gradient_x(comp, parity, grid) ** 2
        density += apply_gradient_y(comp, parity, grid) ** 2
    return density


def potential_energy(q: Field3, grid: Grid) -> float:
    weights = quadrature_weights(grid)
    return 2.0 * float(np.sum(weights * _gradient_density(q, grid)))


def energy(state: SimState, grid: Grid, rho: Optional[float] = None) -> EnergyReport:
    """
    Kinetic and potential energy over [-1,1]^2 (quarter sum times 4, times 1/2).

    With `rho` given, also the energies inside the ball r <= rho around the origin.
    """
    if rho is not None and not (0.0 < rho <= 1.0):
        raise DomainError(f"local energy radius must lie in (0, 1], got {rho}")

    weights = quadrature_weights(grid)
    kin_density = state.p.norm2()
    pot_density = _gradient_density(state.q, grid)
    kinetic = 2.0 * float(np.sum(weights * kin_density))
    potential = 2.0 * float(np.sum(weights * pot_density))

    if rho is None:
        return EnergyReport(kinetic=kinetic, potential=potential)

    ball = weights * (grid.radius() <= rho)
    return EnergyReport(
        kinetic=kinetic,
        potential=potential,
        local_kinetic=2.0 * float(np.sum(ball * kin_density)),
        local_potential=2.0 * float(np.sum(ball * pot_density)),
        radius=rho,
    )
