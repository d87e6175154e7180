"""
Grid core - uniform lattice on the unit square with fourth-order stencils

The computational domain is the quarter [0,1]x[0,1] of the symmetric square
[-1,1]x[-1,1]. Ghost values are filled by reflection:
  - across x=0 / y=0 with the parity of the field component,
  - across x=1 / y=1 with even reflection (homogeneous Neumann).

Arrays use "ij" layout: values[i, j] is the value at (i*h, j*h).

The Laplacian is the variational one, -(Dx^T W Dx + Dy^T W Dy) / W with W the
trapezoidal weights. On reflection-symmetric fields the weighted transpose of D
is -D with the induced parity closure, so the Laplacian is D applied twice,
each time with the parity of its argument.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import NUMERICS, GridError

logger = logging.getLogger("wavemap.grid")

ScalarField = np.ndarray

_AXES = {"x": 0, "y": 1}


class Symmetry(Enum):
    EVEN = 1
    ODD = -1

    def flipped(self) -> "Symmetry":
        return Symmetry.ODD if self is Symmetry.EVEN else Symmetry.EVEN


@dataclass(frozen=True)
class Parity:
    """Reflection behaviour of a field across the four sides of the quarter domain."""
    across_x0: Symmetry
    across_y0: Symmetry
    across_x1: Symmetry = Symmetry.EVEN
    across_y1: Symmetry = Symmetry.EVEN

    def along(self, axis: str) -> tuple[Symmetry, Symmetry]:
        if axis == "x":
            return self.across_x0, self.across_x1
        if axis == "y":
            return self.across_y0, self.across_y1
        raise GridError(f"unknown axis '{axis}'")

    def differentiated(self, axis: str) -> "Parity":
        """Parity of the derivative along `axis`: both sides of that axis flip."""
        if axis == "x":
            return Parity(self.across_x0.flipped(), self.across_y0,
                          self.across_x1.flipped(), self.across_y1)
        if axis == "y":
            return Parity(self.across_x0, self.across_y0.flipped(),
                          self.across_x1, self.across_y1.flipped())
        raise GridError(f"unknown axis '{axis}'")


# Component parities forced by the reflection symmetry of the data.
PARITY_U = Parity(Symmetry.ODD, Symmetry.EVEN)
PARITY_V = Parity(Symmetry.EVEN, Symmetry.ODD)
PARITY_W = Parity(Symmetry.EVEN, Symmetry.EVEN)
COMPONENT_PARITIES = (PARITY_U, PARITY_V, PARITY_W)


@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self):
        if self.n < NUMERICS.MIN_POINTS_PER_AXIS:
            raise GridError(
                f"grid needs N >= {NUMERICS.MIN_POINTS_PER_AXIS} points per axis, got {self.n}"
            )

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        a = self.axis()
        return np.meshgrid(a, a, indexing="ij")

    def radius(self) -> np.ndarray:
        x, y = self.coordinates()
        return np.hypot(x, y)

    def check(self, f: ScalarField) -> None:
        if f.shape != self.shape:
            raise GridError(f"field shape {f.shape} does not match grid {self.shape}")


# ============================================================
# GHOST FILLING
# ============================================================

def _pad(f: ScalarField, axis: int, lo: Symmetry, hi: Symmetry, width: int = 2) -> np.ndarray:
    pad = [(0, 0), (0, 0)]
    pad[axis] = (width, width)
    padded = np.pad(np.asarray(f, dtype=np.float64), pad, mode="reflect")
    if lo is Symmetry.ODD:
        idx = [slice(None), slice(None)]
        idx[axis] = slice(0, width)
        padded[tuple(idx)] *= -1.0
    if hi is Symmetry.ODD:
        idx = [slice(None), slice(None)]
        idx[axis] = slice(-width, None)
        padded[tuple(idx)] *= -1.0
    return padded


def _window(p: np.ndarray, axis: int, offset: int, n: int) -> np.ndarray:
    """View of the padded array shifted by `offset` (0..4) along `axis`, length n."""
    idx = [slice(None), slice(None)]
    idx[axis] = slice(offset, offset + n)
    return p[tuple(idx)]


def _first_derivative(f: ScalarField, parity: Parity, grid: Grid, axis_name: str) -> ScalarField:
    grid.check(f)
    axis = _AXES[axis_name]
    lo, hi = parity.along(axis_name)
    p = _pad(f, axis, lo, hi)
    n = grid.n
    return (
        _window(p, axis, 0, n) - 8.0 * _window(p, axis, 1, n)
        + 8.0 * _window(p, axis, 3, n) - _window(p, axis, 4, n)
    ) / (12.0 * grid.h)


# ============================================================
# OPERATORS
# ============================================================

def apply_gradient_x(f: ScalarField, parity: Parity, grid: Grid) -> ScalarField:
    """Fourth-order centred D_x with stencil (1, -8, 0, 8, -1)/(12h)."""
    return _first_derivative(f, parity, grid, "x")


def apply_gradient_y(f: ScalarField, parity: Parity, grid: Grid) -> ScalarField:
    return _first_derivative(f, parity, grid, "y")


def apply_laplacian(f: ScalarField, parity: Parity, grid: Grid) -> ScalarField:
    """Variational Laplacian: D_x D_x f + D_y D_y f with induced-parity closure."""
    fx = apply_gradient_x(f, parity, grid)
    fy = apply_gradient_y(f, parity, grid)
    return (apply_gradient_x(fx, parity.differentiated("x"), grid)
            + apply_gradient_y(fy, parity.differentiated("y"), grid))


def apply_second_derivative(f: ScalarField, parity: Parity, grid: Grid, axis_name: str) -> ScalarField:
    """Compact fourth-order second derivative (-1, 16, -30, 16, -1)/(12h^2)."""
    grid.check(f)
    axis = _AXES[axis_name]
    lo, hi = parity.along(axis_name)
    p = _pad(f, axis, lo, hi)
    n = grid.n
    return (
        -_window(p, axis, 0, n) + 16.0 * _window(p, axis, 1, n) - 30.0 * _window(p, axis, 2, n)
        + 16.0 * _window(p, axis, 3, n) - _window(p, axis, 4, n)
    ) / (12.0 * grid.h ** 2)


def quadrature_weights(grid: Grid) -> np.ndarray:
    """Trapezoidal cell weights h^2, halved on each boundary line."""
    w1 = np.full(grid.n, grid.h)
    w1[0] *= 0.5
    w1[-1] *= 0.5
    return np.outer(w1, w1)


def inner_product(f: ScalarField, g: ScalarField, grid: Grid) -> float:
    """Grid inner product over the full symmetric domain (factor 4 for the mirror images)."""
    return 4.0 * float(np.sum(quadrature_weights(grid) * f * g))
