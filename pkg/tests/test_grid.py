import math

import numpy as np
import pytest

from core.constants import GridError
from core.grid import (
    PARITY_U, PARITY_V, PARITY_W, Grid, Parity, Symmetry,
    apply_gradient_x, apply_gradient_y, apply_laplacian, apply_second_derivative,
    inner_product, quadrature_weights,
)


def test_rejects_small_grid():
    with pytest.raises(GridError):
        Grid(8)


def test_spacing_and_coordinates():
    g = Grid(33)
    assert g.h == 1.0 / 32
    x, y = g.coordinates()
    assert x[3, 5] == pytest.approx(3 * g.h)
    assert y[3, 5] == pytest.approx(5 * g.h)
    assert g.radius()[0, 0] == 0.0


def test_shape_mismatch_rejected(grid17):
    with pytest.raises(GridError):
        apply_gradient_x(np.zeros((16, 17)), PARITY_W, grid17)


def test_differentiated_parity_flips_both_sides_of_axis():
    d = PARITY_W.differentiated("x")
    assert d == Parity(Symmetry.ODD, Symmetry.EVEN, Symmetry.ODD, Symmetry.EVEN)
    assert PARITY_U.differentiated("x").across_x0 is Symmetry.EVEN
    assert PARITY_V.differentiated("y").across_y0 is Symmetry.EVEN


def test_gradient_exact_on_quartic(grid33):
    x, _ = grid33.coordinates()
    d = apply_gradient_x(x ** 4, PARITY_W, grid33)
    n = grid33.n
    np.testing.assert_allclose(d[: n - 2], 4 * x[: n - 2] ** 3, atol=1e-10)


def test_gradient_of_constant_is_zero(grid17):
    f = np.full(grid17.shape, 3.7)
    assert np.max(np.abs(apply_gradient_x(f, PARITY_W, grid17))) < 1e-12
    assert np.max(np.abs(apply_gradient_y(f, PARITY_W, grid17))) < 1e-12


def test_gradient_of_odd_linear_field(grid33):
    x, _ = grid33.coordinates()
    d = apply_gradient_x(x, PARITY_U, grid33)
    n = grid33.n
    np.testing.assert_allclose(d[: n - 2], 1.0, atol=1e-12)


def test_gradient_y_mirrors_x(grid33):
    x, y = grid33.coordinates()
    f = np.cos(np.pi * x) * np.cos(0.5 * np.pi * y) ** 2
    np.testing.assert_allclose(apply_gradient_y(f.T, PARITY_W, grid33), apply_gradient_x(f, PARITY_W, grid33).T)


def test_even_field_derivative_vanishes_on_symmetry_line(grid33):
    x, y = grid33.coordinates()
    f = np.cos(np.pi * x) * np.cos(np.pi * y)
    assert np.max(np.abs(apply_gradient_x(f, PARITY_W, grid33)[0, :])) < 1e-12


def test_laplacian_of_constant_is_zero(grid17):
    assert np.max(np.abs(apply_laplacian(np.ones(grid17.shape), PARITY_W, grid17))) < 1e-12


def test_laplacian_exact_on_quadratic(grid33):
    x, y = grid33.coordinates()
    lap = apply_laplacian(x ** 2 + y ** 2, PARITY_W, grid33)
    m = grid33.n - 4
    np.testing.assert_allclose(lap[:m, :m], 4.0, atol=1e-9)


@pytest.mark.parametrize("parity", [PARITY_W, PARITY_U, PARITY_V])
def test_laplacian_self_adjoint(parity, grid17, rng):
    def sample():
        f = rng.standard_normal(grid17.shape)
        if parity.across_x0 is Symmetry.ODD:
            f[0, :] = 0.0
        if parity.across_y0 is Symmetry.ODD:
            f[:, 0] = 0.0
        return f

    f, g = sample(), sample()
    lhs = inner_product(g, apply_laplacian(f, parity, grid17), grid17)
    rhs = inner_product(apply_laplacian(g, parity, grid17), f, grid17)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


@pytest.mark.parametrize("parity,field,factor", [
    (PARITY_W, lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y), 2.0),
    (PARITY_U, lambda x, y: np.sin(0.5 * np.pi * x) * np.cos(np.pi * y), 1.25),
])
def test_laplacian_fourth_order(parity, field, factor):
    errors = []
    for n in (33, 65, 129):
        g = Grid(n)
        x, y = g.coordinates()
        f = field(x, y)
        errors.append(np.max(np.abs(apply_laplacian(f, parity, g) + factor * np.pi ** 2 * f)))
    rates = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert all(3.5 <= r <= 4.5 for r in rates), rates


def test_second_derivative_exact_on_quadratic(grid33):
    x, _ = grid33.coordinates()
    d2 = apply_second_derivative(3 * x ** 2, PARITY_W, grid33, "x")
    np.testing.assert_allclose(d2[: grid33.n - 2], 6.0, atol=1e-8)


def test_quadrature_weights_cover_quarter_square(grid17):
    assert quadrature_weights(grid17).sum() == pytest.approx(1.0)
    assert inner_product(np.ones(grid17.shape), np.ones(grid17.shape), grid17) == pytest.approx(4.0)
