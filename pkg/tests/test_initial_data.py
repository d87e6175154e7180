import math

import numpy as np
import pytest

from core.constants import REFERENCE, DomainError, SliceDirection
from core.grid import Grid
from core.initial_data import (
    CalibrationTargets, InitialDataParams, angular_profile, build_initial_state,
    calibrate_geometry, initial_minimum, radial_profile, sampled_minimum, smoothstep9, theta0,
)


@pytest.mark.parametrize("kwargs", [
    {"B": 0.0},
    {"B": 1.2},
    {"r1": 0.5, "r2": 0.4},
    {"r1": 0.2, "r2": 1.1},
    {"sigma0": 1.0},
    {"k": 2},
])
def test_params_validation(kwargs):
    with pytest.raises(DomainError):
        InitialDataParams(A=0.5, **kwargs)


def test_smoothstep_endpoints_and_symmetry():
    assert smoothstep9(0.0) == 0.0
    assert smoothstep9(1.0) == pytest.approx(1.0)
    assert smoothstep9(0.5) == pytest.approx(0.5)
    assert smoothstep9(-0.3) == 0.0
    assert smoothstep9(1.7) == pytest.approx(1.0)
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(smoothstep9(x) + smoothstep9(1 - x), 1.0, atol=1e-12)


def test_theta0_examples():
    params = InitialDataParams(A=0.8, r1=0.1, r2=0.5)
    # ring midpoint, sigma inside the plateau
    assert theta0(0.3, math.pi / 4, params) == pytest.approx(0.8)
    assert theta0(0.05, math.pi / 4, params) == 0.0
    assert theta0(0.6, 0.0, params) == 0.0
    # x-axis carries the reduced amplitude B
    assert theta0(0.3, 0.0, params) == pytest.approx(0.8 * 0.8)


def test_angular_profile_symmetric_about_diagonal():
    params = InitialDataParams(A=1.0, B=0.6)
    sigma = np.linspace(0, math.pi / 2, 41)
    np.testing.assert_allclose(angular_profile(sigma, params), angular_profile(math.pi / 2 - sigma, params))
    assert float(angular_profile(0.0, params)) == pytest.approx(0.6)


def test_radial_profile_support():
    params = InitialDataParams(A=1.0, r1=0.2, r2=0.6)
    r = np.array([0.0, 0.2, 0.4, 0.6, 0.9])
    np.testing.assert_allclose(radial_profile(r, params), [0.0, 0.0, 1.0, 0.0, 0.0], atol=1e-15)


def test_initial_state_on_sphere_and_tangent():
    g = Grid(65)
    st = build_initial_state(InitialDataParams(A=REFERENCE.LAST_SUBCRITICAL_AMPLITUDE), g)
    assert np.max(np.abs(st.q.norm2() - 1.0)) < 1e-14
    assert np.max(np.abs(st.q.dot(st.p))) < 1e-13
    assert (st.q.u[0, 0], st.q.v[0, 0], st.q.w[0, 0]) == (0.0, 0.0, 1.0)
    assert st.t == 0.0 and st.step == 0


def test_initial_state_respects_reflection_parity(grid33):
    st = build_initial_state(InitialDataParams(A=0.9), grid33)
    np.testing.assert_allclose(st.q.u[0, :], 0.0, atol=1e-15)
    np.testing.assert_allclose(st.q.v[:, 0], 0.0, atol=1e-15)
    np.testing.assert_allclose(st.p.u[0, :], 0.0, atol=1e-15)
    np.testing.assert_allclose(st.p.v[:, 0], 0.0, atol=1e-15)


def test_zero_amplitude_is_north_pole(grid33):
    st = build_initial_state(InitialDataParams(A=0.0), grid33)
    np.testing.assert_array_equal(st.q.w, 1.0)
    assert max(np.max(np.abs(c)) for c in st.p.components()) == 0.0


def test_equivariant_data_are_radial():
    g = Grid(65)
    st = build_initial_state(InitialDataParams(A=0.7, B=1.0), g)
    # w depends on r only: mirror symmetry in the diagonal
    np.testing.assert_allclose(st.q.w, st.q.w.T, atol=1e-15)
    assert float(angular_profile(0.0, InitialDataParams(A=0.7, B=1.0))) == 1.0


def test_inner_radius_must_clear_the_stencil(grid17):
    with pytest.raises(DomainError):
        build_initial_state(InitialDataParams(A=0.5), grid17)


def test_initial_minimum_matches_reference_on_x_axis():
    params = InitialDataParams(A=REFERENCE.LAST_SUBCRITICAL_AMPLITUDE)
    assert initial_minimum(params, SliceDirection.X_AXIS) == pytest.approx(REFERENCE.W0_MIN_X, abs=1e-8)
    assert initial_minimum(params, SliceDirection.DIAGONAL) == pytest.approx(
        math.cos(REFERENCE.LAST_SUBCRITICAL_AMPLITUDE))


def test_sampled_minimum_never_below_analytic():
    params = InitialDataParams(A=REFERENCE.LAST_SUBCRITICAL_AMPLITUDE)
    for direction in SliceDirection:
        assert sampled_minimum(params, 129, direction) >= initial_minimum(params, direction) - 1e-15


def test_calibration_sorted_and_filtered():
    params = InitialDataParams(A=REFERENCE.LAST_SUBCRITICAL_AMPLITUDE)
    n = 129
    h = 1.0 / (n - 1)
    r1_values = [h, 0.06, 0.07, 0.08]
    candidates = calibrate_geometry(params, n, r1_values, [0.45, 0.5, 0.95])
    assert candidates
    assert all(c.r1 > 2 * h for c in candidates)
    assert all(c.r2 <= 1.0 for c in candidates)
    deviations = [c.deviation for c in candidates]
    assert deviations == sorted(deviations)


def test_calibration_with_reachable_targets():
    params = InitialDataParams(A=0.8)
    n = 65
    truth = InitialDataParams(A=0.8, r1=0.1, r2=0.6)
    targets = CalibrationTargets(
        w_min_x=sampled_minimum(truth, n, SliceDirection.X_AXIS),
        w_min_diag=sampled_minimum(truth, n, SliceDirection.DIAGONAL),
    )
    best = calibrate_geometry(params, n, [0.1], [0.5], targets)[0]
    assert best.deviation == pytest.approx(0.0, abs=1e-12)
