import math

import numpy as np
import pytest

from core.constants import DomainError, ProjectionFailure
from core.dynamics import Field3, SimState, constraint_residual, energy, static_state
from core.grid import Grid
from core.initial_data import InitialDataParams, build_initial_state
from core.rattle import (
    RattleConfig, RattleIntegrator, grid_force, project_to_constraint, rattle_step,
)


def free_force(q):
    return Field3.zeros_like(q.u)


def rotor_state(speed):
    one = np.ones((1, 1))
    return SimState(q=Field3(one.copy(), 0 * one, 0 * one), p=Field3(0 * one, speed * one, 0 * one))


def evolve(state, cfg, force_fn, steps):
    integ = RattleIntegrator(cfg, force_fn)
    for _ in range(steps):
        state, _ = integ.step(state)
    return state, integ


@pytest.mark.parametrize("kwargs", [
    {"dt": 0.0},
    {"dt": -1e-3},
    {"dt": 1e-3, "projection_tol": 0.0},
    {"dt": 1e-3, "max_projection_iters": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        RattleConfig(**kwargs)


def test_for_grid_uses_quarter_spacing(grid33):
    assert RattleConfig.for_grid(grid33).dt == pytest.approx(0.25 / 32)


def test_north_pole_is_a_fixed_point(grid17):
    zeros = np.zeros(grid17.shape)
    state = SimState(q=Field3(zeros, zeros.copy(), np.ones(grid17.shape)), p=Field3.zeros_like(zeros))
    new, report, _ = rattle_step(state, RattleConfig.for_grid(grid17), grid_force(grid17))
    np.testing.assert_array_equal(new.q.w, 1.0)
    np.testing.assert_array_equal(new.p.u, 0.0)
    assert report.lambda_max == 0.0
    assert report.ok
    assert new.step == 1


def test_free_rotor_keeps_speed_and_plane():
    state, integ = evolve(rotor_state(1.0), RattleConfig(dt=0.01), free_force, 10_000)
    assert float(state.p.norm2()[0, 0]) == pytest.approx(1.0, abs=1e-10)
    assert state.q.w[0, 0] == 0.0
    assert abs(float(constraint_residual(state.q)[0, 0])) <= 1e-12
    assert state.t == pytest.approx(100.0)
    assert integ.get_status()["steps_taken"] == 10_000


def test_constraints_held_on_ring_data(grid33):
    state = build_initial_state(InitialDataParams(A=0.6), grid33)
    _, integ = evolve(state, RattleConfig.for_grid(grid33), grid_force(grid33), 40)
    status = integ.get_status()
    assert status["worst_constraint_residual"] <= 1e-12
    assert status["worst_tangency_residual"] <= 1e-11
    assert status["worst_projection_iters"] <= 50


def test_energy_bounded_error(grid33):
    state = build_initial_state(InitialDataParams(A=0.3), grid33)
    cfg = RattleConfig(dt=grid33.h / 8)
    e0 = energy(state, grid33).total
    final, _ = evolve(state, cfg, grid_force(grid33), 64)
    assert abs(energy(final, grid33).total - e0) / e0 < 1e-2


def test_energy_has_no_secular_drift(grid33):
    state = build_initial_state(InitialDataParams(A=0.3), grid33)
    integ = RattleIntegrator(RattleConfig(dt=grid33.h / 8), grid_force(grid33))
    e0 = energy(state, grid33).total
    times, deviations = [], []
    for step in range(1, 4097):
        state, _ = integ.step(state)
        if step % 32 == 0:
            times.append(state.t)
            deviations.append((energy(state, grid33).total - e0) / e0)
    assert state.t == pytest.approx(16.0)
    slope, _ = np.polyfit(times, deviations, 1)
    assert max(abs(d) for d in deviations) < 1e-3
    assert abs(slope) < 2e-5


def test_time_reversibility(grid33):
    start = build_initial_state(InitialDataParams(A=0.6), grid33)
    cfg = RattleConfig.for_grid(grid33)
    forward, _ = evolve(start, cfg, grid_force(grid33), 100)
    flipped = SimState(q=forward.q, p=forward.p.scaled(-1.0))
    back, _ = evolve(flipped, cfg, grid_force(grid33), 100)
    for a, b in zip(back.q.components(), start.q.components()):
        np.testing.assert_allclose(a, b, atol=1e-9)
    for a, b in zip(back.p.scaled(-1.0).components(), start.p.components()):
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_second_order_in_time(grid33):
    start = build_initial_state(InitialDataParams(A=0.6), grid33)
    t_end = 0.25

    def run(divisor):
        dt = grid33.h / divisor
        final, _ = evolve(start, RattleConfig(dt=dt), grid_force(grid33), round(t_end / dt))
        return final.q.w

    reference = run(64)
    coarse = np.max(np.abs(run(8) - reference))
    fine = np.max(np.abs(run(16) - reference))
    assert 1.7 <= math.log2(coarse / fine) <= 2.3


def test_static_solution_drifts_only_by_discretisation_error():
    g = Grid(65)
    st = static_state(g)
    final, integ = evolve(st, RattleConfig.for_grid(g), grid_force(g), 100)
    x, y = g.coordinates()
    interior = (x <= 0.5) & (y <= 0.5)
    assert float(np.max(np.abs(final.q.w - st.q.w)[interior])) < 1e-4
    assert integ.worst_constraint <= 1e-12


def test_projection_failure_on_overlong_drift():
    state = rotor_state(1000.0)
    with pytest.raises(ProjectionFailure) as info:
        rattle_step(state, RattleConfig(dt=0.01), free_force)
    assert info.value.failed_points == 1
    assert not info.value.report.ok


def test_project_to_constraint_normalises_and_tangents(grid17, rng):
    q = Field3(*(rng.uniform(0.5, 1.5, grid17.shape) for _ in range(3)))
    p = Field3(*(rng.standard_normal(grid17.shape) for _ in range(3)))
    q_hat, p_tan = project_to_constraint(q, p)
    assert np.max(np.abs(constraint_residual(q_hat))) <= 1e-12
    assert np.max(np.abs(q_hat.dot(p_tan))) <= 1e-12


def test_project_to_constraint_rejects_collapsed_points(grid17):
    zeros = np.zeros(grid17.shape)
    with pytest.raises(DomainError):
        project_to_constraint(Field3(zeros, zeros, zeros), Field3.zeros_like(zeros))


def test_integrator_restore_continues_counters(grid33):
    state = build_initial_state(InitialDataParams(A=0.6), grid33)
    cfg = RattleConfig.for_grid(grid33)
    halfway, first = evolve(state, cfg, grid_force(grid33), 10)
    _, straight = evolve(state, cfg, grid_force(grid33), 20)

    second = RattleIntegrator(cfg, grid_force(grid33))
    second.restore(first.get_status())
    for _ in range(10):
        halfway, _ = second.step(halfway)
    assert second.get_status() == straight.get_status()
