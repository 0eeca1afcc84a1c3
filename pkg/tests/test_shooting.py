import math

import numpy as np
import pytest

from app.core.exceptions import InvalidArgumentError
from app.handlers.shooting import (
    LEFT,
    RIGHT,
    characteristic,
    characteristic_derivative,
    count_sign_changes,
    integrate_initial_value,
    oscillation_count,
    shoot_left,
    shoot_right,
    shoot_variational,
    unscaled,
    wronskian,
)
from tests.helpers import build_problem, free_lambda

PI2 = math.pi ** 2


def test_free_left_shot_at_first_eigenvalue(free_problem):
    sol = shoot_left(free_problem, PI2)
    x = free_problem.grid.nodes
    np.testing.assert_allclose(sol.y, np.sin(math.pi * x) / math.pi, atol=1e-10)
    assert abs(sol.terminal_value) < 1e-10
    assert sol.direction == LEFT


def test_free_shots_at_zero(free_problem):
    x = free_problem.grid.nodes
    phi = shoot_left(free_problem, 0.0)
    psi = shoot_right(free_problem, 0.0)
    # linear solutions are exact for RK4; only roundoff accumulates over the march
    np.testing.assert_allclose(phi.y, x, atol=1e-12)
    np.testing.assert_allclose(psi.y, 1.0 - x, atol=1e-12)
    assert phi.terminal_value == pytest.approx(1.0, abs=1e-12)
    assert psi.terminal_value == pytest.approx(1.0, abs=1e-12)
    assert psi.direction == RIGHT


def test_right_shot_closed_forms(free_problem):
    psi = shoot_right(free_problem, PI2)
    assert abs(psi.terminal_value) < 1e-10
    psi = shoot_right(free_problem, PI2 / 4.0)
    assert psi.terminal_value == pytest.approx(2.0 / math.pi, abs=1e-10)


def test_interaction_shot_vanishes_at_perturbed_eigenvalue(free_problem):
    lam = free_lambda(0.5, 0.1)
    assert lam == pytest.approx(9.6686, abs=1e-4)
    sol = shoot_left(free_problem.with_interaction(0.5, 0.1), lam)
    assert abs(sol.terminal_value) < 1e-9


@pytest.mark.parametrize("t", [0.5, 0.3137])
def test_jump_law_at_interaction(free_problem, t):
    sol = shoot_left(free_problem.with_interaction(t, 0.2), 7.0)
    (rec,) = sol.interfaces
    assert rec.t == pytest.approx(t, abs=1e-14)
    scale = float(np.max(np.abs(sol.y)))
    assert abs((rec.yprime_minus - rec.yprime_plus) - 0.2 * rec.y) <= 1e-10 * scale
    assert abs(rec.jump_residual) <= 1e-10 * scale


def test_right_shot_records_the_same_jump(free_problem):
    sol = shoot_right(free_problem.with_interaction(0.3137, 0.2), 7.0)
    (rec,) = sol.interfaces
    assert abs(rec.jump_residual) <= 1e-10 * float(np.max(np.abs(sol.y)))


def test_interaction_off_node_is_not_snapped(free_problem):
    # 0.3137 lies between nodes of the 801-point grid
    on_node = shoot_left(free_problem.with_interaction(0.31375, 0.1), 9.0).terminal_value
    off_node = shoot_left(free_problem.with_interaction(0.3137, 0.1), 9.0).terminal_value
    assert on_node != off_node


@pytest.mark.parametrize("lam", [0.0, 5.0, PI2, 30.0])
def test_wronskian_is_constant(lam):
    problem = build_problem("cos:5,1+affine:0,3").with_interaction(0.42, 0.07)
    phi = shoot_left(problem, lam)
    psi = shoot_right(problem, lam)
    nodes = problem.grid.nodes
    values = np.array([wronskian(phi, psi, x) for x in nodes[::10]])
    w0 = wronskian(phi, psi, 0.0)
    assert np.max(np.abs(values - w0)) <= 1e-9 * (1.0 + abs(w0))
    assert w0 == pytest.approx(-psi.value_at(0.0), abs=1e-14)
    # Delta(lambda) = -phi(1, lambda)
    assert w0 == pytest.approx(-characteristic(problem, lam), abs=1e-9 * (1.0 + abs(w0)))


def test_wronskian_closed_forms(free_problem):
    phi = shoot_left(free_problem, 0.0)
    psi = shoot_right(free_problem, 0.0)
    for x in (0.0, 0.25, 0.8, 1.0):
        assert wronskian(phi, psi, x) == pytest.approx(-1.0, abs=1e-13)
    phi = shoot_left(free_problem, PI2)
    psi = shoot_right(free_problem, PI2)
    assert abs(wronskian(phi, psi, 0.4)) < 1e-10


def test_wronskian_rejects_mismatched_lambda(free_problem):
    with pytest.raises(InvalidArgumentError):
        wronskian(shoot_left(free_problem, 1.0), shoot_right(free_problem, 2.0), 0.5)


def test_characteristic_closed_forms():
    free = build_problem(n_points=2001)
    for m in (1, 2, 3):
        assert abs(characteristic(free, m * m * PI2)) < 1e-10
    assert characteristic(free, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert abs(characteristic(build_problem("const:2", n_points=2001), PI2 + 2.0)) < 1e-10


def test_characteristic_derivative_closed_forms(free_problem):
    assert characteristic_derivative(free_problem, PI2) == pytest.approx(-1.0 / (2.0 * PI2), rel=1e-8)
    assert characteristic_derivative(free_problem, 0.0) == pytest.approx(-1.0 / 6.0, rel=1e-8)


@pytest.mark.parametrize("lam", [-50.0, -3.0, 12.0, 75.0, 200.0])
def test_characteristic_derivative_matches_finite_differences(cosine_problem, lam):
    step = 1e-5 * (1.0 + abs(lam))
    fd = (characteristic(cosine_problem, lam + step) - characteristic(cosine_problem, lam - step)) / (2.0 * step)
    exact = characteristic_derivative(cosine_problem, lam)
    assert exact == pytest.approx(fd, rel=1e-6, abs=1e-12)


def test_variational_solution_starts_at_rest(free_problem):
    _, var = shoot_variational(free_problem, 5.0, RIGHT)
    assert var.y[-1] == 0.0
    assert var.yprime[-1] == 0.0


def test_sign_change_counts(free_problem):
    assert count_sign_changes(shoot_left(free_problem, 2.25 * PI2)) == 1
    assert count_sign_changes(shoot_left(free_problem, 0.5 * PI2)) == 0
    assert count_sign_changes(shoot_left(free_problem, 9.0 * PI2 + 1.0)) == 3


def test_oscillation_count_indexes_eigenvalues(free_problem):
    assert oscillation_count(shoot_left(free_problem, PI2 - 0.1)) == 0
    assert oscillation_count(shoot_left(free_problem, PI2 + 0.1)) == 1
    assert oscillation_count(shoot_left(free_problem, 4.0 * PI2 + 0.1)) == 2


def test_probe_values_are_exact_between_nodes(free_problem):
    sol = shoot_left(free_problem, 4.0, probes=(0.12345,))
    rho = 2.0
    y, yp = sol.state_at(0.12345)
    assert y == pytest.approx(math.sin(rho * 0.12345) / rho, abs=1e-12)
    assert yp == pytest.approx(math.cos(rho * 0.12345), abs=1e-12)


def test_general_initial_data_and_atoms(free_problem):
    sol = integrate_initial_value(
        free_problem.q, free_problem.w, [(0.5, 1.0)], 0.0, 0.0, 1.0
    )
    assert sol.terminal_value == pytest.approx(1.25, abs=1e-13)


def test_overflow_guard_keeps_sign_information(free_problem):
    sol = shoot_left(free_problem, -1e6)
    assert sol.scale_exponent >= 1
    assert np.all(np.isfinite(sol.y))
    assert unscaled(sol.terminal_value, sol.scale_exponent) > 0.0
    assert oscillation_count(sol) == 0


def test_fourth_order_grid_convergence():
    values = []
    for n in (101, 201, 401):
        problem = build_problem("affine:1,3", n_points=n)
        values.append(characteristic(problem, 20.0))
    ratio = abs(values[0] - values[1]) / abs(values[1] - values[2])
    assert math.log2(ratio) >= 3.5
