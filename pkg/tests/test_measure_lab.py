import logging
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from app.analysis.measure_lab import (
    DEFAULT_N_LIST,
    AtomicMeasure,
    bump_family,
    mde_solve,
    weakstar_convergence_study,
)
from app.core.exceptions import InvalidArgumentError, InvalidDataError, ResolutionError
from app.handlers.shooting import shoot_left
from app.models.grid import make_uniform_grid
from tests.helpers import FAST_GRID, build_problem

FAST = make_uniform_grid(FAST_GRID)


def test_free_motion(free_problem):
    sol = mde_solve(AtomicMeasure(free_problem.q), 0.0, free_problem.w, 1.0, 2.0)
    np.testing.assert_allclose(sol.y, 1.0 + 2.0 * sol.grid.nodes, atol=1e-13)
    np.testing.assert_allclose(sol.ybullet, 2.0, atol=1e-13)


def test_single_atom_kinks_the_solution(free_problem):
    sol = mde_solve(AtomicMeasure(free_problem.q, ((0.5, 1.0),)), 0.0, free_problem.w, 0.0, 1.0)
    assert sol.y[-1] == pytest.approx(1.25, abs=1e-13)
    (rec,) = sol.interfaces
    assert rec.yprime_minus == pytest.approx(1.0, abs=1e-13)
    assert rec.yprime_plus == pytest.approx(1.5, abs=1e-13)
    # y' is the right derivative at the atom
    assert sol.ybullet[400] == pytest.approx(1.5, abs=1e-13)
    assert all(abs(v) <= 1e-13 for v in sol.jump_residuals())


def test_interaction_problem_is_a_measure_problem(cosine_problem):
    problem = cosine_problem.with_interaction(0.3137, 0.07).with_interaction(0.8, 0.02)
    mu = AtomicMeasure.from_problem(problem)
    assert mu.atoms == ((0.3137, -0.07), (0.8, -0.02))
    sol = mde_solve(mu, 14.0, problem.w, 0.0, 1.0)
    np.testing.assert_array_equal(sol.y, shoot_left(problem, 14.0).y)
    assert len(sol.jump_residuals()) == 2


def test_measure_frame_and_variation(free_problem):
    mu = AtomicMeasure.from_problem(free_problem.with_interaction(0.5, 0.1))
    assert mu.total_variation() == pytest.approx(0.1)
    frame = mde_solve(mu, 1.0, free_problem.w, 0.0, 1.0).to_frame()
    assert list(frame.columns) == ["x", "y", "ybullet"]
    assert len(frame) == FAST_GRID


def test_measure_validation(free_problem):
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure(free_problem.q, ((1.0, 0.1),))
    with pytest.raises(InvalidArgumentError):
        AtomicMeasure(free_problem.q, ((0.6, 0.1), (0.4, 0.1)))
    with pytest.raises(InvalidDataError):
        AtomicMeasure(free_problem.q, ((0.5, float("inf")),))


def test_widest_bump_is_flat():
    bump = bump_family(0.5, 1, FAST)
    np.testing.assert_allclose(bump.values, 1.0, atol=1e-12)
    assert bump.name == "bump_1"


def test_bump_height_and_mass():
    bump = bump_family(0.5, 10, FAST)
    assert float(np.max(bump.values)) == pytest.approx(10.0, abs=1e-12)
    assert float(trapezoid(bump.values, FAST.nodes)) == pytest.approx(1.0, abs=1e-12)
    outside = np.abs(FAST.nodes - 0.5) > 0.05 + 1e-12
    assert np.all(bump.values[outside] == 0.0)


def test_off_centre_bump_uses_the_near_endpoint():
    bump = bump_family(0.2, 4, FAST)
    support = FAST.nodes[bump.values > 0.0]
    assert support.min() >= 0.15 - 1e-12
    assert support.max() <= 0.25 + 1e-12
    moment = float(trapezoid((FAST.nodes - 0.2) ** 2 * bump.values, FAST.nodes))
    assert moment == pytest.approx(0.05 ** 2 / 3.0, rel=1e-2)


def test_unresolved_bump_is_rejected():
    with pytest.raises(ResolutionError):
        bump_family(0.5, 400, FAST)
    with pytest.raises(InvalidArgumentError):
        bump_family(0.0, 4, FAST)
    with pytest.raises(InvalidArgumentError):
        bump_family(0.5, 0, FAST)


def test_zero_coupling_study_has_no_gap(free_problem):
    frame = weakstar_convergence_study(free_problem.q, free_problem.w, 0.5, 0.0, [4, 8])
    assert frame["gap"].tolist() == [0.0, 0.0]
    assert frame.attrs["lambda_reference"] == frame.attrs["lambda1"]


def test_bumps_approach_the_point_interaction(free_problem, caplog):
    with caplog.at_level(logging.WARNING):
        frame = weakstar_convergence_study(free_problem.q, free_problem.w, 0.5, 0.1, [4, 8, 16])
    assert list(frame.columns) == ["n", "lambda_n", "gap"]
    gaps = frame["gap"].to_numpy()
    assert np.all(np.diff(gaps) < 0.0)
    assert np.all(frame["lambda_n"] <= frame.attrs["lambda1"])
    assert frame.attrs["lambda_reference"] == pytest.approx(9.6686, abs=1e-4)
    assert "not monotone" not in caplog.text


def test_study_arguments(free_problem):
    with pytest.raises(InvalidArgumentError):
        weakstar_convergence_study(free_problem.q, free_problem.w, 0.5, -0.1)
    with pytest.raises(InvalidArgumentError):
        weakstar_convergence_study(free_problem.q, free_problem.w, 0.5, 0.1, [])
    with pytest.raises(ResolutionError):
        weakstar_convergence_study(free_problem.q, free_problem.w, 0.5, 0.1, [400])


@pytest.mark.slow
def test_default_study_converges():
    problem = build_problem(n_points=2001)
    frame = weakstar_convergence_study(problem.q, problem.w, 0.5, 0.1, DEFAULT_N_LIST)
    gaps = frame["gap"].to_numpy()
    assert gaps[-1] < 1e-3
    assert np.all(np.diff(gaps) < 0.0)
    assert math.isclose(frame.attrs["lambda1"], math.pi ** 2, rel_tol=1e-9)
