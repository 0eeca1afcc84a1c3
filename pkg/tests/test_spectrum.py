import logging
import math

import numpy as np
import pytest

from app.core.exceptions import EigenvalueSearchError, InvalidArgumentError
from app.handlers import spectrum
from app.handlers.spectrum import (
    compute_spectrum,
    eigenfunction,
    eigenvalue,
    normalize_shot,
    verify_simplicity,
    weighted_norm_squared,
)
from tests.helpers import build_problem, free_lambda

PI2 = math.pi ** 2


@pytest.mark.parametrize("m", [1, 2, 3])
def test_free_eigenvalues(free_problem, m):
    assert eigenvalue(free_problem, m) == pytest.approx(m * m * PI2, rel=1e-9)


def test_constant_potential_shifts_spectrum(shifted_problem):
    assert eigenvalue(shifted_problem, 1) == pytest.approx(PI2 + 2.0, rel=1e-9)


def test_shift_law_for_variable_potential(cosine_problem):
    shifted = build_problem("cos:5,1+affine:0,3+const:-4")
    for m in (1, 2):
        assert eigenvalue(shifted, m) - eigenvalue(cosine_problem, m) == pytest.approx(-4.0, abs=1e-7)


def test_doubled_weight_halves_eigenvalues():
    problem = build_problem(weight="const:2")
    assert eigenvalue(problem, 1) == pytest.approx(PI2 / 2.0, rel=1e-9)


def test_interaction_lowers_first_eigenvalue(free_problem):
    lam = eigenvalue(free_problem.with_interaction(0.5, 0.1), 1)
    assert lam == pytest.approx(free_lambda(0.5, 0.1), abs=1e-8)
    assert lam < PI2


def test_first_eigenfunction_is_normalized_sine(free_problem):
    result = eigenfunction(free_problem, 1)
    x = free_problem.grid.nodes
    np.testing.assert_allclose(result.eigenfunction.y, math.sqrt(2.0) * np.sin(math.pi * x), atol=1e-6)
    assert result.zero_count == 0
    assert result.char_derivative == pytest.approx(-1.0 / (2.0 * PI2), rel=1e-6)


def test_second_eigenfunction_changes_sign_at_midpoint(free_problem):
    result = eigenfunction(free_problem, 2)
    y = result.eigenfunction.y
    x = free_problem.grid.nodes
    assert result.zero_count == 1
    i = int(np.flatnonzero(np.sign(y[1:-1]) != np.sign(y[2:]))[0]) + 1
    if y[i] == 0.0:
        zero = x[i]
    else:
        zero = x[i] - y[i] * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    assert zero == pytest.approx(0.5, abs=1e-6)


def test_eigenfunctions_start_positive(cosine_problem):
    for result in compute_spectrum(cosine_problem, 3):
        assert result.eigenfunction.y[1] > 0.0
        assert weighted_norm_squared(result.eigenfunction, cosine_problem.w) == pytest.approx(1.0, abs=1e-10)


def test_zero_counts_follow_index(cosine_problem):
    results = compute_spectrum(cosine_problem, 4)
    assert [r.zero_count for r in results] == [0, 1, 2, 3]
    values = [r.lambda_m for r in results]
    assert values == sorted(values)
    assert len(set(values)) == 4


def test_simplicity_identity_holds(cosine_problem):
    for result in compute_spectrum(cosine_problem, 5):
        report = verify_simplicity(result, cosine_problem)
        assert report.passed, report.to_dict()
        assert report.char_derivative != 0.0


def test_simplicity_identity_on_free_problem(free_problem):
    report = verify_simplicity(eigenfunction(free_problem, 1), free_problem)
    assert report.lhs == pytest.approx(1.0 / (2.0 * PI2), rel=1e-8)
    assert report.relative_residual <= 1e-6


def test_normalization_is_idempotent(cosine_problem):
    result = eigenfunction(cosine_problem, 2)
    again = normalize_shot(result.eigenfunction, cosine_problem.w)
    np.testing.assert_allclose(again.y, result.eigenfunction.y, atol=1e-12)


def test_norm_counts_interface_points(free_problem):
    problem = free_problem.with_interaction(0.3137, 0.1)
    result = eigenfunction(problem, 1)
    assert weighted_norm_squared(result.eigenfunction, problem.w) == pytest.approx(1.0, abs=1e-10)


def test_good_bracket_hint_is_used(free_problem):
    assert eigenvalue(free_problem, 2, bracket_hint=(30.0, 50.0)) == pytest.approx(4.0 * PI2, rel=1e-9)


def test_bad_bracket_hint_falls_back_to_scan(free_problem, caplog):
    with caplog.at_level(logging.WARNING, logger="app.handlers.spectrum"):
        lam = eigenvalue(free_problem, 1, bracket_hint=(20.0, 30.0))
    assert lam == pytest.approx(PI2, rel=1e-9)
    assert "does not isolate" in caplog.text


def test_negative_first_eigenvalue_is_found():
    problem = build_problem("const:-30")
    assert eigenvalue(problem, 1) == pytest.approx(PI2 - 30.0, rel=1e-9)


@pytest.mark.parametrize("m", [0, -1, 1.5, True])
def test_bad_index_is_rejected(free_problem, m):
    with pytest.raises(InvalidArgumentError):
        eigenvalue(free_problem, m)


def test_bad_count_is_rejected(free_problem):
    with pytest.raises(InvalidArgumentError):
        compute_spectrum(free_problem, 0)


def test_exhausted_scan_reports_diagnostics(free_problem, monkeypatch):
    monkeypatch.setattr(spectrum, "MAX_SCAN_STEPS", 0)
    with pytest.raises(EigenvalueSearchError) as excinfo:
        eigenvalue(free_problem, 3)
    assert excinfo.value.diagnostics["index"] == 3
    assert excinfo.value.exit_code == 1


@pytest.mark.parametrize(
    "problem",
    [
        build_problem(),
        build_problem("const:2"),
        build_problem("step:20,0.4"),
        build_problem().with_interaction(0.3, 0.1),
    ],
    ids=["zero", "constant", "step", "interaction"],
)
def test_mth_eigenfunction_has_m_minus_one_zeros(problem):
    results = compute_spectrum(problem, 6)
    assert [r.zero_count for r in results] == [0, 1, 2, 3, 4, 5]
    values = [r.lambda_m for r in results]
    assert all(b > a for a, b in zip(values, values[1:]))
