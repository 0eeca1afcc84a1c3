#!/usr/bin/env python3
"""
Dirichlet eigenvalues and eigenfunctions

The m-th eigenvalue is bracketed with the oscillation count of the left
shooting solution (number of eigenvalues below lambda), narrowed by bisection
and polished with a few secant steps on F(lambda) = phi(1, lambda).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from app.core.exceptions import ConsistencyError, EigenvalueSearchError, InvalidArgumentError
from app.handlers.shooting import (
    LEFT,
    InterfaceRecord,
    ShotSolution,
    count_sign_changes,
    oscillation_count,
    shoot_left,
    shoot_variational,
    unscaled,
)
from app.models.coefficients import CoefficientFunction
from app.models.problem import DirichletProblem

logger = logging.getLogger(__name__)

BISECTION_WIDTH = 1e-9
SECANT_STEPS = 3
MAX_SCAN_STEPS = 20000
MAX_DOUBLINGS = 60
SIMPLICITY_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class EigenResult:
    index: int
    lambda_m: float
    eigenfunction: ShotSolution
    zero_count: int
    char_derivative: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "lambda": self.lambda_m,
            "zero_count": self.zero_count,
            "char_derivative": self.char_derivative,
        }


@dataclass(frozen=True)
class SimplicityReport:
    passed: bool
    lhs: float
    rhs: float
    relative_residual: float
    char_derivative: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relative_residual": self.relative_residual,
            "char_derivative": self.char_derivative,
        }


def scan_lower_bound(problem: DirichletProblem) -> float:
    return -(1.0 + problem.q.max_abs()) / float(np.min(problem.w.values)) - 1.0


def weighted_norm_squared(sol: ShotSolution, w: CoefficientFunction) -> float:
    """Simpson value of the integral of w*y^2, with the interface points as extra nodes"""
    x = sol.grid.nodes
    y = sol.y
    extra = [rec for rec in sol.interfaces if np.min(np.abs(x - rec.t)) > 1e-14]
    if extra:
        x = np.concatenate([x, [rec.t for rec in extra]])
        y = np.concatenate([y, [rec.y for rec in extra]])
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
    return float(simpson(w(x) * y ** 2, x=x))


def normalize_shot(sol: ShotSolution, w: CoefficientFunction) -> ShotSolution:
    """Scale so that the integral of w*y^2 is 1 and y > 0 just right of 0"""
    norm = math.sqrt(weighted_norm_squared(sol, w))
    if norm == 0.0 or not math.isfinite(norm):
        raise ConsistencyError("cannot normalize a solution with zero or infinite norm")
    tol = 1e-13 * float(np.max(np.abs(sol.y)))
    leading = next((v for v in sol.y[1:] if abs(v) > tol), sol.yprime[0])
    factor = math.copysign(1.0, leading) / norm
    return ShotSolution(
        grid=sol.grid,
        y=sol.y * factor,
        yprime=sol.yprime * factor,
        direction=sol.direction,
        lam=sol.lam,
        probes=tuple((x, v * factor, d * factor) for x, v, d in sol.probes),
        scale_exponent=0,
        sign_changes=sol.sign_changes,
        interfaces=tuple(
            InterfaceRecord(rec.t, rec.mass, rec.y * factor, rec.yprime_minus * factor, rec.yprime_plus * factor)
            for rec in sol.interfaces
        ),
    )


def _bracket(
    problem: DirichletProblem, m: int, bracket_hint: Optional[Tuple[float, float]], scan_start: Optional[float]
) -> Tuple[float, float]:
    def count(lam: float) -> int:
        return oscillation_count(shoot_left(problem, lam))

    if bracket_hint is not None:
        a, b = sorted(float(v) for v in bracket_hint)
        if count(a) <= m - 1 and count(b) >= m:
            return a, b
        logger.warning(f"Bracket hint [{a}, {b}] does not isolate eigenvalue {m}, scanning instead")

    step = 0.25 * (2 * m + 1) * math.pi ** 2 / float(np.min(problem.w.values))
    lo = None
    if scan_start is not None and count(scan_start) <= m - 1:
        lo = float(scan_start)
    if lo is None:
        lo = scan_lower_bound(problem)
        doublings = 0
        while count(lo) > 0:
            doublings += 1
            if doublings > MAX_DOUBLINGS:
                raise EigenvalueSearchError(
                    "could not find a lambda below the first eigenvalue",
                    {"index": m, "lambda_low": lo},
                )
            lo = 2.0 * lo - 1.0
            logger.debug(f"Expanded scan lower bound to {lo}")

    hi = lo + step
    steps = 0
    while True:
        c = count(hi)
        if c >= m:
            break
        lo, hi = hi, hi + step
        steps += 1
        if steps > MAX_SCAN_STEPS:
            raise EigenvalueSearchError(
                f"no bracket for eigenvalue {m} within {MAX_SCAN_STEPS} scan steps",
                {"index": m, "last_lambda": hi, "last_count": c, "step": step},
            )
    return lo, hi


def eigenvalue(
    problem: DirichletProblem,
    m: int,
    bracket_hint: Optional[Tuple[float, float]] = None,
    scan_start: Optional[float] = None,
) -> float:
    """
    The m-th Dirichlet eigenvalue.

    Args:
        problem: Problem to solve
        m: Index, 1 for the lowest eigenvalue
        bracket_hint: Optional interval believed to contain exactly lambda_m as the
            only eigenvalue crossing; ignored (with a warning) if it does not
        scan_start: Optional lambda known to lie below lambda_m

    Returns:
        lambda_m
    """
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise InvalidArgumentError(f"eigenvalue index must be a positive integer, got {m!r}")
    m = int(m)
    lo, hi = _bracket(problem, m, bracket_hint, scan_start)

    shot_lo, shot_hi = shoot_left(problem, lo), shoot_left(problem, hi)
    while hi - lo > BISECTION_WIDTH:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        shot = shoot_left(problem, mid)
        if oscillation_count(shot) >= m:
            hi, shot_hi = mid, shot
        else:
            lo, shot_lo = mid, shot

    a, fa = lo, unscaled(shot_lo.terminal_value, shot_lo.scale_exponent)
    b, fb = hi, unscaled(shot_hi.terminal_value, shot_hi.scale_exponent)
    if fa == 0.0:
        return a
    for _ in range(SECANT_STEPS):
        if fb == 0.0 or fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        if not lo <= c <= hi:
            break
        shot = shoot_left(problem, c)
        a, fa = b, fb
        b, fb = c, unscaled(shot.terminal_value, shot.scale_exponent)
    logger.debug(f"Eigenvalue {m}: {b!r} (bracket [{lo!r}, {hi!r}], F={fb:.3e})")
    return b


def eigenfunction(
    problem: DirichletProblem,
    m: int,
    bracket_hint: Optional[Tuple[float, float]] = None,
    scan_start: Optional[float] = None,
) -> EigenResult:
    """Eigenvalue, normalized eigenfunction, zero count and F'(lambda_m)"""
    lam = eigenvalue(problem, m, bracket_hint=bracket_hint, scan_start=scan_start)
    shot, var = shoot_variational(problem, lam, LEFT)
    normalized = normalize_shot(shot, problem.w)
    zero_count = count_sign_changes(normalized)
    if zero_count != m - 1:
        raise ConsistencyError(f"eigenfunction {m} has {zero_count} interior sign changes, expected {m - 1}")
    return EigenResult(
        index=m,
        lambda_m=lam,
        eigenfunction=normalized,
        zero_count=zero_count,
        char_derivative=unscaled(var.terminal_value, var.scale_exponent),
    )


def compute_spectrum(problem: DirichletProblem, count: int) -> List[EigenResult]:
    """lambda_1 .. lambda_count with eigenfunctions, each scan starting at the previous eigenvalue"""
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise InvalidArgumentError(f"eigenvalue count must be a positive integer, got {count!r}")
    results: List[EigenResult] = []
    previous = None
    for m in range(1, int(count) + 1):
        result = eigenfunction(problem, m, scan_start=previous)
        results.append(result)
        previous = result.lambda_m
        logger.info(f"λ_{m} = {result.lambda_m:.12g}")
    return results


def verify_simplicity(result: EigenResult, problem: DirichletProblem) -> SimplicityReport:
    """
    Check the boundary identity for the solution started at x=0 with data (0,1):

        integral of w*phi^2 = u(1) phi'(1) - phi(1) u'(1),   u = d(phi)/d(lambda)

    The left side is positive, so the identity shows F'(lambda_m) = u(1) is nonzero.
    """
    shot, var = shoot_variational(problem, result.lambda_m, LEFT)
    lhs = weighted_norm_squared(shot, problem.w)
    rhs = var.terminal_value * shot.terminal_slope - shot.terminal_value * var.terminal_slope
    residual = abs(lhs - rhs) / max(abs(lhs), np.finfo(float).tiny)
    passed = residual <= SIMPLICITY_TOLERANCE and abs(result.char_derivative) > 1e-10 * max(1.0, abs(lhs))
    if not passed:
        logger.warning(f"Simplicity check failed for λ_{result.index}: residual {residual:.3e}")
    return SimplicityReport(
        passed=bool(passed),
        lhs=lhs,
        rhs=rhs,
        relative_residual=float(residual),
        char_derivative=result.char_derivative,
    )
