#!/usr/bin/env python3
"""
Potential reconstruction from the first eigenvalue function

    phi0(t) = sqrt(-d lambda(t, 0)/dr)
    q(t)    = phi0''(t)/phi0(t) + lambda_1 w(t)      on [margin, 1 - margin]

plus a validator that decides whether a table lambda(t, r) can be the first
eigenvalue function of some potential.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.signal import savgol_filter

from app.analysis.fef import LambdaSurface
from app.core.exceptions import (
    DataIntegrityError,
    InvalidArgumentError,
    ReconstructionError,
    SurfaceContractError,
)
from app.handlers.shooting import shoot_left, shoot_right, unscaled
from app.handlers.spectrum import eigenvalue
from app.models.coefficients import CoefficientFunction
from app.models.grid import Grid
from app.models.problem import DirichletProblem

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.05
POSITIVE_SLOPE_TOLERANCE = 1e-10
CLIP_TOLERANCE = 1e-12
MAX_VANISHING_RUN = 3
DEFAULT_VALIDATION_POINTS = 201
DEFAULT_VALIDATION_R = (0.0, 5e-4, 1e-3, 0.01, 0.05, 0.1)
VALIDATION_R_MAX = 0.1
SMOOTHNESS_FACTOR = 1e3
SLOPE_INTEGRAL_TOLERANCE = 5e-3
EXTREMAL_TOLERANCE = 1e-9
CONSISTENCY_TOLERANCE = 1e-6
EXTENSION_DEGREE = 3
CONDITIONS = ("condition_i", "condition_ii", "condition_iii", "condition_iv")


@dataclass(frozen=True, eq=False)
class SlopeProfile:
    t_grid: np.ndarray
    slope: np.ndarray
    order: int


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    t_grid: np.ndarray
    phi0: np.ndarray
    interior_t: np.ndarray
    q_hat: np.ndarray
    lambda1: float
    interior_margin: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        """t, phi0, q_hat on the full t-grid; q_hat is NaN outside the interior"""
        q_full = np.full(self.t_grid.shape, np.nan)
        q_full[np.searchsorted(self.t_grid, self.interior_t)] = self.q_hat
        return pd.DataFrame({"t": self.t_grid, "phi0": self.phi0, "q_hat": q_full})

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "lambda1": self.lambda1,
            "interior_margin": self.interior_margin,
            "t_grid": self.t_grid.tolist(),
            "phi0": self.phi0.tolist(),
            "interior_t": self.interior_t.tolist(),
            "q_hat": self.q_hat.tolist(),
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True)
class ConditionResult:
    passed: bool
    message: str
    residuals: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "message": self.message, "residuals": self.residuals}


@dataclass(frozen=True)
class ValidationReport:
    conditions: Dict[str, ConditionResult]
    verdict: str
    reason: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    @property
    def failed_conditions(self) -> List[str]:
        return [name for name in CONDITIONS if not self.conditions[name].passed]

    def to_json_dict(self) -> Dict[str, Any]:
        payload = {name: self.conditions[name].to_dict() for name in CONDITIONS}
        payload["verdict"] = self.verdict
        payload["reason"] = self.reason
        return payload


# -- slopes ----------------------------------------------------------------


def _raw_slope(surface: LambdaSurface, order: Optional[int]) -> SlopeProfile:
    if not surface.has_zero_column:
        raise SurfaceContractError("surface has no r=0 row (lambda_1 is unknown)")
    positive = surface.r_list[surface.r_list > 0.0]
    if positive.size == 0:
        raise SurfaceContractError("surface needs at least one column with r > 0")
    r_min = float(positive[0])
    doubled = positive[np.isclose(positive, 2.0 * r_min, rtol=1e-9, atol=0.0)]
    if order is None:
        order = 2 if doubled.size else 1
    lambda1 = surface.lambda1
    if order == 2:
        if doubled.size == 0:
            raise SurfaceContractError(f"order-2 slope needs columns r and r/2; smallest r is {r_min}")
        r = float(doubled[0])
        slope = (4.0 * (surface.column(r_min) - lambda1) - (surface.column(r) - lambda1)) / r
    elif order == 1:
        slope = (surface.column(r_min) - lambda1) / r_min
    else:
        raise InvalidArgumentError(f"slope extrapolation order must be 1 or 2, got {order}")
    slope = np.array(slope, dtype=float)
    # lambda(0, r) = lambda(1, r) = lambda_1 by definition
    slope[(surface.t_grid <= 0.0) | (surface.t_grid >= 1.0)] = 0.0
    return SlopeProfile(surface.t_grid, slope, int(order))


def extract_slope(surface: LambdaSurface, order: Optional[int] = None) -> SlopeProfile:
    """
    Estimate d lambda(t, 0)/dr from the r=0 row and the smallest couplings.

    Order 1 is the forward difference at the smallest r. Order 2 (used whenever
    columns r and r/2 exist) cancels the linear error term.
    """
    profile = _raw_slope(surface, order)
    worst = int(np.argmax(profile.slope))
    if profile.slope[worst] > POSITIVE_SLOPE_TOLERANCE:
        raise DataIntegrityError(
            f"positive slope {profile.slope[worst]:.3e} at t={profile.t_grid[worst]:.6g}; "
            "lambda(t, r) must decrease in r"
        )
    return profile


def _slope_integrals(t: np.ndarray, slope: np.ndarray, w: CoefficientFunction) -> Tuple[float, float]:
    """(integral of slope, integral of -w*slope) over [0,1], slope = 0 at missing endpoints"""
    if t[0] > 0.0:
        t, slope = np.concatenate([[0.0], t]), np.concatenate([[0.0], slope])
    if t[-1] < 1.0:
        t, slope = np.concatenate([t, [1.0]]), np.concatenate([slope, [0.0]])
    return float(trapezoid(slope, t)), float(trapezoid(-w(t) * slope, t))


# -- reconstruction --------------------------------------------------------


def _longest_run(mask: np.ndarray) -> int:
    best = run = 0
    for flag in mask:
        run = run + 1 if flag else 0
        best = max(best, run)
    return best


def reconstruct(
    surface: LambdaSurface,
    w: CoefficientFunction,
    margin: float = DEFAULT_MARGIN,
    smoothing: int = 0,
    order: Optional[int] = None,
) -> ReconstructionResult:
    """
    Recover q on [margin, 1 - margin].

    Args:
        surface: Table of lambda(t, r) on a uniform t-grid, with an r=0 column
        w: Weight of the problem
        margin: Interior margin delta; the endpoints are never used
        smoothing: k > 0 applies a quadratic least-squares fit over 2k+1 nodes to phi0
        order: Slope extrapolation order (default: 2 when available)

    Returns:
        ReconstructionResult
    """
    t = surface.t_grid
    if t.size < 5:
        raise SurfaceContractError("reconstruction needs at least 5 t-grid points")
    steps = np.diff(t)
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-9 * h:
        raise SurfaceContractError("reconstruction needs a uniform t-grid")
    if not 0.0 < margin < 0.5:
        raise InvalidArgumentError(f"interior margin must lie in (0, 0.5), got {margin}")
    if smoothing < 0 or int(smoothing) != smoothing:
        raise InvalidArgumentError(f"smoothing must be a non-negative integer, got {smoothing}")

    profile = extract_slope(surface, order)
    minus_slope = -profile.slope
    minus_slope[(minus_slope < 0.0) & (minus_slope > -CLIP_TOLERANCE)] = 0.0
    phi0 = np.sqrt(np.maximum(minus_slope, 0.0))
    if smoothing:
        window = 2 * int(smoothing) + 1
        if window > t.size:
            raise InvalidArgumentError(f"smoothing window {window} exceeds the {t.size}-point t-grid")
        phi0 = np.maximum(savgol_filter(phi0, window, 2, mode="interp"), 0.0)

    index = np.arange(t.size)
    within = (t >= margin - 1e-12) & (t <= 1.0 - margin + 1e-12)
    inside = np.flatnonzero(within & (index >= 2) & (index <= t.size - 3))
    if inside.size == 0:
        raise ReconstructionError(f"margin {margin} leaves no room for the 5-point stencil on this t-grid")
    dropped = int(within.sum()) - inside.size
    if dropped:
        logger.info(
            f"ℹ️ {dropped} node(s) of [{margin:g}, {1.0 - margin:g}] lack a full 5-point stencil; "
            f"q_hat covers [{t[inside[0]]:.6g}, {t[inside[-1]]:.6g}]"
        )

    d2 = (
        -phi0[inside - 2] + 16.0 * phi0[inside - 1] - 30.0 * phi0[inside]
        + 16.0 * phi0[inside + 1] - phi0[inside + 2]
    ) / (12.0 * h * h)
    phi_in = phi0[inside]
    vanishing = phi_in <= 0.0
    if _longest_run(vanishing) > MAX_VANISHING_RUN:
        raise ReconstructionError("phi0 vanishes on more than 2 grid cells inside the reconstruction interval")

    t_in = t[inside]
    lambda1 = surface.lambda1
    q_hat = np.empty(t_in.shape)
    good = ~vanishing
    q_hat[good] = d2[good] / phi_in[good] + lambda1 * w(t_in[good])
    if vanishing.any():
        logger.warning(f"⚠️ phi0 vanishes at {int(vanishing.sum())} interior point(s); interpolating q_hat there")
        q_hat[vanishing] = np.interp(t_in[vanishing], t_in[good], q_hat[good])

    unweighted, weighted = _slope_integrals(t, profile.slope, w)
    diagnostics = {
        "slope_order": profile.order,
        "smoothing_window": 2 * int(smoothing) + 1 if smoothing else 0,
        "interior_points": int(t_in.size),
        "min_phi0_interior": float(np.min(phi_in)),
        "vanishing_points": int(vanishing.sum()),
        "slope_integral": unweighted,
        "weighted_slope_integral": weighted,
        "roundtrip_lambda1_error": None,
        "residual_norms": {},
    }
    logger.info(f"✅ Reconstructed q on [{t_in[0]:.4g}, {t_in[-1]:.4g}] ({t_in.size} points)")
    return ReconstructionResult(
        t_grid=t.copy(),
        phi0=phi0,
        interior_t=t_in,
        q_hat=q_hat,
        lambda1=lambda1,
        interior_margin=float(margin),
        diagnostics=diagnostics,
    )


def extend_potential(result: ReconstructionResult, grid: Grid, name: str = "q_hat") -> CoefficientFunction:
    """
    Carry q_hat onto a full grid so a forward problem can be solved.

    Cubic spline inside the reconstruction interval, cubic least-squares
    extrapolation from the adjacent band of width 2*margin outside.
    """
    t_in, q_in = result.interior_t, result.q_hat
    nodes = grid.nodes
    if t_in.size < 2:
        return CoefficientFunction(grid, np.full(nodes.shape, float(q_in[0])), name=name)
    values = CubicSpline(t_in, q_in)(np.clip(nodes, t_in[0], t_in[-1]))
    band = 2.0 * result.interior_margin
    for outside, near in (
        (nodes < t_in[0], t_in <= t_in[0] + band),
        (nodes > t_in[-1], t_in >= t_in[-1] - band),
    ):
        if not outside.any():
            continue
        degree = min(EXTENSION_DEGREE, int(near.sum()) - 1)
        if degree < 1:
            continue
        fit = Polynomial.fit(t_in[near], q_in[near], degree)
        values[outside] = fit(nodes[outside])
    return CoefficientFunction(grid, values, name=name)


def roundtrip_check(
    q_true: CoefficientFunction, result: ReconstructionResult, w: CoefficientFunction
) -> Dict[str, Any]:
    """Interior errors of q_hat against q_true and the lambda_1 of the reconstructed potential"""
    t_in = result.interior_t
    reference = q_true(t_in)
    diff = result.q_hat - reference
    l2 = math.sqrt(float(trapezoid(diff ** 2, t_in))) if t_in.size > 1 else float(abs(diff[0]))
    ref_norm = math.sqrt(float(trapezoid(reference ** 2, t_in))) if t_in.size > 1 else float(abs(reference[0]))
    linf = float(np.max(np.abs(diff)))
    q_ext = extend_potential(result, w.grid)
    lambda1_hat = eigenvalue(DirichletProblem(q_ext, w), 1)
    report = {
        "success": True,
        "l2_error": l2,
        "linf_error": linf,
        "relative_l2_error": l2 / ref_norm if ref_norm > 0.0 else l2,
        "lambda1_reconstructed": lambda1_hat,
        "lambda1_surface": result.lambda1,
        "lambda1_error": abs(lambda1_hat - result.lambda1),
    }
    logger.info(
        f"🔍 Round trip: relative L2 {report['relative_l2_error']:.3e}, "
        f"L∞ {linf:.3e}, λ₁ error {report['lambda1_error']:.3e}"
    )
    return report


# -- validation ------------------------------------------------------------


def tabulate_candidate(
    rule: Callable[[np.ndarray, np.ndarray], np.ndarray],
    t_grid: Sequence[float],
    r_list: Sequence[float],
    name: str = "candidate",
) -> LambdaSurface:
    """Evaluate a closed-form candidate lambda(t, r) on a grid"""
    t = np.asarray(list(t_grid), dtype=float)
    r = np.asarray(list(r_list), dtype=float)
    tt, rr = np.meshgrid(t, r, indexing="ij")
    try:
        values = np.asarray(rule(tt, rr), dtype=float)
        if values.shape != tt.shape:
            values = np.array([[float(rule(a, b)) for b in r] for a in t])
    except (TypeError, ValueError, ArithmeticError) as e:
        raise SurfaceContractError(f"candidate '{name}' cannot be evaluated: {e}") from e
    if not np.all(np.isfinite(values)):
        raise SurfaceContractError(f"candidate '{name}' is not finite on the validation grid")
    zero = np.flatnonzero(r == 0.0)
    if zero.size == 0:
        raise SurfaceContractError("validation grid needs r = 0")
    lambda1 = float(np.mean(values[:, zero[0]]))
    return LambdaSurface(t, r, values, lambda1, {"candidate": name})


def _second_quotients(values: np.ndarray, coords: np.ndarray, axis: int) -> float:
    if coords.size < 3:
        return 0.0
    first = np.diff(values, axis=axis) / np.expand_dims(np.diff(coords), 1 - axis)
    spacing = 0.5 * (coords[2:] - coords[:-2])
    second = np.diff(first, axis=axis) / np.expand_dims(spacing, 1 - axis)
    return float(np.max(np.abs(second)))


def _condition_smoothness(surface: LambdaSurface, scale: float) -> ConditionResult:
    q_t = _second_quotients(surface.values, surface.t_grid, axis=0)
    q_r = _second_quotients(surface.values, surface.r_list, axis=1)
    threshold = SMOOTHNESS_FACTOR * scale
    passed = math.isfinite(q_t) and math.isfinite(q_r) and max(q_t, q_r) <= threshold
    message = "difference quotients bounded" if passed else "difference quotients jump beyond the threshold"
    return ConditionResult(
        passed, message, {"max_second_quotient_t": q_t, "max_second_quotient_r": q_r, "threshold": threshold}
    )


def _condition_slope(profile: SlopeProfile, w: CoefficientFunction) -> ConditionResult:
    t, slope = profile.t_grid, profile.slope
    interior = (t > 0.0) & (t < 1.0)
    max_slope = float(np.max(slope[interior])) if interior.any() else float("nan")
    unweighted, weighted = _slope_integrals(t, slope, w)
    residuals = {
        "max_interior_slope": max_slope,
        "weighted_integral": weighted,
        "unweighted_integral": unweighted,
        "slope": slope.tolist(),
    }
    if not max_slope < 0.0:
        return ConditionResult(False, f"slope is not negative everywhere (max {max_slope:.3e})", residuals)
    if abs(weighted - 1.0) > SLOPE_INTEGRAL_TOLERANCE:
        return ConditionResult(False, f"integral of -w*slope is {weighted:.6g}, expected 1", residuals)
    return ConditionResult(True, "slope negative with unit weighted integral", residuals)


def _condition_extremal(surface: LambdaSurface, scale: float) -> ConditionResult:
    tol = EXTREMAL_TOLERANCE * scale
    drift = float(np.max(np.abs(surface.values[:, 0] - surface.lambda1)))
    ends = (surface.t_grid <= 0.0) | (surface.t_grid >= 1.0)
    endpoint = float(np.max(np.abs(surface.values[ends] - surface.lambda1))) if ends.any() else 0.0
    excess = float(np.max(surface.values - surface.lambda1))
    residuals = {
        "r0_row_deviation": drift,
        "endpoint_deviation": endpoint,
        "endpoints_present": bool(ends.any()),
        "max_excess_over_lambda1": excess,
        "tolerance": tol,
    }
    if drift > tol:
        return ConditionResult(False, "lambda(t, 0) is not constant", residuals)
    if endpoint > tol:
        return ConditionResult(False, "lambda(0, r) or lambda(1, r) differs from lambda_1", residuals)
    if excess > tol:
        return ConditionResult(False, "some lambda(t, r) exceeds lambda_1", residuals)
    return ConditionResult(True, "lambda_1 is the maximum, attained at r=0 and at the endpoints", residuals)


def _sample_indices(t: np.ndarray, count: int = 9) -> List[int]:
    candidates = np.flatnonzero((t >= 0.1 - 1e-12) & (t <= 0.9 + 1e-12))
    if candidates.size == 0:
        return []
    chosen = set(candidates[np.unique(np.linspace(0, candidates.size - 1, count).round().astype(int))].tolist())
    middle = np.flatnonzero(np.isclose(t, 0.5, rtol=0.0, atol=1e-12))
    chosen.update(middle.tolist())
    return sorted(chosen)


def _condition_consistency(
    surface: LambdaSurface, w: CoefficientFunction, margin: float, scale: float
) -> ConditionResult:
    try:
        result = reconstruct(surface, w, margin=margin)
    except (ReconstructionError, DataIntegrityError, SurfaceContractError) as e:
        return ConditionResult(False, f"q0 cannot be built from the candidate: {e}", {})
    base = DirichletProblem(extend_potential(result, w.grid, name="q0"), w)
    samples = []
    columns = [(j, float(r)) for j, r in enumerate(surface.r_list) if 0.0 < r <= VALIDATION_R_MAX + 1e-12]
    for i in _sample_indices(surface.t_grid):
        t = float(surface.t_grid[i])
        for j, r in columns:
            lam = float(surface.values[i, j])
            phi = shoot_left(base, lam, probes=(t,))
            psi = shoot_right(base, lam, probes=(t,))
            product = unscaled(phi.value_at(t) * psi.value_at(t), phi.scale_exponent + psi.scale_exponent)
            residual = unscaled(phi.terminal_value, phi.scale_exponent) / product - r
            samples.append({"t": t, "r": r, "lambda": lam, "residual": residual})
    tol = CONSISTENCY_TOLERANCE * scale
    if not samples:
        return ConditionResult(False, "no interior samples with 0 < r <= 0.1 to test", {"tolerance": tol})
    worst = max(samples, key=lambda s: abs(s["residual"]))
    residuals = {"samples": samples, "max_abs_residual": abs(worst["residual"]), "tolerance": tol}
    if abs(worst["residual"]) > tol:
        return ConditionResult(
            False,
            f"characteristic residual {worst['residual']:.3e} at t={worst['t']:.6g}, r={worst['r']:.6g}",
            residuals,
        )
    return ConditionResult(True, "candidate solves the characteristic equation of its own q0", residuals)


def validate_fef(
    candidate: Union[LambdaSurface, Callable[[np.ndarray, np.ndarray], np.ndarray]],
    w: CoefficientFunction,
    t_grid: Optional[Sequence[float]] = None,
    r_list: Optional[Sequence[float]] = None,
    margin: float = DEFAULT_MARGIN,
) -> ValidationReport:
    """
    Decide whether a candidate table can be a first eigenvalue function.

    Args:
        candidate: LambdaSurface, or a rule lambda(t, r) to tabulate
        w: Weight of the problem family
        t_grid: Tabulation grid for rules (default 201 uniform points on [0,1])
        r_list: Tabulation couplings for rules (default 0, 5e-4, 1e-3, 0.01, 0.05, 0.1)
        margin: Interior margin for building q0

    Returns:
        ValidationReport; verdict accepted iff conditions (i)-(iv) all pass
    """
    if isinstance(candidate, LambdaSurface):
        surface = candidate
    elif callable(candidate):
        grid_t = t_grid if t_grid is not None else np.linspace(0.0, 1.0, DEFAULT_VALIDATION_POINTS)
        grid_r = r_list if r_list is not None else DEFAULT_VALIDATION_R
        surface = tabulate_candidate(candidate, grid_t, grid_r, name=getattr(candidate, "__name__", "candidate"))
    else:
        raise SurfaceContractError("candidate must be a LambdaSurface or a callable lambda(t, r)")
    if not surface.has_zero_column:
        raise SurfaceContractError("candidate table has no r=0 column")
    scale = max(1.0, abs(surface.lambda1))

    conditions: Dict[str, ConditionResult] = {"condition_i": _condition_smoothness(surface, scale)}
    try:
        profile = _raw_slope(surface, None)
    except SurfaceContractError as e:
        raise SurfaceContractError(f"candidate slope cannot be extracted: {e}") from e
    conditions["condition_ii"] = _condition_slope(profile, w)
    conditions["condition_iii"] = _condition_extremal(surface, scale)
    if conditions["condition_ii"].passed:
        conditions["condition_iv"] = _condition_consistency(surface, w, margin, scale)
    else:
        conditions["condition_iv"] = ConditionResult(False, "not evaluated: slope condition failed", {})

    failed = [name for name in CONDITIONS if not conditions[name].passed]
    if failed:
        verdict, reason = "rejected", f"{failed[0]}: {conditions[failed[0]].message}"
        logger.info(f"❌ Candidate rejected ({reason})")
    else:
        verdict, reason = "accepted", None
        logger.info("✅ Candidate accepted as a first eigenvalue function")
    return ValidationReport(conditions, verdict, reason)
