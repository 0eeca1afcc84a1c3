#!/usr/bin/env python3
"""
First eigenvalue function lambda(t, r)

lambda(t, r) is the lowest Dirichlet eigenvalue of -y'' + q y = lambda w y with
an extra interaction -r*delta(x - t). It is computed two ways:

    direct            first eigenvalue of the perturbed problem
    characterization  the root below lambda_1 of
                      G(lambda) = r*phi(t)*psi(t) - phi(1)
                      using shots of the unperturbed problem

and the two must agree.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from app.core.exceptions import (
    ConsistencyError,
    CouplingRangeError,
    DataIntegrityError,
    EigenvalueSearchError,
    InvalidArgumentError,
    SingularDerivativeError,
    SurfaceContractError,
)
from app.handlers.shooting import LEFT, RIGHT, shoot_left, shoot_right, shoot_variational, unscaled
from app.handlers.spectrum import eigenfunction, eigenvalue
from app.handlers.worker_pool import parallel_map
from app.models.coefficients import CoefficientFunction
from app.models.problem import DirichletProblem

logger = logging.getLogger(__name__)

DEFAULT_R_MAX = 0.1
ROUTE_TOLERANCE = 1e-9
GUARD_SAMPLES = 4
MAX_BRACKET_DOUBLINGS = 40
SINGULAR_DENOMINATOR = 1e-12
RATIO_GUARD = 1e-12

DIRECT = "direct"
CHARACTERIZATION = "characterization"
CROSS_CHECKED = "cross-checked"


@dataclass(frozen=True)
class FefSample:
    t: float
    r: float
    lam: float
    method: str
    matching_constant: float
    direct_value: Optional[float] = None
    characterization_value: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "r": self.r,
            "lambda": self.lam,
            "method": self.method,
            "matching_constant": self.matching_constant,
            "direct_value": self.direct_value,
            "characterization_value": self.characterization_value,
        }


@dataclass(frozen=True, eq=False)
class LambdaSurface:
    """
    Samples lambda(t_i, r_j) with r ascending (r=0 first when present).

    t_grid may include 0 and 1, where lambda equals lambda_1 by definition.
    lambda1 is NaN for a table that has no r=0 column.
    """

    t_grid: np.ndarray
    r_list: np.ndarray
    values: np.ndarray
    lambda1: float
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.t_grid, dtype=float)
        r = np.array(self.r_list, dtype=float)
        values = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise SurfaceContractError("surface t_grid is empty")
        if r.ndim != 1 or r.size == 0:
            raise SurfaceContractError("surface r_list is empty")
        if values.shape != (t.size, r.size):
            raise SurfaceContractError(f"surface values have shape {values.shape}, expected {(t.size, r.size)}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(r)) and np.all(np.isfinite(values))):
            raise DataIntegrityError("surface contains NaN or infinite entries")
        if np.any(np.diff(t) <= 0.0) or t[0] < 0.0 or t[-1] > 1.0:
            raise SurfaceContractError("surface t_grid must be strictly increasing inside [0,1]")
        if np.any(r < 0.0):
            raise SurfaceContractError("surface r_list contains a negative coupling")
        order = np.argsort(r, kind="stable")
        r, values = r[order], values[:, order]
        if np.any(np.diff(r) <= 0.0):
            raise SurfaceContractError("surface r_list contains duplicates")
        for name, arr in (("t_grid", t), ("r_list", r), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "lambda1", float(self.lambda1))

    @property
    def has_zero_column(self) -> bool:
        return bool(self.r_list[0] == 0.0)

    def column(self, r: float) -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.r_list, r, rtol=1e-12, atol=0.0))
        if idx.size == 0:
            raise SurfaceContractError(f"surface has no column for r={r}")
        return self.values[:, int(idx[0])]

    def check_invariants(self, tol: float = 1e-9) -> List[str]:
        """Violations of the first-eigenvalue-function table invariants (empty when fine)"""
        problems = []
        scale = max(1.0, abs(self.lambda1)) if math.isfinite(self.lambda1) else 1.0
        if not self.has_zero_column:
            problems.append("no r=0 column")
            return problems
        drift = float(np.max(np.abs(self.values[:, 0] - self.lambda1)))
        if drift > tol * scale:
            problems.append(f"r=0 column deviates from lambda1 by {drift:.3e}")
        excess = float(np.max(self.values - self.lambda1))
        if excess > tol * scale:
            problems.append(f"entry exceeds lambda1 by {excess:.3e}")
        if self.r_list.size > 1:
            rise = float(np.max(np.diff(self.values, axis=1)))
            if rise > tol * scale:
                problems.append(f"values increase with r by up to {rise:.3e}")
        return problems

    def to_frame(self) -> pd.DataFrame:
        """Long format, rows ordered by t then r"""
        tt, rr = np.meshgrid(self.t_grid, self.r_list, indexing="ij")
        return pd.DataFrame({"t": tt.ravel(), "r": rr.ravel(), "lambda": self.values.ravel()})

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "lambda1": self.lambda1,
            "t_grid": self.t_grid.tolist(),
            "r_list": self.r_list.tolist(),
            "values": self.values.tolist(),
            "metadata": dict(self.metadata),
        }

    def to_gnuplot(self) -> str:
        """Blocks of 't r lambda' lines, one block per t, separated by blank lines"""
        blocks = []
        for i, t in enumerate(self.t_grid):
            lines = [f"{t:.17g} {r:.17g} {lam:.17g}" for r, lam in zip(self.r_list, self.values[i])]
            blocks.append("\n".join(lines))
        return "# t r lambda\n" + "\n\n".join(blocks) + "\n"

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, metadata: Optional[Dict[str, Any]] = None) -> "LambdaSurface":
        missing = {"t", "r", "lambda"} - set(frame.columns)
        if missing:
            raise SurfaceContractError(f"surface table is missing columns: {sorted(missing)}")
        data = frame[["t", "r", "lambda"]].astype(float)
        if not np.all(np.isfinite(data.to_numpy())):
            raise DataIntegrityError("surface table contains NaN or infinite entries")
        if data.duplicated(subset=["t", "r"]).any():
            raise DataIntegrityError("surface table repeats a (t, r) pair")
        table = data.pivot(index="t", columns="r", values="lambda").sort_index().sort_index(axis=1)
        if table.isna().to_numpy().any():
            raise DataIntegrityError("surface table is not a full (t, r) grid")
        r_list = table.columns.to_numpy(dtype=float)
        values = table.to_numpy(dtype=float)
        lambda1 = float(np.mean(values[:, 0])) if r_list[0] == 0.0 else float("nan")
        return cls(table.index.to_numpy(dtype=float), r_list, values, lambda1, dict(metadata or {}))

    @classmethod
    def from_json_dict(cls, payload: Dict[str, Any]) -> "LambdaSurface":
        try:
            t_grid = payload["t_grid"]
            r_list = payload["r_list"]
            values = payload["values"]
        except KeyError as e:
            raise SurfaceContractError(f"surface JSON is missing field {e}") from e
        lambda1 = payload.get("lambda1")
        try:
            values_arr = np.array(values, dtype=float)
        except (TypeError, ValueError) as e:
            raise DataIntegrityError("surface JSON values are not numeric") from e
        if lambda1 is None:
            r_arr = np.asarray(r_list, dtype=float)
            zero = np.flatnonzero(r_arr == 0.0)
            lambda1 = float(np.mean(values_arr[:, zero[0]])) if zero.size else float("nan")
        return cls(t_grid, r_list, values_arr, float(lambda1), dict(payload.get("metadata") or {}))


def _surface_cell(solver: "FefSolver", cell: Tuple[float, float]) -> FefSample:
    return solver.value(*cell)


class FefSolver:
    """
    Evaluates lambda(t, r) for one unperturbed problem.

    Holds lambda_1, the normalized first eigenfunction and the bracket constant
    so that sweeps over (t, r) do not repeat that work.
    """

    def __init__(self, problem: DirichletProblem, r_max: float = DEFAULT_R_MAX, cross_check: bool = True):
        if problem.interactions:
            raise InvalidArgumentError("the base problem of the first eigenvalue function has no interactions")
        if not r_max > 0.0:
            raise InvalidArgumentError(f"r_max must be positive, got {r_max}")
        self.problem = problem
        self.r_max = float(r_max)
        self.cross_check = bool(cross_check)
        self.first = eigenfunction(problem, 1)
        self.lambda1 = self.first.lambda_m
        # lambda(t, r) >= lambda_1 - r*max(Phi^2) to first order
        self.bracket_constant = max(2.0 * float(np.max(self.first.eigenfunction.y ** 2)), 1e-6)
        self.endpoint_constant = -shoot_left(problem, self.lambda1).terminal_slope
        logger.info(f"🔍 First eigenvalue λ₁ = {self.lambda1:.12g}, bracket constant C = {self.bracket_constant:.4g}")

    # -- checks -----------------------------------------------------------

    def _check(self, t: float, r: float) -> None:
        if not (math.isfinite(t) and math.isfinite(r)):
            raise InvalidArgumentError("t and r must be finite")
        if not 0.0 <= t <= 1.0:
            raise InvalidArgumentError(f"interaction position must lie in [0,1], got {t}")
        if r < 0.0:
            raise InvalidArgumentError(f"coupling must be >= 0, got {r}")
        if r > self.r_max:
            raise CouplingRangeError(f"coupling r={r} exceeds the configured range r <= {self.r_max}")

    # -- routes -----------------------------------------------------------

    def characteristic_residual(self, t: float, r: float, lam: float) -> float:
        """G(lam) = r*phi(t, lam)*psi(t, lam) - phi(1, lam) for the unperturbed problem"""
        phi = shoot_left(self.problem, lam, probes=(t,))
        psi = shoot_right(self.problem, lam, probes=(t,))
        product = unscaled(phi.value_at(t) * psi.value_at(t), phi.scale_exponent + psi.scale_exponent)
        return r * product - unscaled(phi.terminal_value, phi.scale_exponent)

    def _characterization(self, t: float, r: float) -> Tuple[float, Tuple[float, float]]:
        G = partial(self.characteristic_residual, t, r)
        hi = self.lambda1
        if G(hi) <= 0.0:
            raise CouplingRangeError(f"interaction at t={t} is too close to an endpoint to resolve G(lambda_1) > 0")
        constant = self.bracket_constant
        lo = hi - constant * r
        doublings = 0
        while G(lo) >= 0.0:
            doublings += 1
            if doublings > MAX_BRACKET_DOUBLINGS:
                raise EigenvalueSearchError(
                    "characterization bracket did not close", {"t": t, "r": r, "lambda_low": lo}
                )
            constant *= 2.0
            lo = hi - constant * r
        samples = np.linspace(lo, hi, GUARD_SAMPLES + 2)[1:-1]
        signs = [-1.0] + [math.copysign(1.0, G(x)) for x in samples] + [1.0]
        if sum(1 for a, b in zip(signs, signs[1:]) if a != b) != 1:
            raise CouplingRangeError(f"more than one root of G in [{lo}, {hi}] at t={t}, r={r}")
        root = brentq(G, lo, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=200)
        return float(root), (lo, hi)

    def _direct(self, t: float, r: float, bracket: Tuple[float, float]) -> float:
        perturbed = self.problem.with_interaction(t, r)
        return eigenvalue(perturbed, 1, bracket_hint=bracket)

    def matching_constant(self, t: float, lam: float) -> float:
        """c = phi(t)/psi(t); via slopes where psi(t) is negligible"""
        if t <= 0.0 or t >= 1.0:
            return self.endpoint_constant
        phi = shoot_left(self.problem, lam, probes=(t,))
        psi = shoot_right(self.problem, lam, probes=(t,))
        p, dp = phi.state_at(t)
        s, ds = psi.state_at(t)
        if abs(s) < RATIO_GUARD * float(np.max(np.abs(psi.y))):
            return dp / ds
        return p / s

    # -- public -----------------------------------------------------------

    def value(self, t: float, r: float) -> FefSample:
        t, r = float(t), float(r)
        self._check(t, r)
        if t <= 0.0 or t >= 1.0 or r == 0.0:
            c = self.matching_constant(t, self.lambda1)
            return FefSample(t, r, self.lambda1, DIRECT, c, self.lambda1, self.lambda1)
        lam_c, bracket = self._characterization(t, r)
        c = self.matching_constant(t, lam_c)
        lam_d = None
        method = CHARACTERIZATION
        if self.cross_check:
            lam_d = self._direct(t, r, bracket)
            if abs(lam_d - lam_c) > ROUTE_TOLERANCE * (1.0 + abs(lam_c)):
                raise ConsistencyError(
                    f"routes disagree at t={t}, r={r}: direct {lam_d!r}, characterization {lam_c!r}"
                )
            method = CROSS_CHECKED
        if lam_c > self.lambda1 or not c > 0.0:
            raise ConsistencyError(f"lambda({t}, {r}) = {lam_c!r} with c = {c!r} violates lambda <= lambda_1, c > 0")
        return FefSample(t, r, lam_c, method, c, lam_d, lam_c)

    def partials(self, t: float, r: float) -> Tuple[float, float]:
        """(d lambda/dt, d lambda/dr) from the implicit-function formulas"""
        t, r = float(t), float(r)
        self._check(t, r)
        if not 0.0 < t < 1.0:
            raise InvalidArgumentError(f"partials need 0 < t < 1, got {t}")
        lam = self.value(t, r).lam
        phi, u = shoot_variational(self.problem, lam, LEFT, probes=(t,))
        psi, v = shoot_variational(self.problem, lam, RIGHT, probes=(t,))
        p, dp = phi.state_at(t)
        s, ds = psi.state_at(t)
        d_lam = u.value_at(t) * s + p * v.value_at(t)
        d_t = dp * s + p * ds
        denominator = u.terminal_value - r * d_lam
        if abs(denominator) < SINGULAR_DENOMINATOR:
            raise SingularDerivativeError(f"degenerate derivative system at t={t}, r={r} ({denominator:.3e})")
        return r * d_t / denominator, p * s / denominator

    def surface(self, t_grid: Sequence[float], r_list: Sequence[float], workers: int = 1) -> LambdaSurface:
        t_arr = np.asarray(list(t_grid), dtype=float)
        r_arr = np.asarray(list(r_list), dtype=float)
        if t_arr.size == 0:
            raise InvalidArgumentError("t_grid is empty")
        if np.any(np.diff(t_arr) <= 0.0) or t_arr[0] < 0.0 or t_arr[-1] > 1.0:
            raise InvalidArgumentError("t_grid must be strictly increasing inside [0,1]")
        if np.any(r_arr < 0.0):
            raise InvalidArgumentError("r_list contains a negative coupling")
        r_arr = np.unique(np.concatenate([[0.0], r_arr]))
        cells = [(float(t), float(r)) for t in t_arr for r in r_arr]
        logger.info(f"📊 Computing λ(t, r) on {t_arr.size} x {r_arr.size} cells")
        samples = parallel_map(partial(_surface_cell, self), cells, workers)
        values = np.array([s.lam for s in samples]).reshape(t_arr.size, r_arr.size)
        metadata = dict(self.problem.describe())
        metadata["lambda1"] = self.lambda1
        metadata["cross_check"] = self.cross_check
        surface = LambdaSurface(t_arr, r_arr, values, self.lambda1, metadata)
        violations = surface.check_invariants()
        if violations:
            raise ConsistencyError("computed surface violates invariants: " + "; ".join(violations))
        return surface

    def integral_form_residual(self, t: float, r: float, nodes_per_cell: int = 8) -> float:
        """
        r*phi(t)^2 * integral_t^1 ds/phi(s)^2 - 1 at lambda = lambda(t, r).

        The integral uses a cubic Hermite interpolant of phi built from (phi, phi')
        at the nodes and Gauss-Legendre points per cell.
        """
        if not 0.1 <= t <= 0.9:
            raise InvalidArgumentError("the integral form is only evaluated for t in [0.1, 0.9]")
        lam = self.value(t, r).lam
        phi = shoot_left(self.problem, lam, probes=(t,))
        p, dp = phi.state_at(t)
        nodes = phi.grid.nodes
        keep = nodes > t + 1e-14
        x = np.concatenate([[t], nodes[keep]])
        spline = CubicHermiteSpline(x, np.concatenate([[p], phi.y[keep]]), np.concatenate([[dp], phi.yprime[keep]]))
        gx, gw = np.polynomial.legendre.leggauss(nodes_per_cell)
        a, b = x[:-1, None], x[1:, None]
        points = 0.5 * (b - a) * gx[None, :] + 0.5 * (a + b)
        integral = float(np.sum(0.5 * (b - a) * gw[None, :] / spline(points) ** 2))
        return r * p ** 2 * integral - 1.0

    def slope_identity_residual(self, t: float, r: float) -> float:
        """d lambda/dr + Phi(t)^2, Phi the normalized eigenfunction of the perturbed problem"""
        _, dldr = self.partials(t, r)
        perturbed = self.problem.with_interaction(t, r)
        result = eigenfunction(perturbed, 1)
        phi_t = result.eigenfunction.interfaces[0].y
        return dldr + phi_t ** 2

    def coupling_path(self, path: Sequence[Tuple[float, float]], workers: int = 1) -> pd.DataFrame:
        """lambda along a moving interaction (t(s), r(s)), one row per path point"""
        cells = [(float(t), float(r)) for t, r in path]
        samples = parallel_map(partial(_surface_cell, self), cells, workers)
        return pd.DataFrame(
            {
                "step": np.arange(len(cells)),
                "t": [s.t for s in samples],
                "r": [s.r for s in samples],
                "lambda": [s.lam for s in samples],
            }
        )


def fef_value(problem_base: DirichletProblem, t: float, r: float, cross_check: bool = True) -> FefSample:
    """lambda(t, r) for a single point; use FefSolver for sweeps"""
    return FefSolver(problem_base, r_max=max(DEFAULT_R_MAX, float(r)), cross_check=cross_check).value(t, r)


def fef_surface(
    problem_base: DirichletProblem,
    t_grid: Sequence[float],
    r_list: Sequence[float],
    workers: int = 1,
    cross_check: bool = True,
    r_max: float = DEFAULT_R_MAX,
) -> LambdaSurface:
    return FefSolver(problem_base, r_max=r_max, cross_check=cross_check).surface(t_grid, r_list, workers)


def fef_partials(problem_base: DirichletProblem, t: float, r: float) -> Tuple[float, float]:
    return FefSolver(problem_base).partials(t, r)


def weight_shift_eigenvalue(problem_base: DirichletProblem, c: float, t: float) -> float:
    """
    First eigenvalue after subtracting c*t*w from the potential.

    The shift is lambda_1 - c*t whatever q is, so perturbations proportional to
    the weight carry no information about the potential.
    """
    q = problem_base.q.shifted(problem_base.w, scale=-c * t, name=f"{problem_base.q.name}-{c * t}w")
    return eigenvalue(DirichletProblem(q, problem_base.w), 1)
