#!/usr/bin/env python3
"""
Shooting solutions of -y'' + q y = lambda w y on [0,1]

Integration is classical fourth order Runge-Kutta over the grid cells. The
equation is linear, so every step is a matrix; the step matrices are built for
all cells at once with numpy and then applied in order. Point interactions and
probe points become extra breakpoints, so a cell containing one is split in
two and the jump y'(t+) = y'(t-) + m*y(t) is applied between the halves
(m = -r for an interaction of strength r).

Stored values are multiplied by 1e-150**scale_exponent when the overflow guard
had to rescale the state. Only sign and zero location matter in that regime.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.core.exceptions import IntegrationOverflowError, InvalidArgumentError
from app.models.coefficients import CoefficientFunction
from app.models.grid import Grid
from app.models.problem import DirichletProblem

logger = logging.getLogger(__name__)

LEFT = "left-to-right"
RIGHT = "right-to-left"

OVERFLOW_LIMIT = 1e150
RESCALE_FACTOR = 1e-150
SNAP_TOLERANCE = 1e-14
ZERO_FRACTION = 1e-13


@dataclass(frozen=True)
class InterfaceRecord:
    """State on both sides of an atom; y is continuous, y' jumps"""

    t: float
    mass: float
    y: float
    yprime_minus: float
    yprime_plus: float

    @property
    def jump_residual(self) -> float:
        return (self.yprime_plus - self.yprime_minus) - self.mass * self.y


@dataclass(frozen=True, eq=False)
class GridSolution:
    grid: Grid
    y: np.ndarray
    yprime: np.ndarray
    direction: str
    lam: float
    probes: Tuple[Tuple[float, float, float], ...] = ()
    scale_exponent: int = 0

    @property
    def terminal_value(self) -> float:
        """Value at the far endpoint"""
        return float(self.y[-1] if self.direction == LEFT else self.y[0])

    @property
    def terminal_slope(self) -> float:
        return float(self.yprime[-1] if self.direction == LEFT else self.yprime[0])

    def state_at(self, x: float) -> Tuple[float, float]:
        """(y, y') at x; exact at nodes and probes, interpolated elsewhere"""
        for px, py, pyp in self.probes:
            if abs(px - x) <= SNAP_TOLERANCE:
                return py, pyp
        nodes = self.grid.nodes
        i = int(np.clip(np.searchsorted(nodes, x), 0, nodes.size - 1))
        for j in (i - 1, i):
            if 0 <= j < nodes.size and abs(nodes[j] - x) <= SNAP_TOLERANCE:
                return float(self.y[j]), float(self.yprime[j])
        return float(np.interp(x, nodes, self.y)), float(np.interp(x, nodes, self.yprime))

    def value_at(self, x: float) -> float:
        return self.state_at(x)[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.grid.nodes, "y": self.y, "yprime": self.yprime})


@dataclass(frozen=True, eq=False)
class ShotSolution(GridSolution):
    sign_changes: int = 0
    interfaces: Tuple[InterfaceRecord, ...] = ()


@dataclass(frozen=True, eq=False)
class VariationalSolution(GridSolution):
    """Derivative of a shooting solution with respect to lambda; zero initial data"""


def unscaled(value: float, scale_exponent: int) -> float:
    """Undo the overflow rescaling; saturates to +-inf"""
    for _ in range(scale_exponent):
        value *= OVERFLOW_LIMIT
    return value


def _count_crossings(values: np.ndarray, scale: float) -> int:
    if values.size == 0 or scale == 0.0:
        return 0
    signs = np.sign(values)
    signs[np.abs(values) < ZERO_FRACTION * scale] = 0.0
    nonzero = signs[signs != 0.0]
    return int(np.count_nonzero(nonzero[1:] != nonzero[:-1]))


def count_sign_changes(sol: GridSolution) -> int:
    """
    Strict sign changes of y over the interior nodes.

    Endpoint zeros are ignored; a node with |y| below 1e-13*max|y| counts as the
    crossing it sits on, so the crossing is counted once.
    """
    return _count_crossings(np.asarray(sol.y[1:-1]), float(np.max(np.abs(sol.y))))


def oscillation_count(sol: GridSolution) -> int:
    """Sign changes including the far endpoint: the number of eigenvalues below sol.lam"""
    values = sol.y[1:] if sol.direction == LEFT else sol.y[:-1]
    return _count_crossings(np.asarray(values), float(np.max(np.abs(sol.y))))


def _snap(x: float, nodes: np.ndarray) -> float:
    i = int(np.searchsorted(nodes, x))
    for j in (i - 1, i):
        if 0 <= j < nodes.size and abs(nodes[j] - x) <= SNAP_TOLERANCE:
            return float(nodes[j])
    return float(x)


def _breakpoints(
    grid: Grid, atoms: Sequence[Tuple[float, float]], probes: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    nodes = grid.nodes
    masses: Dict[float, float] = {}
    for t, m in atoms:
        if not 0.0 < t < 1.0:
            raise InvalidArgumentError(f"atom position must lie in (0,1), got {t}")
        x = _snap(t, nodes)
        masses[x] = masses.get(x, 0.0) + float(m)
    probe_points = []
    for p in probes:
        if not 0.0 <= p <= 1.0:
            raise InvalidArgumentError(f"probe point must lie in [0,1], got {p}")
        probe_points.append(_snap(float(p), nodes))
    xs = np.unique(np.concatenate([nodes, np.array(list(masses), dtype=float), np.array(probe_points, dtype=float)]))
    jumps = np.zeros(xs.size)
    if masses:
        jumps[np.searchsorted(xs, list(masses))] = list(masses.values())
    return xs, jumps, probe_points


def _system(q: CoefficientFunction, w: CoefficientFunction, lam: float, x: np.ndarray, variational: bool) -> np.ndarray:
    a = q(x) - lam * w(x)
    if not variational:
        A = np.zeros((x.size, 2, 2))
        A[:, 0, 1] = 1.0
        A[:, 1, 0] = a
        return A
    # (y, y', u, u') with u'' = (q - lam w) u - w y
    A = np.zeros((x.size, 4, 4))
    A[:, 0, 1] = 1.0
    A[:, 1, 0] = a
    A[:, 2, 3] = 1.0
    A[:, 3, 2] = a
    A[:, 3, 0] = -w(x)
    return A


def step_matrices(
    q: CoefficientFunction, w: CoefficientFunction, lam: float, xs: np.ndarray, variational: bool = False
) -> np.ndarray:
    """RK4 propagators between consecutive breakpoints (xs may run in either direction)"""
    x0, x1 = xs[:-1], xs[1:]
    h = (x1 - x0)[:, None, None]
    A0 = _system(q, w, lam, x0, variational)
    Am = _system(q, w, lam, 0.5 * (x0 + x1), variational)
    A1 = _system(q, w, lam, x1, variational)
    eye = np.eye(A0.shape[-1])
    P1 = A0
    P2 = Am @ (eye + 0.5 * h * P1)
    P3 = Am @ (eye + 0.5 * h * P2)
    P4 = A1 @ (eye + h * P3)
    return eye + (h / 6.0) * (P1 + 2.0 * P2 + 2.0 * P3 + P4)


def _march(
    M: np.ndarray, xs: np.ndarray, jumps: np.ndarray, state: List[float], leftward: bool, lam: float
) -> Tuple[np.ndarray, List[List[float]], int]:
    """Apply the step matrices in order, recording the state at every breakpoint"""
    d = len(state)
    m00, m01, m10, m11 = (M[:, i, j].tolist() for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    if d == 4:
        v = [M[:, i, j].tolist() for i in (2, 3) for j in range(4)]
    jump_list = jumps.tolist()
    records = [list(state)]
    interfaces: List[List[float]] = []
    exponent = 0
    s = list(state)
    for k in range(M.shape[0]):
        y, yp = s[0], s[1]
        if d == 2:
            s = [m00[k] * y + m01[k] * yp, m10[k] * y + m11[k] * yp]
        else:
            u, up = s[2], s[3]
            s = [
                m00[k] * y + m01[k] * yp,
                m10[k] * y + m11[k] * yp,
                v[0][k] * y + v[1][k] * yp + v[2][k] * u + v[3][k] * up,
                v[4][k] * y + v[5][k] * yp + v[6][k] * u + v[7][k] * up,
            ]
        m = jump_list[k + 1]
        if m != 0.0:
            if leftward:
                # arriving from the right: record y'(t+), then step to y'(t-)
                records.append(list(s))
                plus = s[1]
                s[1] -= m * s[0]
                if d == 4:
                    s[3] -= m * s[2]
                interfaces.append([float(xs[k + 1]), m, s[0], s[1], plus])
            else:
                minus = s[1]
                s[1] += m * s[0]
                if d == 4:
                    s[3] += m * s[2]
                interfaces.append([float(xs[k + 1]), m, s[0], minus, s[1]])
                records.append(list(s))
        else:
            records.append(list(s))
        if abs(s[0]) > OVERFLOW_LIMIT or abs(s[1]) > OVERFLOW_LIMIT or (d == 4 and max(abs(s[2]), abs(s[3])) > OVERFLOW_LIMIT):
            exponent += 1
            s = [c * RESCALE_FACTOR for c in s]
            records = [[c * RESCALE_FACTOR for c in row] for row in records]
            for rec in interfaces:
                rec[2:] = [c * RESCALE_FACTOR for c in rec[2:]]
            logger.debug(f"Rescaled shooting state at x={xs[k + 1]:.6g} (lambda={lam})")
    table = np.array(records, dtype=float)
    if not np.all(np.isfinite(table)):
        raise IntegrationOverflowError(f"non-finite state while integrating at lambda={lam}", lam)
    return table, interfaces, exponent


def integrate_initial_value(
    q: CoefficientFunction,
    w: CoefficientFunction,
    atoms: Sequence[Tuple[float, float]],
    lam: float,
    y0: float,
    z0: float,
    direction: str = LEFT,
    probes: Sequence[float] = (),
    variational: bool = False,
) -> Union[ShotSolution, Tuple[ShotSolution, VariationalSolution]]:
    """
    Solve -dy' + y dmu = lam w y dx from one endpoint.

    Args:
        q: Absolutely continuous part of the measure
        w: Weight
        atoms: (position, mass) pairs; y' jumps by mass*y at each position
        lam: Spectral parameter
        y0, z0: y and y' at the starting endpoint
        direction: LEFT starts at x=0, RIGHT starts at x=1
        probes: Extra points where the state is recorded exactly
        variational: Also integrate the lambda-derivative (zero initial data)

    Returns:
        ShotSolution, or (ShotSolution, VariationalSolution) when variational
    """
    if direction not in (LEFT, RIGHT):
        raise InvalidArgumentError(f"unknown direction: {direction}")
    if not math.isfinite(lam):
        raise InvalidArgumentError(f"lambda must be finite, got {lam}")
    if q.grid != w.grid:
        raise InvalidArgumentError("potential and weight must share a grid")
    grid = q.grid
    xs, jumps, probe_points = _breakpoints(grid, atoms, probes)
    leftward = direction == RIGHT
    if leftward:
        xs, jumps = xs[::-1], jumps[::-1]
    M = step_matrices(q, w, lam, xs, variational)
    start = [float(y0), float(z0)] + ([0.0, 0.0] if variational else [])
    table, raw_interfaces, exponent = _march(M, xs, jumps, start, leftward, lam)
    if leftward:
        xs, table = xs[::-1], table[::-1]
        raw_interfaces = raw_interfaces[::-1]

    node_rows = np.searchsorted(xs, grid.nodes)
    probe_rows = np.searchsorted(xs, probe_points) if probe_points else []
    requested = [float(p) for p in probes]

    def probe_tuple(col: int) -> Tuple[Tuple[float, float, float], ...]:
        return tuple(
            (x, float(table[row, col]), float(table[row, col + 1])) for x, row in zip(requested, probe_rows)
        )

    y = table[node_rows, 0]
    shot = ShotSolution(
        grid=grid,
        y=y,
        yprime=table[node_rows, 1],
        direction=direction,
        lam=float(lam),
        probes=probe_tuple(0),
        scale_exponent=exponent,
        sign_changes=_count_crossings(y[1:-1], float(np.max(np.abs(y)))),
        interfaces=tuple(InterfaceRecord(*rec) for rec in raw_interfaces),
    )
    if not variational:
        return shot
    var = VariationalSolution(
        grid=grid,
        y=table[node_rows, 2],
        yprime=table[node_rows, 3],
        direction=direction,
        lam=float(lam),
        probes=probe_tuple(2),
        scale_exponent=exponent,
    )
    return shot, var


def shoot_left(problem: DirichletProblem, lam: float, probes: Sequence[float] = ()) -> ShotSolution:
    """phi(., lam) with phi(0)=0, phi'(0)=1"""
    return integrate_initial_value(problem.q, problem.w, problem.atoms, lam, 0.0, 1.0, LEFT, probes)


def shoot_right(problem: DirichletProblem, lam: float, probes: Sequence[float] = ()) -> ShotSolution:
    """psi(., lam) with psi(1)=0, psi'(1)=-1"""
    return integrate_initial_value(problem.q, problem.w, problem.atoms, lam, 0.0, -1.0, RIGHT, probes)


def shoot_variational(
    problem: DirichletProblem, lam: float, direction: str = LEFT, probes: Sequence[float] = ()
) -> Tuple[ShotSolution, VariationalSolution]:
    """Shooting solution together with its lambda-derivative"""
    z0 = 1.0 if direction == LEFT else -1.0
    return integrate_initial_value(
        problem.q, problem.w, problem.atoms, lam, 0.0, z0, direction, probes, variational=True
    )


def wronskian(phi: GridSolution, psi: GridSolution, x: float) -> float:
    """phi(x) psi'(x) - phi'(x) psi(x)"""
    if phi.grid != psi.grid:
        raise InvalidArgumentError("solutions live on different grids")
    if abs(phi.lam - psi.lam) > 1e-15 * max(1.0, abs(phi.lam)):
        raise InvalidArgumentError(f"solutions belong to different lambdas ({phi.lam} vs {psi.lam})")
    p, dp = phi.state_at(x)
    s, ds = psi.state_at(x)
    return unscaled(p * ds - dp * s, phi.scale_exponent + psi.scale_exponent)


def characteristic(problem: DirichletProblem, lam: float) -> float:
    """F(lam) = phi(1, lam); zero exactly at the Dirichlet eigenvalues"""
    sol = shoot_left(problem, lam)
    return unscaled(sol.terminal_value, sol.scale_exponent)


def characteristic_derivative(problem: DirichletProblem, lam: float) -> float:
    """dF/dlam from the variational system"""
    _, var = shoot_variational(problem, lam, LEFT)
    return unscaled(var.terminal_value, var.scale_exponent)
