#!/usr/bin/env python3
"""
Coefficient functions (potentials and weights) as nodal samples with
piecewise linear interpolation.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Union

import numpy as np
import pandas as pd

from app.core.exceptions import InvalidArgumentError, InvalidDataError
from app.models.grid import Grid

logger = logging.getLogger(__name__)

POTENTIAL = "potential"
WEIGHT = "weight"


@dataclass(frozen=True, eq=False)
class CoefficientFunction:
    """
    A real function on [0,1] stored by its values at the grid nodes.

    Weights must be strictly positive at every node; that is checked here so a
    bad weight never reaches a solver.
    """

    grid: Grid
    values: np.ndarray
    kind: str = POTENTIAL
    name: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise InvalidArgumentError(
                f"expected {self.grid.n_points} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise InvalidDataError(
                f"{self.kind} '{self.name}' has a non-finite sample at x={self.grid.nodes[bad]}"
            )
        if self.kind not in (POTENTIAL, WEIGHT):
            raise InvalidArgumentError(f"unknown coefficient kind: {self.kind}")
        if self.kind == WEIGHT and np.any(values <= 0.0):
            bad = int(np.flatnonzero(values <= 0.0)[0])
            raise InvalidDataError(
                f"weight '{self.name}' must be positive, found {values[bad]} at x={self.grid.nodes[bad]}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __call__(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        result = np.interp(x, self.grid.nodes, self.values)
        if np.ndim(result) == 0:
            return float(result)
        return result

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def shifted(self, other: "CoefficientFunction", scale: float = 1.0, name: str = "") -> "CoefficientFunction":
        """Return self + scale*other on the common grid"""
        if other.grid != self.grid:
            raise InvalidArgumentError("coefficient functions live on different grids")
        return CoefficientFunction(
            self.grid, self.values + scale * other.values, kind=self.kind, name=name or self.name
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.grid.nodes, "value": self.values})

    def to_json_dict(self) -> Dict[str, Any]:
        return {"nodes": self.grid.nodes.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, kind: str = POTENTIAL, name: str = "") -> "CoefficientFunction":
        missing = {"x", "value"} - set(frame.columns)
        if missing:
            raise InvalidDataError(f"coefficient table is missing columns: {sorted(missing)}")
        x = frame["x"].to_numpy(dtype=float)
        values = frame["value"].to_numpy(dtype=float)
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(values)):
            raise InvalidDataError(f"coefficient table '{name}' contains NaN or infinite entries")
        grid = Grid(x)
        if not grid.is_uniform():
            raise InvalidArgumentError(f"coefficient table '{name}' is not on a uniform grid")
        return cls(grid, values, kind=kind, name=name)

    @classmethod
    def from_json_dict(cls, payload: Dict[str, Any], kind: str = POTENTIAL, name: str = "") -> "CoefficientFunction":
        try:
            frame = pd.DataFrame({"x": payload["nodes"], "value": payload["values"]})
        except KeyError as e:
            raise InvalidDataError(f"coefficient JSON is missing field {e}") from e
        return cls.from_frame(frame, kind=kind, name=name)


def _evaluate_rule(f: Callable, nodes: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(f(nodes), dtype=float)
        if values.shape == nodes.shape:
            return values
        if values.ndim == 0:
            return np.full(nodes.shape, float(values))
    except (TypeError, ValueError):
        logger.debug("Rule is not vectorised, evaluating node by node")
    return np.array([float(f(float(x))) for x in nodes], dtype=float)


def sample_coefficient(
    f: Callable, grid: Grid, kind: str = POTENTIAL, name: str = ""
) -> CoefficientFunction:
    """
    Sample a rule at the grid nodes.

    Args:
        f: Callable on [0,1]; vectorised rules are called once with all nodes
        grid: Target grid
        kind: "potential" or "weight"
        name: Descriptor carried into metadata

    Returns:
        CoefficientFunction with values[i] = f(nodes[i])
    """
    values = _evaluate_rule(f, grid.nodes)
    return CoefficientFunction(grid, values, kind=kind, name=name)


def constant_coefficient(value: float, grid: Grid, kind: str = POTENTIAL, name: str = "") -> CoefficientFunction:
    return CoefficientFunction(grid, np.full(grid.n_points, float(value)), kind=kind, name=name or f"const:{value}")
