#!/usr/bin/env python3
"""
Uniform grids on [0,1]
"""

from dataclasses import dataclass

import numpy as np

from app.core.exceptions import InvalidArgumentError, InvalidDataError

DEFAULT_GRID_POINTS = 2001


@dataclass(frozen=True)
class Grid:
    """Strictly increasing nodes covering [0,1], first node 0 and last node 1"""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgumentError("a grid needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise InvalidDataError("grid nodes must be finite")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise InvalidArgumentError("grid must start at 0 and end at 1")
        if np.any(np.diff(nodes) <= 0.0):
            raise InvalidArgumentError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_points(self) -> int:
        return int(self.nodes.size)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_points - 1)

    def is_uniform(self, rel_tol: float = 1e-9) -> bool:
        steps = np.diff(self.nodes)
        return bool(np.max(np.abs(steps - self.spacing)) <= rel_tol * self.spacing)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.nodes.shape == other.nodes.shape and bool(np.array_equal(self.nodes, other.nodes))

    def __hash__(self) -> int:
        return hash((self.n_points, float(self.nodes[1])))


def make_uniform_grid(n_points: int = DEFAULT_GRID_POINTS) -> Grid:
    """
    Build the uniform grid with spacing 1/(n_points-1)

    Args:
        n_points: Number of nodes, at least 2

    Returns:
        Grid with nodes i/(n_points-1)
    """
    if isinstance(n_points, bool) or int(n_points) != n_points or n_points < 2:
        raise InvalidArgumentError(f"n_points must be an integer >= 2, got {n_points!r}")
    n_points = int(n_points)
    nodes = np.arange(n_points, dtype=float) / (n_points - 1)
    nodes[-1] = 1.0
    return Grid(nodes)
