#!/usr/bin/env python3
"""
Dirichlet problems -y'' + q y = lambda w y on [0,1], optionally with
point interactions -r*delta(x - t).
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

from app.core.exceptions import InvalidArgumentError
from app.models.coefficients import WEIGHT, CoefficientFunction


@dataclass(frozen=True)
class PointInteraction:
    """Contact interaction at t with coupling r; y' drops by r*y(t) across t"""

    t: float
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.r)):
            raise InvalidArgumentError("interaction position and strength must be finite")
        if not 0.0 < self.t < 1.0:
            raise InvalidArgumentError(f"interaction position must lie in (0,1), got {self.t}")
        if self.r < 0.0:
            raise InvalidArgumentError(f"coupling strength must be >= 0, got {self.r}")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "r", float(self.r))

    @property
    def mass(self) -> float:
        """Atom mass of the equivalent measure term"""
        return -self.r


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    q: CoefficientFunction
    w: CoefficientFunction
    interactions: Tuple[PointInteraction, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.q.grid != self.w.grid:
            raise InvalidArgumentError("potential and weight must share a grid")
        if self.w.kind != WEIGHT:
            raise InvalidArgumentError("the weight must be constructed with kind='weight'")
        interactions = tuple(self.interactions)
        positions = [p.t for p in interactions]
        if positions != sorted(positions):
            raise InvalidArgumentError("interaction positions must be sorted ascending")
        if len(set(positions)) != len(positions):
            raise InvalidArgumentError("interaction positions must be pairwise distinct")
        object.__setattr__(self, "interactions", interactions)

    @property
    def grid(self):
        return self.q.grid

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return [(p.t, p.mass) for p in self.interactions]

    def with_interaction(self, t: float, r: float) -> "DirichletProblem":
        """Copy of this problem with one more interaction at (t, r)"""
        interactions = sorted(self.interactions + (PointInteraction(t, r),), key=lambda p: p.t)
        return DirichletProblem(self.q, self.w, tuple(interactions))

    def without_interactions(self) -> "DirichletProblem":
        return DirichletProblem(self.q, self.w, ())

    def describe(self) -> Dict[str, Any]:
        return {
            "q": self.q.name,
            "w": self.w.name,
            "grid_points": self.grid.n_points,
            "interactions": [{"t": p.t, "r": p.r} for p in self.interactions],
        }
