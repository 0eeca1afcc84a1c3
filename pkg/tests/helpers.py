import math

from scipy.optimize import brentq

from app.models.coefficients import POTENTIAL, WEIGHT, sample_coefficient
from app.models.grid import make_uniform_grid
from app.models.problem import DirichletProblem
from app.models.rules import parse_coefficient_rule

FAST_GRID = 801


def build_problem(potential: str = "zero", weight: str = "const:1", n_points: int = FAST_GRID) -> DirichletProblem:
    grid = make_uniform_grid(n_points)
    q = sample_coefficient(parse_coefficient_rule(potential), grid, kind=POTENTIAL, name=potential)
    w = sample_coefficient(parse_coefficient_rule(weight), grid, kind=WEIGHT, name=weight)
    return DirichletProblem(q, w)


def free_lambda(t: float, r: float) -> float:
    """lambda(t, r) for q=0, w=1 from r sin(rho t) sin(rho(1-t)) = rho sin(rho)"""
    if r == 0.0 or t <= 0.0 or t >= 1.0:
        return math.pi ** 2

    def h(lam):
        rho = math.sqrt(lam)
        return r * math.sin(rho * t) * math.sin(rho * (1.0 - t)) - rho * math.sin(rho)

    return brentq(h, math.pi ** 2 - 1.0, math.pi ** 2 - 1e-14, xtol=1e-15)


def free_residual(t: float, r: float, lam: float) -> float:
    """rho [cot(rho t) + cot(rho (1-t))] - r"""
    rho = math.sqrt(lam)
    return rho * (1.0 / math.tan(rho * t) + 1.0 / math.tan(rho * (1.0 - t))) - r
