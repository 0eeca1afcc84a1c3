#!/usr/bin/env python3
"""
Built-in coefficient and candidate rules.

Potential/weight rules (terms may be summed with '+'):
    zero            0
    const:c         c
    cos:a,k         a*cos(2*pi*k*x)
    affine:a,b      a + b*x
    step:c,x0       c for x >= x0, else 0

Candidate first-eigenvalue rules:
    sine:a[,l1]     l1 - a*r*sin(pi*t)^2   (l1 defaults to pi^2)
"""

import math
import re
from typing import Callable, List

import numpy as np

from app.core.exceptions import ConfigError

_TERM = re.compile(r"^(zero|const|cos|affine|step)(?::(.*))?$")
_CANDIDATE = re.compile(r"^sine:(.+)$")


def _numbers(text: str, count: int, rule: str) -> List[float]:
    parts = [p.strip() for p in (text or "").split(",") if p.strip()]
    if len(parts) != count:
        raise ConfigError(f"rule '{rule}' expects {count} parameter(s)")
    try:
        values = [float(p) for p in parts]
    except ValueError as e:
        raise ConfigError(f"rule '{rule}' has a non-numeric parameter") from e
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"rule '{rule}' has a non-finite parameter")
    return values


def _term(rule: str) -> Callable[[np.ndarray], np.ndarray]:
    match = _TERM.match(rule.strip())
    if not match:
        raise ConfigError(f"unknown coefficient rule '{rule}'")
    name, args = match.group(1), match.group(2)
    if name == "zero":
        if args:
            raise ConfigError("rule 'zero' takes no parameters")
        return lambda x: np.zeros_like(x)
    if name == "const":
        (c,) = _numbers(args, 1, rule)
        return lambda x: np.full_like(x, c)
    if name == "cos":
        a, k = _numbers(args, 2, rule)
        return lambda x: a * np.cos(2.0 * np.pi * k * x)
    if name == "affine":
        a, b = _numbers(args, 2, rule)
        return lambda x: a + b * x
    c, x0 = _numbers(args, 2, rule)
    return lambda x: np.where(x >= x0, c, 0.0)


def is_coefficient_rule(text: str) -> bool:
    return all(_TERM.match(part.strip()) for part in text.split("+"))


def parse_coefficient_rule(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Turn 'cos:5,1+affine:0,3' into a vectorised callable"""
    terms = [_term(part) for part in text.split("+")]

    def rule(x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for term in terms:
            total = total + term(x)
        return total

    return rule


def is_candidate_rule(text: str) -> bool:
    return bool(_CANDIDATE.match(text.strip()))


def parse_candidate_rule(text: str) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Closed-form candidate lambda(t, r) for the validator"""
    match = _CANDIDATE.match(text.strip())
    if not match:
        raise ConfigError(f"unknown candidate rule '{text}'")
    parts = [p.strip() for p in match.group(1).split(",") if p.strip()]
    if len(parts) not in (1, 2):
        raise ConfigError(f"rule '{text}' expects 1 or 2 parameters")
    values = _numbers(",".join(parts), len(parts), text)
    a = values[0]
    lambda1 = values[1] if len(values) == 2 else math.pi ** 2

    def candidate(t, r):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        return lambda1 - a * r * np.sin(np.pi * t) ** 2

    candidate.__name__ = text.strip()
    return candidate
