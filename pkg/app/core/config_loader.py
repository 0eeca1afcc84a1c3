"""
Run configuration loader for the first eigenvalue function toolkit
"""
import copy
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from app.core.exceptions import ConfigError
from app.models.rules import is_candidate_rule, is_coefficient_rule

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    "problem": {
        "potential": "zero",
        "weight": "const:1",
        "grid_points": 2001,
    },
    "spectrum": {
        "count": 3,
    },
    "fef_surface": {
        "t_grid": "uniform:101",
        "r_list": [0.0, 0.0005, 0.001],
        "r_max": 0.1,
        "cross_check": True,
    },
    "reconstruct": {
        "surface": None,
        "margin": 0.05,
        "smoothing": 0,
        "order": None,
        "ground_truth": None,
        "candidate": None,
    },
    "validate_fef": {
        "candidate": None,
        "t_grid": "uniform:201",
        "r_list": [0.0, 0.0005, 0.001, 0.01, 0.05, 0.1],
        "margin": 0.05,
    },
    "weakstar": {
        "t": 0.5,
        "r": 0.1,
        "n_list": [4, 8, 16, 32, 64],
    },
    "runtime": {
        "output_dir": "output",
        "threads": 1,
        "log_dir": None,
        "log_level": "INFO",
    },
}

ENVIRONMENT_OVERRIDES = {
    "FEF_OUTPUT_DIR": "runtime.output_dir",
    "FEF_THREADS": "runtime.threads",
    "FEF_LOG_LEVEL": "runtime.log_level",
}


# -- value checks -----------------------------------------------------------


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _integer(minimum: int) -> Callable[[str, Any], int]:
    def check(key: str, value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise ConfigError(f"{key} must be an integer >= {minimum}, got {value!r}", key)
        return value

    return check


def _real(low: Optional[float] = None, high: Optional[float] = None, open_low: bool = False, open_high: bool = False):
    def check(key: str, value: Any) -> float:
        if not _is_number(value):
            raise ConfigError(f"{key} must be a finite number, got {value!r}", key)
        value = float(value)
        if low is not None and (value < low or (open_low and value == low)):
            raise ConfigError(f"{key} = {value} is below the allowed range", key)
        if high is not None and (value > high or (open_high and value == high)):
            raise ConfigError(f"{key} = {value} is above the allowed range", key)
        return value

    return check


def _text(optional: bool = False) -> Callable[[str, Any], Optional[str]]:
    def check(key: str, value: Any) -> Optional[str]:
        if value is None and optional:
            return None
        if not isinstance(value, str) or not value.strip():
            raise ConfigError(f"{key} must be a non-empty string, got {value!r}", key)
        return value.strip()

    return check


def _boolean(key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{key} must be true or false, got {value!r}", key)
    return value


def _order(key: str, value: Any) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, bool) or value not in (1, 2):
        raise ConfigError(f"{key} must be null, 1 or 2, got {value!r}", key)
    return int(value)


def _log_level(key: str, value: Any) -> str:
    if not isinstance(value, str) or value.upper() not in LOG_LEVELS:
        raise ConfigError(f"{key} must be one of {', '.join(LOG_LEVELS)}, got {value!r}", key)
    return value.upper()


def _t_grid(key: str, value: Any) -> Union[str, List[float]]:
    if isinstance(value, str):
        expand_t_grid(value, key)
        return value
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key} must be 'uniform:<n>' or a non-empty list", key)
    if not all(_is_number(v) and 0.0 <= v <= 1.0 for v in value):
        raise ConfigError(f"{key} entries must be numbers in [0,1]", key)
    if any(b <= a for a, b in zip(value, value[1:])):
        raise ConfigError(f"{key} must be strictly increasing", key)
    return [float(v) for v in value]


def _r_list(key: str, value: Any) -> List[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key} must be a non-empty list of couplings", key)
    for v in value:
        if not _is_number(v) or v < 0.0:
            raise ConfigError(f"{key} entries must be finite numbers >= 0, got {v!r}", key)
    return [float(v) for v in value]


def _n_list(key: str, value: Any) -> List[int]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key} must be a non-empty list of positive integers", key)
    for v in value:
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"{key} entries must be positive integers, got {v!r}", key)
    return list(value)


SCHEMA: Dict[str, Dict[str, Callable[[str, Any], Any]]] = {
    "problem": {
        "potential": _text(),
        "weight": _text(),
        "grid_points": _integer(2),
    },
    "spectrum": {"count": _integer(1)},
    "fef_surface": {
        "t_grid": _t_grid,
        "r_list": _r_list,
        "r_max": _real(0.0, open_low=True),
        "cross_check": _boolean,
    },
    "reconstruct": {
        "surface": _text(optional=True),
        "margin": _real(0.0, 0.5, open_low=True, open_high=True),
        "smoothing": _integer(0),
        "order": _order,
        "ground_truth": _text(optional=True),
        "candidate": _text(optional=True),
    },
    "validate_fef": {
        "candidate": _text(optional=True),
        "t_grid": _t_grid,
        "r_list": _r_list,
        "margin": _real(0.0, 0.5, open_low=True, open_high=True),
    },
    "weakstar": {
        "t": _real(0.0, 1.0, open_low=True, open_high=True),
        "r": _real(0.0),
        "n_list": _n_list,
    },
    "runtime": {
        "output_dir": _text(),
        "threads": _integer(1),
        "log_dir": _text(optional=True),
        "log_level": _log_level,
    },
}

# values that name files unless they are built-in rules
PATH_KEYS = (
    "problem.potential",
    "problem.weight",
    "reconstruct.surface",
    "reconstruct.ground_truth",
    "reconstruct.candidate",
    "validate_fef.candidate",
    "runtime.output_dir",
    "runtime.log_dir",
)


def expand_t_grid(spec: Union[str, List[float]], key: str = "t_grid") -> np.ndarray:
    """
    'uniform:<n>' -> i/(n-1), i = 0..n-1 (endpoints included); lists pass through

    Args:
        spec: Grid spec string or explicit list
        key: Config key named in errors

    Returns:
        Array of t values
    """
    if not isinstance(spec, str):
        return np.asarray(spec, dtype=float)
    name, _, count = spec.partition(":")
    if name.strip() != "uniform":
        raise ConfigError(f"{key} must be 'uniform:<n>' or a list, got {spec!r}", key)
    try:
        n = int(count)
    except ValueError as e:
        raise ConfigError(f"{key} needs an integer point count, got {spec!r}", key) from e
    if n < 2:
        raise ConfigError(f"{key} needs at least 2 points, got {n}", key)
    return np.linspace(0.0, 1.0, n)


def _is_rule(value: str) -> bool:
    return is_coefficient_rule(value) or is_candidate_rule(value)


class RunConfig:
    """
    Validated run configuration

    Every section of DEFAULT_CONFIG is present after construction. Relative
    paths are resolved against base_dir.
    """

    def __init__(self, config: Dict[str, Any], source: Optional[str] = None, base_dir: Optional[Path] = None):
        self.source = source
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.config = self._validate(config)
        self._check_environment_variables()
        self._resolve_paths()

    def _validate(self, raw: Any) -> Dict[str, Any]:
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object", "<root>")
        merged = copy.deepcopy(DEFAULT_CONFIG)
        for section, values in raw.items():
            if section not in SCHEMA:
                raise ConfigError(f"unknown configuration section '{section}'", section)
            if not isinstance(values, dict):
                raise ConfigError(f"section '{section}' must be a JSON object", section)
            for key, value in values.items():
                dotted = f"{section}.{key}"
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown configuration key '{dotted}'", dotted)
                merged[section][key] = SCHEMA[section][key](dotted, value)
        return merged

    def _check_environment_variables(self) -> None:
        """Check for environment variables that can override runtime settings"""
        for variable, dotted in ENVIRONMENT_OVERRIDES.items():
            raw = os.environ.get(variable)
            if raw is None or raw == "":
                continue
            value: Any = raw
            if dotted == "runtime.threads":
                try:
                    value = int(raw)
                except ValueError as e:
                    raise ConfigError(f"{variable} must be an integer, got {raw!r}", dotted) from e
            self.set(dotted, value)
            logger.info(f"Using {dotted} from environment variable {variable}")

    def _resolve(self, value: Optional[str]) -> Optional[str]:
        if value is None or _is_rule(value):
            return value
        path = Path(value).expanduser()
        return str(path if path.is_absolute() else (self.base_dir / path).resolve())

    def _resolve_paths(self) -> None:
        for dotted in PATH_KEYS:
            section, key = dotted.split(".")
            self.config[section][key] = self._resolve(self.config[section][key])

    def set(self, path: str, value: Any) -> None:
        """Validated assignment of a single dotted key"""
        section, _, key = path.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown configuration key '{path}'", path)
        self.config[section][key] = SCHEMA[section][key](path, value)

    def apply_overrides(
        self, output_dir: Optional[str] = None, threads: Optional[int] = None, grid_points: Optional[int] = None
    ) -> "RunConfig":
        """Command-line flags; they win over the file and the environment"""
        if output_dir is not None:
            self.set("runtime.output_dir", str(Path(output_dir).expanduser().resolve()))
        if threads is not None:
            self.set("runtime.threads", threads)
        if grid_points is not None:
            self.set("problem.grid_points", grid_points)
        return self

    def get(self, path: str, default: Any = None) -> Any:
        """
        Get configuration value by path (e.g., "runtime.output_dir")

        Args:
            path: Path to configuration value (dot separated)
            default: Default value if path not found

        Returns:
            Configuration value or default if not found
        """
        value: Any = self.config
        for part in path.split("."):
            if isinstance(value, dict) and part in value:
                value = value[part]
            else:
                return default
        return value

    def get_problem_config(self) -> Dict[str, Any]:
        return dict(self.config["problem"])

    def get_runtime_config(self) -> Dict[str, Any]:
        return dict(self.config["runtime"])

    def get_section(self, section: str) -> Dict[str, Any]:
        if section not in self.config:
            raise ConfigError(f"unknown configuration section '{section}'", section)
        return dict(self.config[section])

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Load and validate a run configuration

    Args:
        path: JSON file; None gives the defaults (relative paths against the cwd)

    Returns:
        RunConfig
    """
    if path is None:
        return RunConfig({})
    path = Path(path).expanduser().resolve()
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}", "--config")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"configuration file {path} is not valid JSON: {e}", "<root>") from e
    logger.info(f"Configuration loaded from {path}")
    return RunConfig(raw, source=str(path), base_dir=path.parent)
