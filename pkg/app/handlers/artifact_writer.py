#!/usr/bin/env python3
"""
Artifact output and input for command runs

Every file is written to a temporary sibling and renamed into place, so a
reader never sees a half-written artifact. CSV output uses 17 significant
digits and '\\n' line endings, which makes reruns byte-identical.
"""

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from app.analysis.fef import LambdaSurface
from app.core.exceptions import InvalidArgumentError, InvalidDataError, SurfaceContractError
from app.models.coefficients import POTENTIAL, CoefficientFunction

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"
CSV_FLOAT_PRECISION = "round_trip"


def _json_ready(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become null"""
    if isinstance(value, dict):
        return {key: _json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(item) for item in value]
    if isinstance(value, np.ndarray):
        return _json_ready(value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def _json_default(value: Any) -> Any:
    raise TypeError(f"cannot serialize {type(value).__name__}")


class ArtifactWriter:
    """
    Writes the files of one command run into an output directory and keeps
    track of what was written for the command result dict.
    """

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.files: List[str] = []
        logger.debug(f"📁 Artifact writer ready in {self.output_dir}")

    def _atomic_write(self, name: str, text: str) -> Path:
        target = self.output_dir / name
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.output_dir)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.files.append(str(target))
        logger.info(f"💾 Wrote {target}")
        return target

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        return self._atomic_write(name, text)

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        text = json.dumps(
            _json_ready(payload), indent=2, sort_keys=True, default=_json_default, allow_nan=False
        ) + "\n"
        return self._atomic_write(name, text)

    def write_text(self, name: str, text: str) -> Path:
        return self._atomic_write(name, text)

    def result(self, success: bool = True, error: str = "", **extra: Any) -> Dict[str, Any]:
        """Command result dict: success flag, written files, error text"""
        return {"success": success, "files": list(self.files), "error": error, **extra}


def read_coefficient_csv(path: Union[str, Path], kind: str = POTENTIAL) -> CoefficientFunction:
    """Read a coefficient table with columns x, value"""
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"coefficient file not found: {path}")
    try:
        frame = pd.read_csv(path, float_precision=CSV_FLOAT_PRECISION)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InvalidDataError(f"cannot parse coefficient file {path}: {e}") from e
    return CoefficientFunction.from_frame(frame, kind=kind, name=path.name)


def read_surface(path: Union[str, Path]) -> LambdaSurface:
    """Read a surface written by fef-surface (JSON) or any long-format t,r,lambda CSV"""
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"surface file not found: {path}")
    if path.suffix.lower() == ".json":
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise InvalidDataError(f"surface file {path} is not valid JSON: {e}") from e
        if not isinstance(payload, dict):
            raise SurfaceContractError(f"surface file {path} must hold a JSON object")
        return LambdaSurface.from_json_dict(payload)
    try:
        frame = pd.read_csv(path, float_precision=CSV_FLOAT_PRECISION)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InvalidDataError(f"cannot parse surface file {path}: {e}") from e
    return LambdaSurface.from_frame(frame, metadata={"source": str(path)})

