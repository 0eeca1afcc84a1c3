#!/usr/bin/env python3
"""
Error kinds raised by the toolkit.

Argument and data problems derive from ValueError, numerical failures from
RuntimeError, so callers that only know the builtins still catch them.
"""

from typing import Any, Dict, Optional


class FefToolkitError(Exception):
    """Base class for every error raised by the toolkit"""

    kind = "error"
    exit_code = 1

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form used by the command line error channel"""
        return {"error": self.kind, "message": str(self)}


class InvalidArgumentError(FefToolkitError, ValueError):
    kind = "invalid-argument"
    exit_code = 2


class InvalidDataError(FefToolkitError, ValueError):
    kind = "invalid-data"
    exit_code = 3


class DataIntegrityError(InvalidDataError):
    kind = "data-integrity"


class SurfaceContractError(InvalidArgumentError):
    """A surface or candidate that does not satisfy the input contract"""

    kind = "invalid-input"
    exit_code = 4


class ResolutionError(InvalidArgumentError):
    kind = "resolution"


class ConfigError(FefToolkitError, ValueError):
    kind = "config"
    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        if self.key is not None:
            payload["key"] = self.key
        return payload


class IntegrationOverflowError(FefToolkitError, RuntimeError):
    kind = "overflow"

    def __init__(self, message: str, lam: float):
        super().__init__(message)
        self.lam = lam

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        payload["lambda"] = self.lam
        return payload


class EigenvalueSearchError(FefToolkitError, RuntimeError):
    kind = "search-failure"

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        payload["diagnostics"] = self.diagnostics
        return payload


class ConsistencyError(FefToolkitError, RuntimeError):
    kind = "internal-inconsistency"


class SingularDerivativeError(FefToolkitError, RuntimeError):
    kind = "singular-derivative"


class CouplingRangeError(FefToolkitError, RuntimeError):
    kind = "range"


class ReconstructionError(FefToolkitError, RuntimeError):
    kind = "reconstruction-failure"
