"""Exception types carrying a machine-readable code and parameter context."""

from __future__ import annotations

import numpy as np


class GeometryError(Exception):
    code = "GEOMETRY_ERROR"

    def __init__(self, message: str, theta=None, **context):
        super().__init__(message)
        self.message = message
        self.theta = None if theta is None else np.asarray(theta, dtype=float).tolist()
        self.context = context

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.theta is not None:
            out["theta"] = self.theta
        for k, v in self.context.items():
            out[k] = float(v) if isinstance(v, (np.floating, float)) else v
        return out


class DomainError(GeometryError, ValueError):
    code = "DOMAIN_ERROR"


class NumericalError(GeometryError):
    """Numerical failure; ``code`` names the failure (EXCEPTIONAL_POINT, ...)."""

    def __init__(self, code: str, message: str, theta=None, **context):
        super().__init__(message, theta=theta, **context)
        self.code = code


class ExceptionalPointError(NumericalError):
    def __init__(self, message: str, theta=None, **context):
        super().__init__("EXCEPTIONAL_POINT", message, theta=theta, **context)


class NormalizationError(NumericalError):
    def __init__(self, message: str, theta=None, **context):
        super().__init__("NORMALIZATION_VIOLATION", message, theta=theta, **context)
