"""Information-geometric tensors and connections for parametrized pure states."""

from .errors import DomainError, ExceptionalPointError, GeometryError, NormalizationError, NumericalError
from .state import Grid, PureState, StateFamily, evaluate, inner, polar, expectation
from .tensors import ConnectionField, GeometricTensor

__all__ = [
    "ConnectionField", "DomainError", "ExceptionalPointError", "GeometricTensor",
    "GeometryError", "Grid", "NormalizationError", "NumericalError", "PureState",
    "StateFamily", "evaluate", "expectation", "inner", "polar",
]
