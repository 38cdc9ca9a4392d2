"""Numerical laboratory for the ground-state energy of many polarons."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    InitializationError,
    LemmaViolation,
    PolaronLabError,
    ResolutionError,
)

__all__ = [
    "__version__",
    "PolaronLabError",
    "DomainError",
    "DivergenceError",
    "ConfigurationError",
    "ConvergenceError",
    "ResolutionError",
    "LemmaViolation",
    "InitializationError",
]
