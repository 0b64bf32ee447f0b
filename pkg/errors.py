"""Exception hierarchy shared by the geometry, group, kernel and verification modules."""

from __future__ import annotations

from typing import Any, Dict, List, Optional


class SpectralVerifierError(Exception):
    """Base class for every error raised by this project."""


class DomainError(SpectralVerifierError, ValueError):
    """Input outside the mathematical domain of an operation."""


class PrecisionError(SpectralVerifierError):
    """Result would be numerically meaningless in double precision."""


class AmbiguousClassificationError(SpectralVerifierError):
    """Trace too close to the boundary of [-2, 2] to classify safely."""

    def __init__(self, message: str, trace: complex) -> None:
        super().__init__(message)
        self.trace = trace


class UnsupportedElementError(SpectralVerifierError):
    """Operation needs a loxodromic (or identity) element."""


class InvalidGroupError(SpectralVerifierError):
    """Generators do not describe a supported convex cocompact group."""


class BudgetExceededError(SpectralVerifierError):
    """Element or work cap reached; `partial` holds what was computed so far."""

    def __init__(self, message: str, partial: Any = None) -> None:
        super().__init__(message)
        self.partial = partial


class InsufficientDataError(SpectralVerifierError):
    """Not enough elements, shells or points to produce an estimate."""


class UnsupportedOrderError(SpectralVerifierError):
    """Derivative order outside the supported range."""


class HypothesisViolationError(SpectralVerifierError):
    """A theorem hypothesis (critical exponent gate, choice of s, case analysis) fails."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitError(SpectralVerifierError):
    """Least-squares fit is degenerate."""


class CacheFormatError(SpectralVerifierError):
    """Orbit cache file is unreadable or has an unsupported version."""


class ConfigError(SpectralVerifierError):
    """Run configuration failed validation."""

    def __init__(self, problems: List[str]) -> None:
        super().__init__("Invalid configuration: " + "; ".join(problems))
        self.problems = problems
