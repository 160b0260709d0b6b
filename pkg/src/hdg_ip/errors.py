"""
HDG-IP Solver - Error Types

Every failure raised by the library derives from ``HdgError`` so the CLI can map
it to an exit status in one place.
"""

from typing import List, Optional


class HdgError(Exception):
    """Base class for solver errors."""


class InvalidArgumentError(HdgError, ValueError):
    """An argument is outside its documented domain."""


class CapabilityError(HdgError):
    """The request exceeds what the implementation supports."""


class MeshParseError(HdgError):
    """Malformed mesh file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class MeshValidationError(HdgError):
    """Mesh connectivity is not conforming or not consistent."""


class ClassificationError(HdgError):
    """A face cannot be assigned to a Fichera set or interface part."""

    def __init__(self, message: str, face: int):
        self.face = face
        super().__init__(f"face {face}: {message}")


class CoefficientError(HdgError):
    """A coefficient field violates its admissibility conditions."""


class DomainError(HdgError):
    """A field was evaluated outside the domain where it is defined."""


class RegimeError(HdgError):
    """The requested quantity is undefined in the current regime."""


class ConfigurationError(HdgError):
    """Method parameters violate the stability requirements."""

    def __init__(self, message: str, field: Optional[str] = None, face: Optional[int] = None):
        self.field = field
        self.face = face
        super().__init__(message)


class DegenerateFaceError(HdgError):
    """Both penalty values on a face vanish."""


class LocalSolvabilityError(HdgError):
    """An element-local interior block cannot be factorised."""

    def __init__(self, message: str, element: int):
        self.element = element
        self.reason = message
        super().__init__(f"element {element}: {message}")


class SingularityError(HdgError):
    """The global skeleton system is singular."""


class ConvergenceError(HdgError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message: str, history: Optional[List[float]] = None):
        self.history = list(history or [])
        super().__init__(message)
