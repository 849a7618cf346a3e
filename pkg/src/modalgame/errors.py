"""Exception hierarchy shared across the package."""


class ModalGameError(Exception):
    """Base class for all package errors."""


class ValidationError(ModalGameError, ValueError):
    """Input data violates a documented invariant.

    ``field`` carries the dotted path of the offending field when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class DimensionMismatch(ValidationError):
    pass


class UnreachableOD(ValidationError):
    pass


class NonpositiveIdleFleet(ValidationError):
    pass


class ZeroFrequencyOnUsedLine(ValidationError):
    pass


class ParseError(ModalGameError):
    pass


class SchemaVersionError(ModalGameError):
    pass


class ConfigError(ModalGameError, ValueError):
    pass


class InfeasibleStart(ModalGameError):
    pass


class NotConverged(ModalGameError):
    pass


class EmptyGrid(ModalGameError, ValueError):
    pass


class EmptyCell(ModalGameError, ValueError):
    pass


class Infeasible(ModalGameError):
    """No transit strategy satisfies the profit floor."""


class EmptyGroup(ModalGameError):
    pass


class NonpositiveAccessibility(ModalGameError, ValueError):
    pass


class IoError(ModalGameError, OSError):
    pass
