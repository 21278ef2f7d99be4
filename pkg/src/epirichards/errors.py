"""Exception hierarchy shared across the package."""


class EpiError(Exception):
    """Base class for all package errors."""


class ConfigError(EpiError, ValueError):
    """Invalid configuration or argument combination."""


class DataError(EpiError, ValueError):
    """Input data violates a precondition (bad counts, gaps, too short)."""


class SchemaError(DataError):
    """A required CSV column is missing."""


class ParseError(DataError):
    """A CSV row could not be parsed."""


class DomainError(EpiError, ValueError):
    """A numeric argument lies outside the function's domain."""


class DegenerateGeometryError(DomainError):
    """The three-point final-size estimator is undefined for this input."""


class SolverError(EpiError, RuntimeError):
    """A root finder failed to bracket or converge."""


class InitializationError(EpiError, RuntimeError):
    """No sampler starting point with finite log posterior was found."""
