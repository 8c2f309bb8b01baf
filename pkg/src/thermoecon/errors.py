"""Exception types shared across the package."""


class ThermoeconError(Exception):
    """Base class for all package errors."""


class DomainError(ThermoeconError):
    """State outside the evaluable domain (boundary/negative coordinates,
    non-desirable money, table hull violations)."""


class DimensionError(ThermoeconError):
    """Mismatched goods dimensions between a model and a state/operation."""


class NoRootError(ThermoeconError):
    """A bracketed solve found no sign change (e.g. no common temperature)."""


class SolverError(ThermoeconError):
    """An optimizer or root-finder failed to converge."""


class InfeasibleError(ThermoeconError):
    """A protocol leg or constraint set cannot be satisfied inside the
    interior margin."""


class InsufficientDataError(ThermoeconError):
    """Not enough samples for the requested estimate."""


class ConfigError(ThermoeconError):
    """Invalid scenario/model configuration; message carries the key path."""
