"""Exception hierarchy shared across the package."""


class PtwideError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(PtwideError):
    """A configuration value violates its invariants."""


class StructuralError(PtwideError):
    """Input shapes or structure (e.g. symmetry) are wrong."""


class NumericError(PtwideError):
    """A numerical computation produced non-finite values or failed to converge."""
