"""Exception types shared across the package."""


class OrliczError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(OrliczError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(OrliczError, ValueError):
    """Inputs violate a structural precondition (shapes, bounds, support)."""


class DegenerateInputError(OrliczError, ValueError):
    """Data is too degenerate to produce a meaningful result."""


class DivergentSeriesError(DomainError):
    """The series sum_j j^-gamma diverges (gamma <= 1)."""
