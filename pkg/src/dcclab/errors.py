"""Exception hierarchy shared by every dcclab module."""


class DccLabError(Exception):
    """Base class for dcclab errors."""


class DomainError(DccLabError, ValueError):
    """An input lies outside the domain of the operation."""


class StructureError(DccLabError, ValueError):
    """The model does not have the structure an operation requires."""


class NumericError(DccLabError, ArithmeticError):
    """A numerical routine failed (non-convergence, overflow, lost definiteness)."""
