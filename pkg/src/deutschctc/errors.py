"""Exception hierarchy shared by every module in the package."""


class CTCError(Exception):
    """Base class for all package errors."""


class DimensionError(CTCError, ValueError):
    """Operand shapes or subsystem dimensions do not agree."""


class InvalidStateError(CTCError, ValueError):
    """A matrix or vector is not a valid quantum state."""


class ContractError(CTCError, ValueError):
    """An operation was called outside its documented precondition."""


class ConsistencyError(CTCError):
    """A CTC state does not satisfy the self-consistency condition."""


class ConfigurationError(CTCError, ValueError):
    """An interaction circuit or protocol setup is wired incorrectly."""


class SolverError(CTCError, RuntimeError):
    """Numerical breakdown in the fixed-point or entropy solver."""
