"""Exception types shared across the package."""


class EBCError(Exception):
    """Base class for all package errors."""


class InfeasibleForwardJoint(EBCError, ValueError):
    """The joint erasure probability is outside its Frechet bounds."""


class InvalidPmf(EBCError, ValueError):
    """A probability mass function has a negative entry or does not sum to one."""


class InvalidProbability(EBCError, ValueError):
    """A scalar probability lies outside [0, 1]."""


class DegenerateChannel(EBCError, ValueError):
    """A forward link is always erased, so a bound coefficient is undefined."""


class PreconditionViolated(EBCError, ValueError):
    """A protocol or formula was called on parameters outside its structure."""


class RankDeficient(EBCError, ArithmeticError):
    """A linear system over the field does not have full column rank."""


class DimensionMismatch(EBCError, ValueError):
    """Matrix and vector shapes disagree."""


class DecodeFailure(EBCError):
    """A receiver could not recover its message."""
