"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class OpRamseyError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class PreconditionError(OpRamseyError, ValueError):
    """An input violates a documented precondition."""

    exit_code = 2


class DimensionError(PreconditionError):
    """Empty or size-mismatched matrix input."""


class ShapeError(DimensionError):
    """Block or constraint dimensions do not agree."""


class ArityError(PreconditionError):
    """A binary operation was called without its second operand."""


class SymmetryError(PreconditionError):
    """A matrix that must be Hermitian is not."""


class InfeasibleError(PreconditionError):
    """A requested object (extension, amalgam, embedding) does not exist."""


class BudgetError(OpRamseyError, RuntimeError):
    """A search exceeded its enumeration or iteration budget."""

    exit_code = 3


class CategoryError(PreconditionError):
    """An operation needs square blocks (an operator system) but got rectangular ones."""


class ConsistencyError(OpRamseyError, RuntimeError):
    """A numerical step produced a result that theory rules out."""


class RigidityError(PreconditionError):
    """A sequence is not a rigid surjection where one is required."""


class NetConstructionError(PreconditionError):
    """A finite net failed its sampled density verification."""

    def __init__(self, message: str, sample=None):
        super().__init__(message)
        self.sample = sample


class NetResolutionError(NetConstructionError):
    """A net is too coarse for the requested tolerance."""


class EncodingError(OpRamseyError, TypeError):
    """A report payload cannot be serialized."""
