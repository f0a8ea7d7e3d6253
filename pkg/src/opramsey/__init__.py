"""Finite-dimensional operator spaces, cb norms and dual Ramsey constructions."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetError,
    CategoryError,
    ConsistencyError,
    OpRamseyError,
    PreconditionError,
    ShapeError,
)
from .opspace import BlockLinearMap, SpaceDescriptor  # noqa: E402

__all__ = [
    "__version__",
    "BlockLinearMap",
    "SpaceDescriptor",
    "OpRamseyError",
    "PreconditionError",
    "ShapeError",
    "CategoryError",
    "BudgetError",
    "ConsistencyError",
]
