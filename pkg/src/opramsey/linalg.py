"""Dense complex matrix primitives.

Every higher-level norm, Choi test and SDP certificate in the package goes
through these few functions, so they are kept small and strict about input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal, Optional

import numpy as np
from numpy.typing import ArrayLike

from .errors import ArityError, DimensionError, PreconditionError, SymmetryError

TOL_LINALG = 1e-11
TOL_HERM = 1e-10


@dataclass(frozen=True)
class ComplexMatrix:
    """Immutable row-major complex matrix with a JSON encoding."""

    rows: int
    cols: int
    entries: tuple[complex, ...]

    def __post_init__(self) -> None:
        if self.rows <= 0 or self.cols <= 0:
            raise DimensionError("matrix must be nonempty")
        if len(self.entries) != self.rows * self.cols:
            raise DimensionError(
                f"expected {self.rows * self.cols} entries, got {len(self.entries)}"
            )

    @classmethod
    def from_array(cls, a: ArrayLike) -> "ComplexMatrix":
        arr = as_matrix(a)
        return cls(arr.shape[0], arr.shape[1], tuple(complex(z) for z in arr.ravel()))

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=complex).reshape(self.rows, self.cols)

    def to_json(self) -> dict[str, Any]:
        return matrix_to_json(self.to_array())

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ComplexMatrix":
        return cls.from_array(matrix_from_json(obj))


def as_matrix(a: ArrayLike) -> np.ndarray:
    """Return a fresh 2-D complex array, rejecting empty input."""
    if isinstance(a, ComplexMatrix):
        return a.to_array()
    arr = np.array(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    if arr.size == 0:
        raise DimensionError("matrix must be nonempty")
    return arr


def op_norm(m: ArrayLike) -> float:
    """Largest singular value (LAPACK divide-and-conquer SVD)."""
    arr = as_matrix(m)
    return float(np.linalg.svd(arr, compute_uv=False)[0])


def is_hermitian(m: ArrayLike, tol: float = TOL_HERM) -> bool:
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(arr))))
    return float(np.max(np.abs(arr - arr.conj().T))) <= tol * scale


def herm_spectrum(m: ArrayLike, tol: float = TOL_HERM) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix in descending order."""
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise SymmetryError(f"matrix is not square: {arr.shape}")
    if not is_hermitian(arr, tol):
        raise SymmetryError("matrix is not Hermitian within tolerance")
    herm = (arr + arr.conj().T) / 2
    return np.linalg.eigvalsh(herm)[::-1].copy()


def min_eig(m: ArrayLike) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    arr = as_matrix(m)
    return float(np.linalg.eigvalsh((arr + arr.conj().T) / 2)[0])


def assemble(
    kind: Literal["kron", "direct_sum", "adjoint"],
    a: ArrayLike,
    b: Optional[ArrayLike] = None,
) -> np.ndarray:
    """Kronecker product, block-diagonal sum or conjugate transpose."""
    left = as_matrix(a)
    if kind == "adjoint":
        return left.conj().T.copy()
    if kind not in ("kron", "direct_sum"):
        raise PreconditionError(f"unknown assemble kind {kind!r}")
    if b is None:
        raise ArityError(f"{kind} needs two operands")
    right = as_matrix(b)
    if kind == "kron":
        return np.kron(left, right)
    return block_diag(left, right)


def block_diag(*mats: ArrayLike) -> np.ndarray:
    """Block-diagonal matrix; zero-sized blocks are allowed here."""
    arrs = [np.atleast_2d(np.asarray(m, dtype=complex)) for m in mats]
    r = sum(x.shape[0] for x in arrs)
    c = sum(x.shape[1] for x in arrs)
    out = np.zeros((r, c), dtype=complex)
    i = j = 0
    for x in arrs:
        out[i : i + x.shape[0], j : j + x.shape[1]] = x
        i += x.shape[0]
        j += x.shape[1]
    return out


def matrix_to_json(m: ArrayLike) -> dict[str, Any]:
    arr = as_matrix(m)
    return {
        "rows": int(arr.shape[0]),
        "cols": int(arr.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in arr.ravel()],
    }


def matrix_from_json(obj: dict[str, Any]) -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise DimensionError(f"malformed matrix JSON: {exc}") from exc
    if rows <= 0 or cols <= 0 or len(data) != rows * cols:
        raise DimensionError("matrix JSON has inconsistent rows/cols/data")
    flat = np.array([complex(re, im) for re, im in data], dtype=complex)
    return flat.reshape(rows, cols)
