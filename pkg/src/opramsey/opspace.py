"""Concrete finite-dimensional operator spaces.

A space is a finite ∞-sum ``M_{q_1,s_1} ⊕ ... ⊕ M_{q_k,s_k}`` of rectangular
matrix blocks, optionally cut down to the span of an explicit basis. Ambient
coordinates flatten each block row-major and concatenate the blocks; subspace
coordinates are coefficients against the basis rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import PreconditionError, ShapeError
from .linalg import op_norm

CATEGORIES = ("Osp", "Osy")
# "inf": ∞-sum of M_{q,s} blocks. "one": ℓ_1-sum of trace-class blocks T_{s,q},
# stored with their own shape (s, q); these are the duals of "inf" spaces.
KINDS = ("inf", "one")
ISOMETRY_TOL = 1e-6


def stability_modulus(category: str, delta: float, pointed: bool = False) -> float:
    """Amalgamation modulus: δ for operator spaces, 2δ for systems, +δ if pointed."""
    if category not in CATEGORIES:
        raise PreconditionError(f"unknown category {category!r}")
    base = delta if category == "Osp" else 2 * delta
    return base + delta if pointed else base


@dataclass(frozen=True, eq=False)
class SpaceDescriptor:
    blocks: tuple[tuple[int, int], ...]
    basis: Optional[np.ndarray] = None
    category: str = "Osp"
    unit: Optional[np.ndarray] = None
    kind: str = "inf"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise PreconditionError(f"kind must be one of {KINDS}")
        blocks = tuple((int(q), int(s)) for q, s in self.blocks)
        if not blocks or any(q <= 0 or s <= 0 for q, s in blocks):
            raise ShapeError("blocks must be a nonempty list of positive (q, s) pairs")
        object.__setattr__(self, "blocks", blocks)
        if self.category not in CATEGORIES:
            raise PreconditionError(f"category must be one of {CATEGORIES}")
        amb = sum(q * s for q, s in blocks)
        if self.basis is not None:
            basis = np.array(self.basis, dtype=complex)
            if basis.ndim != 2 or basis.shape[1] != amb or basis.shape[0] == 0:
                raise ShapeError(f"basis must have shape (k, {amb})")
            rows = basis / np.linalg.norm(basis, axis=1, keepdims=True)
            if abs(np.linalg.det(rows.conj() @ rows.T)) <= 1e-12:
                raise PreconditionError("subspace basis is not linearly independent")
            object.__setattr__(self, "basis", basis)
        if self.category == "Osy":
            if any(q != s for q, s in blocks):
                raise PreconditionError("operator systems need square blocks")
            one = self.flatten([np.eye(q) for q, _ in blocks])
            if self.unit is not None and not np.allclose(self.unit, one, atol=1e-10):
                raise PreconditionError("unit must be the all-identity element")
            object.__setattr__(self, "unit", one)
            if self.basis is not None and not self.contains(one):
                raise PreconditionError("unit is not in the span of the subspace basis")
        elif self.unit is not None:
            raise PreconditionError("only operator systems carry a unit")

    # -- constructors -------------------------------------------------
    @classmethod
    def full(cls, blocks: Sequence[tuple[int, int]], category: str = "Osp") -> "SpaceDescriptor":
        return cls(tuple(blocks), None, category)

    @classmethod
    def ell_inf(cls, n: int, q: int = 1, s: Optional[int] = None, category: str = "Osp") -> "SpaceDescriptor":
        return cls(((q, q if s is None else s),) * n, None, category)

    @classmethod
    def ell_one(cls, n: int, s: int = 1, q: Optional[int] = None) -> "SpaceDescriptor":
        """``ℓ_1^n(T_{s,q})`` with blocks of shape s x q."""
        return cls(((s, s if q is None else q),) * n, None, "Osp", None, "one")

    @classmethod
    def matrices(cls, q: int, s: Optional[int] = None, category: str = "Osp") -> "SpaceDescriptor":
        return cls(((q, q if s is None else s),), None, category)

    # -- geometry -----------------------------------------------------
    @property
    def ambient_dim(self) -> int:
        return sum(q * s for q, s in self.blocks)

    @property
    def dim(self) -> int:
        return self.ambient_dim if self.basis is None else int(self.basis.shape[0])

    @property
    def is_full(self) -> bool:
        return self.basis is None

    @property
    def offsets(self) -> list[int]:
        out, acc = [], 0
        for q, s in self.blocks:
            out.append(acc)
            acc += q * s
        return out

    @property
    def row_dims(self) -> tuple[int, int]:
        """Total row and column dimensions of the block-diagonal picture."""
        return sum(q for q, _ in self.blocks), sum(s for _, s in self.blocks)

    def ambient(self) -> "SpaceDescriptor":
        return SpaceDescriptor(self.blocks, None, self.category, None, self.kind)

    def dual(self) -> "SpaceDescriptor":
        """The dual ∞-sum or ℓ_1-sum, with transposed block shapes."""
        if not self.is_full:
            raise PreconditionError("duals are only represented for full sums")
        return SpaceDescriptor(
            tuple((s, q) for q, s in self.blocks), None, "Osp", None,
            "one" if self.kind == "inf" else "inf",
        )

    def basis_matrix(self) -> np.ndarray:
        """Rows are the basis vectors in ambient coordinates."""
        return np.eye(self.ambient_dim, dtype=complex) if self.basis is None else self.basis

    def split(self, vec: np.ndarray) -> list[np.ndarray]:
        vec = np.asarray(vec, dtype=complex)
        return [
            vec[o : o + q * s].reshape(q, s) for o, (q, s) in zip(self.offsets, self.blocks)
        ]

    def flatten(self, mats: Sequence[Any]) -> np.ndarray:
        if len(mats) != len(self.blocks):
            raise ShapeError("one matrix per block expected")
        parts = []
        for m, (q, s) in zip(mats, self.blocks):
            arr = np.asarray(m, dtype=complex)
            if arr.shape != (q, s):
                raise ShapeError(f"block has shape {arr.shape}, expected {(q, s)}")
            parts.append(arr.ravel())
        return np.concatenate(parts)

    def to_ambient(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=complex)
        return coords if self.basis is None else coords @ self.basis

    def from_ambient(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=complex)
        if self.basis is None:
            return vec
        return np.linalg.lstsq(self.basis.T, vec.T, rcond=None)[0].T

    def contains(self, vec: np.ndarray, tol: float = 1e-10) -> bool:
        back = self.to_ambient(self.from_ambient(vec))
        return float(np.max(np.abs(back - vec), initial=0.0)) <= tol * max(1.0, float(np.max(np.abs(vec), initial=0.0)))

    def block_diagonal(self, vec: np.ndarray) -> np.ndarray:
        """The element as one block-diagonal (Σq) x (Σs) operator."""
        from .linalg import block_diag

        return block_diag(*self.split(vec))

    # -- serialization ------------------------------------------------
    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"blocks": [list(b) for b in self.blocks], "category": self.category}
        if self.kind != "inf":
            out["kind"] = self.kind
        if self.basis is not None:
            out["basis"] = [[[float(z.real), float(z.imag)] for z in row] for row in self.basis]
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SpaceDescriptor":
        try:
            blocks = [tuple(b) for b in obj["blocks"]]
        except (KeyError, TypeError) as exc:
            raise ShapeError(f"malformed space JSON: {exc}") from exc
        basis = obj.get("basis")
        if basis is not None:
            basis = np.array([[complex(re, im) for re, im in row] for row in basis])
        return cls(tuple(blocks), basis, obj.get("category", "Osp"), None, obj.get("kind", "inf"))

    def same_as(self, other: "SpaceDescriptor") -> bool:
        if self.blocks != other.blocks or self.category != other.category or self.kind != other.kind:
            return False
        if (self.basis is None) != (other.basis is None):
            return False
        return self.basis is None or np.allclose(self.basis, other.basis)


@dataclass(frozen=True)
class DualDescriptor:
    """The ℓ_1-type dual of an ∞-sum, with the normalized trace pairing.

    The dual of ``M_{q,s}`` is ``T_{s,q}``: s x q matrices paired through
    ``(α, β) ↦ tr(α β) / s``. The dual norm of β is its trace norm over s.
    """

    base: SpaceDescriptor
    trace_normalization: tuple[float, ...]

    @classmethod
    def of(cls, space: SpaceDescriptor) -> "DualDescriptor":
        if not space.is_full:
            raise PreconditionError("duals are only represented for full ∞-sums")
        return cls(
            SpaceDescriptor(tuple((s, q) for q, s in space.blocks)),
            tuple(1.0 / s for _, s in space.blocks),
        )

    def pair(self, alpha: np.ndarray, beta: np.ndarray) -> complex:
        """⟨α, β⟩ with α in the predual (blocks q x s) and β in this dual."""
        pre = SpaceDescriptor(tuple((s, q) for q, s in self.base.blocks))
        total = 0j
        for a, b, w in zip(pre.split(alpha), self.base.split(beta), self.trace_normalization):
            total += w * np.trace(a @ b)
        return complex(total)

    def norm(self, beta: np.ndarray) -> float:
        return float(
            sum(
                w * np.sum(np.linalg.svd(b, compute_uv=False))
                for b, w in zip(self.base.split(beta), self.trace_normalization)
            )
        )

    def pairing_matrix(self) -> np.ndarray:
        """G with ⟨α, β⟩ = α @ G @ β in ambient coordinates."""
        pre = SpaceDescriptor(tuple((s, q) for q, s in self.base.blocks))
        d = pre.ambient_dim
        g = np.zeros((d, d), dtype=complex)
        eye = np.eye(d)
        for i in range(d):
            for j in range(d):
                g[i, j] = self.pair(eye[i], eye[j])
        return g


@dataclass(frozen=True, eq=False)
class SpaceElement:
    """An element of ``M_m(X)``: per block a (m q_i) x (m s_i) matrix."""

    space: SpaceDescriptor
    level: int
    data: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        m = int(self.level)
        if m < 1:
            raise ShapeError("level must be positive")
        if len(self.data) != len(self.space.blocks):
            raise ShapeError("one data matrix per block expected")
        data = tuple(np.array(d, dtype=complex) for d in self.data)
        for d, (q, s) in zip(data, self.space.blocks):
            if d.shape != (m * q, m * s):
                raise ShapeError(f"block data has shape {d.shape}, expected {(m * q, m * s)}")
        object.__setattr__(self, "data", data)
        if self.space.basis is not None:
            amb = _entries_to_ambient(self.space, m, data)
            flat = amb.reshape(m * m, -1)
            back = self.space.to_ambient(self.space.from_ambient(flat))
            if np.max(np.abs(back - flat)) > 1e-10 * max(1.0, float(np.max(np.abs(flat)))):
                raise ShapeError("element does not lie in M_m(span of basis)")

    def coords(self) -> np.ndarray:
        """Coefficients of shape (m, m, dim)."""
        m = self.level
        amb = _entries_to_ambient(self.space, m, self.data).reshape(m * m, -1)
        return self.space.from_ambient(amb).reshape(m, m, self.space.dim)


def _entries_to_ambient(space: SpaceDescriptor, m: int, data: Sequence[np.ndarray]) -> np.ndarray:
    """Rearrange level-m block data to an (m, m, ambient_dim) array."""
    parts = []
    for d, (q, s) in zip(data, space.blocks):
        parts.append(d.reshape(m, q, m, s).transpose(0, 2, 1, 3).reshape(m, m, q * s))
    return np.concatenate(parts, axis=2)


def element_from_coords(space: SpaceDescriptor, coords: np.ndarray) -> SpaceElement:
    """Build an element of ``M_m(X)`` from coefficients of shape (m, m, dim)."""
    c = np.asarray(coords, dtype=complex)
    if c.ndim == 1:
        c = c.reshape(1, 1, -1)
    m = c.shape[0]
    if c.shape != (m, m, space.dim):
        raise ShapeError(f"coords must have shape (m, m, {space.dim})")
    amb = space.to_ambient(c.reshape(m * m, -1)).reshape(m, m, -1)
    data = []
    for o, (q, s) in zip(space.offsets, space.blocks):
        blk = amb[:, :, o : o + q * s].reshape(m, m, q, s).transpose(0, 2, 1, 3)
        data.append(blk.reshape(m * q, m * s))
    return SpaceElement(space, m, tuple(data))


def level_norm(x: SpaceElement) -> float:
    """The ∞-sum matrix norm: the largest block operator norm.

    For ℓ_1-sums of trace-class blocks only level 1 is supported, where the
    norm is the sum of normalized trace norms.
    """
    if x.space.kind == "one":
        if x.level != 1:
            raise PreconditionError("matrix norms of ℓ_1-sums are only available at level 1")
        return float(
            sum(np.sum(np.linalg.svd(d, compute_uv=False)) / d.shape[0] for d in x.data)
        )
    return max(op_norm(d) for d in x.data)


@dataclass(frozen=True, eq=False)
class BlockLinearMap:
    """A linear map stored as its matrix in domain/codomain coordinates."""

    domain: SpaceDescriptor
    codomain: SpaceDescriptor
    action: np.ndarray
    dual_view: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        a = np.array(self.action, dtype=complex)
        if a.shape != (self.codomain.dim, self.domain.dim):
            raise ShapeError(
                f"action has shape {a.shape}, expected {(self.codomain.dim, self.domain.dim)}"
            )
        object.__setattr__(self, "action", a)
        if self.dual_view is not None:
            dv = np.array(self.dual_view, dtype=complex)
            if dv.ndim != 4 or not np.array_equal(reassemble_dual_view(dv), a):
                raise ShapeError("dual_view does not reassemble to the action")
            object.__setattr__(self, "dual_view", dv)

    def __call__(self, x: SpaceElement) -> SpaceElement:
        if x.space.dim != self.domain.dim:
            raise ShapeError("element is not in the domain")
        c = x.coords()
        return element_from_coords(self.codomain, c @ self.action.T)

    def apply_vec(self, coords: np.ndarray) -> np.ndarray:
        return self.action @ np.asarray(coords, dtype=complex)

    def compose(self, inner: "BlockLinearMap") -> "BlockLinearMap":
        """``self ∘ inner``."""
        if inner.codomain.dim != self.domain.dim:
            raise ShapeError("cannot compose: dimension mismatch")
        return BlockLinearMap(inner.domain, self.codomain, self.action @ inner.action)

    def scaled(self, c: complex) -> "BlockLinearMap":
        return BlockLinearMap(self.domain, self.codomain, c * self.action)

    def dualize(self) -> "BlockLinearMap":
        return dualize(self)

    def with_ambient_codomain(self) -> "BlockLinearMap":
        """Compose with the inclusion of the codomain into its ambient ∞-sum."""
        if self.codomain.is_full:
            return self
        return BlockLinearMap(self.domain, self.codomain.ambient(), self.codomain.basis.T @ self.action)

    def codomain_component(self, j: int) -> np.ndarray:
        """Action into the j-th ambient block, shape (q_j s_j, dim domain)."""
        f = self.with_ambient_codomain()
        o = f.codomain.offsets[j]
        q, s = f.codomain.blocks[j]
        return f.action[o : o + q * s]

    def is_injective(self, rtol: float = 1e-10) -> bool:
        if self.domain.dim > self.codomain.dim:
            return False
        sv = np.linalg.svd(self.action, compute_uv=False)
        return bool(sv.size and sv[-1] > rtol * max(1.0, sv[0]))

    def inverse_on_image(self) -> "BlockLinearMap":
        """The inverse defined on the image, with image basis from a thin QR."""
        if not self.is_injective():
            raise PreconditionError("map is not injective")
        if self.domain.kind == "one":
            return BlockLinearMap(self.codomain, self.domain, np.linalg.inv(self.action))
        qmat, rmat = np.linalg.qr(self.action)
        basis = qmat.T @ self.codomain.basis_matrix()
        image = SpaceDescriptor(self.codomain.blocks, basis, "Osp", None, self.codomain.kind)
        return BlockLinearMap(image, self.domain, np.linalg.inv(rmat))

    def to_json(self) -> dict[str, Any]:
        from .linalg import matrix_to_json

        return {
            "domain": self.domain.to_json(),
            "codomain": self.codomain.to_json(),
            "action": matrix_to_json(self.action),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "BlockLinearMap":
        from .linalg import matrix_from_json

        try:
            return cls(
                SpaceDescriptor.from_json(obj["domain"]),
                SpaceDescriptor.from_json(obj["codomain"]),
                matrix_from_json(obj["action"]),
            )
        except KeyError as exc:
            raise ShapeError(f"malformed map JSON: missing {exc}") from exc


def pairing_matrix(inf_blocks: Sequence[tuple[int, int]]) -> np.ndarray:
    """G with ``⟨x, a⟩ = x @ G @ a`` for x in ⊕M_{q,s} and a in ⊕T_{s,q}.

    The pairing is ``Σ_i tr(x_i a_i) / s_i`` (normalized trace on s x s).
    """
    sizes = [q * s for q, s in inf_blocks]
    g = np.zeros((sum(sizes), sum(sizes)))
    o = 0
    for (q, s), size in zip(inf_blocks, sizes):
        for u in range(q):
            for v in range(s):
                g[o + u * s + v, o + v * q + u] = 1.0 / s
        o += size
    return g


def _inv_scaled_perm(g: np.ndarray) -> np.ndarray:
    out = np.zeros_like(g)
    nz = g != 0
    out[nz] = 1.0 / g[nz]
    return out.T


def dualize(f: BlockLinearMap) -> BlockLinearMap:
    """The adjoint map under the normalized trace pairing.

    ``⟨x, f*(a)⟩ = ⟨f(x), a⟩``; applying it twice returns ``f``.
    """
    x, y = f.domain, f.codomain
    if not (x.is_full and y.is_full):
        raise PreconditionError("dualize needs full block domains and codomains")
    if x.kind != y.kind:
        raise PreconditionError("domain and codomain must both be ∞-sums or both ℓ_1-sums")
    h = f.action
    if x.kind == "inf":
        gx, gy = pairing_matrix(x.blocks), pairing_matrix(y.blocks)
        act = _inv_scaled_perm(gx) @ h.T @ gy
    else:
        gx = pairing_matrix([(s, q) for q, s in x.blocks])
        gy = pairing_matrix([(s, q) for q, s in y.blocks])
        act = _inv_scaled_perm(gx).T @ h.T @ gy.T
    dom, cod = y.dual(), x.dual()
    dv = None
    if dom.kind == "one" and len(set(dom.blocks)) == 1 and len(set(cod.blocks)) == 1 and dom.blocks[0] == cod.blocks[0]:
        dv = dual_view_of(act, len(cod.blocks), len(dom.blocks))
    return BlockLinearMap(dom, cod, act, dv)


def reassemble_dual_view(dv: np.ndarray) -> np.ndarray:
    """(d, n, t, t) block matrix of maps to a (d t) x (n t) action."""
    d, n, t1, t2 = dv.shape
    return dv.transpose(0, 2, 1, 3).reshape(d * t1, n * t2)


def dual_view_of(action: np.ndarray, d: int, n: int) -> np.ndarray:
    a = np.asarray(action)
    t1, t2 = a.shape[0] // d, a.shape[1] // n
    return a.reshape(d, t1, n, t2).transpose(0, 2, 1, 3).copy()


def identity_map(space: SpaceDescriptor) -> BlockLinearMap:
    return BlockLinearMap(space, space, np.eye(space.dim, dtype=complex))


def map_from_function(
    domain: SpaceDescriptor, codomain: SpaceDescriptor, fn: Callable[[list[np.ndarray]], list[np.ndarray]]
) -> BlockLinearMap:
    """Tabulate a linear function given on ambient block tuples.

    ``fn`` receives the domain element as a list of block matrices and must
    return the image as a list of codomain block matrices.
    """
    cols = []
    for k in range(domain.dim):
        vec = domain.to_ambient(np.eye(domain.dim)[k])
        out = codomain.flatten(fn(domain.split(vec)))
        cols.append(codomain.from_ambient(out))
    return BlockLinearMap(domain, codomain, np.array(cols).T)


def amplify_space(space: SpaceDescriptor, m: int) -> SpaceDescriptor:
    """``M_m(X)`` as a subspace of ``⊕ M_{m q_i, m s_i}``, basis ordered (a, b, k)."""
    if m < 1:
        raise ShapeError("level must be positive")
    if space.kind != "inf":
        raise PreconditionError("amplification is only modelled for ∞-sums")
    big = SpaceDescriptor(tuple((m * q, m * s) for q, s in space.blocks))
    rows = []
    for a in range(m):
        for b in range(m):
            for k in range(space.dim):
                c = np.zeros((m, m, space.dim), dtype=complex)
                c[a, b, k] = 1
                x = element_from_coords(space, c)
                rows.append(big.flatten(list(x.data)))
    return SpaceDescriptor(big.blocks, np.array(rows), "Osp")


def amplify(f: BlockLinearMap, m: int) -> BlockLinearMap:
    """The amplification ``f^{(m)}`` acting entrywise on ``M_m(domain)``."""
    if m < 1:
        raise ShapeError("level must be positive")
    if m == 1:
        return f
    return BlockLinearMap(
        amplify_space(f.domain, m),
        amplify_space(f.codomain, m),
        np.kron(np.eye(m * m), f.action),
    )


def random_element(space: SpaceDescriptor, m: int, rng: np.random.Generator) -> SpaceElement:
    c = rng.normal(size=(m, m, space.dim)) + 1j * rng.normal(size=(m, m, space.dim))
    return element_from_coords(space, c)


# -- Ruan axiom --------------------------------------------------------


@dataclass
class RuanReport:
    trials: int
    violations: list[dict[str, Any]] = field(default_factory=list)
    max_excess: float = -np.inf

    @property
    def num_violations(self) -> int:
        return len(self.violations)


def compress(x: SpaceElement, alpha: np.ndarray, beta: np.ndarray) -> SpaceElement:
    """``α* x β`` for scalar matrices α (n x r) and β (n x r')."""
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    r, r2 = alpha.shape[1], beta.shape[1]
    if r != r2:
        raise ShapeError("α and β must produce a square level")
    data = []
    for d, (q, s) in zip(x.data, x.space.blocks):
        data.append(np.kron(alpha.conj().T, np.eye(q)) @ d @ np.kron(beta, np.eye(s)))
    return SpaceElement(x.space, r, tuple(data))


def ruan_check(
    space: SpaceDescriptor,
    trials: int = 500,
    seed: int = 0,
    norm: Optional[Callable[[SpaceElement], float]] = None,
    max_terms: int = 3,
    max_level: int = 3,
) -> RuanReport:
    """Sample instances of Ruan's combined axiom and report violations.

    Each trial draws ``ℓ ≤ max_terms`` elements ``x_i ∈ M_{n_i}(X)`` and scalar
    matrices ``α_i, β_i`` of shape ``n_i x r`` and checks
    ``‖Σ α_i* x_i β_i‖ ≤ ‖Σ α_i* α_i‖^½ max‖x_i‖ ‖Σ β_i* β_i‖^½ + 1e-8``.
    ``norm`` replaces :func:`level_norm`, which is how a fake norm table is
    injected.
    """
    if trials < 1:
        raise PreconditionError("trials must be at least 1")
    nrm = norm or level_norm
    rng = np.random.default_rng(seed)
    report = RuanReport(trials)
    for t in range(trials):
        ell = int(rng.integers(1, max_terms + 1))
        r = int(rng.integers(1, max_level + 1))
        xs, alphas, betas = [], [], []
        for _ in range(ell):
            n = int(rng.integers(1, max_level + 1))
            xs.append(random_element(space, n, rng))
            alphas.append(rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r)))
            betas.append(rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r)))
        excess = ruan_excess(xs, alphas, betas, nrm)
        report.max_excess = max(report.max_excess, excess)
        if excess > 1e-8:
            report.violations.append(
                {"trial": t, "excess": excess, "levels": [x.level for x in xs], "out_level": r}
            )
    return report


def ruan_excess(
    xs: Sequence[SpaceElement],
    alphas: Sequence[np.ndarray],
    betas: Sequence[np.ndarray],
    norm: Callable[[SpaceElement], float] = level_norm,
) -> float:
    """LHS minus RHS of Ruan's inequality for one sampled triple."""
    total = None
    for x, a, b in zip(xs, alphas, betas):
        term = compress(x, a, b)
        total = term if total is None else SpaceElement(
            x.space, term.level, tuple(u + v for u, v in zip(total.data, term.data))
        )
    assert total is not None
    aa = sum(np.asarray(a).conj().T @ np.asarray(a) for a in alphas)
    bb = sum(np.asarray(b).conj().T @ np.asarray(b) for b in betas)
    rhs = np.sqrt(op_norm(aa)) * max(norm(x) for x in xs) * np.sqrt(op_norm(bb))
    return float(norm(total) - rhs)


def delta_defect(f: BlockLinearMap, cb: Optional[Callable[[BlockLinearMap], Any]] = None) -> float:
    """How far an injective complete contraction is from a complete isometry.

    Returns ``max(0, ‖f⁻¹‖_cb - 1)`` with the inverse taken on the image, or
    ``inf`` when ``f`` is not injective or not completely contractive.
    """
    if cb is None:
        from .cbnorm import cb_norm_value as cb
    if f.domain.kind == "one" and f.domain.dim != f.codomain.dim:
        raise PreconditionError("delta_defect on ℓ_1-sums needs a bijective map")
    if not f.is_injective():
        return float("inf")
    fn = _as_value(cb(f))
    if fn > 1 + 1e-7:
        return float("inf")
    inv = f.inverse_on_image()
    return max(0.0, _as_value(cb(inv)) - 1.0)


def _as_value(v: Any) -> float:
    return float(getattr(v, "value", v))


def iter_basis_elements(space: SpaceDescriptor) -> Iterator[list[np.ndarray]]:
    for k in range(space.dim):
        yield space.split(space.to_ambient(np.eye(space.dim)[k]))
