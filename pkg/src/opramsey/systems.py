"""Operator systems: ucp maps, states, trace duality and TPCQ structure.

Dual-side maps act between ℓ_1-sums of trace-class blocks (descriptors with
``kind="one"``). A map ``η: ℓ_∞^d(M_q) -> ℓ_∞^n(M_q)`` is unital and CP
exactly when its dual ``η*: ℓ_1^n(T_q) -> ℓ_1^d(T_q)`` is CP and preserves
the plain trace ``Tr(a) = Σ_i tr(a_i)/q``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .cbnorm import cb_norm_value, choi_and_cp, choi_matrix, haagerup_bound, trace_class_cb
from .errors import CategoryError, PreconditionError
from .linalg import min_eig, op_norm
from .opspace import BlockLinearMap, SpaceDescriptor, dual_view_of, dualize

log = logging.getLogger(__name__)

__all__ = [
    "StateVector",
    "DensityState",
    "PointedSpace",
    "sigma_d",
    "is_ucp",
    "dualize",
    "trace_preservation_check",
    "structure_check",
    "perturb_ucp",
    "automorphism_factors",
]


@dataclass(frozen=True)
class StateVector:
    """A state on ℓ_∞^d: nonnegative weights renormalized to sum 1."""

    weights: tuple[float, ...]
    drift: float = 0.0

    @classmethod
    def of(cls, weights: Sequence[float]) -> "StateVector":
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise PreconditionError("weights must be a nonempty vector")
        if np.any(w < 0):
            raise PreconditionError("state weights must be nonnegative")
        total = float(w.sum())
        if total <= 0:
            raise PreconditionError("state weights must not all vanish")
        return cls(tuple(float(v) for v in w / total), abs(total - 1.0))

    @property
    def d(self) -> int:
        return len(self.weights)

    def trace(self, a: Sequence[np.ndarray]) -> complex:
        """``Tr_λ(a) = Σ λ_i tr(a_i)/q_i`` on ℓ_1^d(T_q)."""
        return complex(sum(l * np.trace(x) / x.shape[0] for l, x in zip(self.weights, a)))

    def as_map(self) -> BlockLinearMap:
        dom = SpaceDescriptor.ell_inf(self.d, category="Osy")
        return BlockLinearMap(dom, SpaceDescriptor.matrices(1, category="Osy"), np.array([self.weights]))


@dataclass(frozen=True)
class DensityState:
    """A state on M_q, ``s(x) = tr(ρ x)`` with ρ ⪰ 0 of trace one."""

    rho: np.ndarray
    drift: float = 0.0

    @classmethod
    def of(cls, rho: np.ndarray) -> "DensityState":
        r = np.array(rho, dtype=complex)
        r = (r + r.conj().T) / 2
        if min_eig(r) < -1e-12:
            raise PreconditionError("density matrix must be positive semidefinite")
        tr = float(np.real(np.trace(r)))
        if tr <= 0:
            raise PreconditionError("density matrix must have positive trace")
        return cls(r / tr, abs(tr - 1.0))

    @classmethod
    def maximally_mixed(cls, q: int) -> "DensityState":
        return cls(np.eye(q, dtype=complex) / q)

    def __call__(self, x: np.ndarray) -> complex:
        return complex(np.trace(self.rho @ x))


def trace_plain(a: Sequence[np.ndarray]) -> complex:
    """``Tr(a) = Σ_i tr(a_i)/q`` on ℓ_1^d(T_q)."""
    return complex(sum(np.trace(x) / x.shape[0] for x in a))


def sigma_d(d: int, q: int) -> BlockLinearMap:
    """The M_q-valued state ``(x_1, ..., x_d) ↦ x_d``."""
    dom = SpaceDescriptor.ell_inf(d, q, category="Osy")
    cod = SpaceDescriptor.matrices(q, category="Osy")
    a = np.zeros((q * q, d * q * q), dtype=complex)
    a[:, (d - 1) * q * q :] = np.eye(q * q)
    return BlockLinearMap(dom, cod, a)


@dataclass(frozen=True, eq=False)
class PointedSpace:
    """A space X with a distinguished map ``s_X: X -> R``."""

    space: SpaceDescriptor
    s_map: BlockLinearMap

    def __post_init__(self) -> None:
        if self.s_map.domain.dim != self.space.dim:
            raise PreconditionError("s_X must be defined on the space")
        if cb_norm_value(self.s_map) > 1 + 1e-8:
            raise PreconditionError("s_X must be completely contractive")
        if self.space.category == "Osy":
            if not unit_residual(self.s_map) <= 1e-9:
                raise PreconditionError("s_X must be unital on an operator system")

    @property
    def target(self) -> SpaceDescriptor:
        return self.s_map.codomain


def unit_residual(f: BlockLinearMap) -> float:
    """``‖f(1) - 1‖`` in ambient coordinates (needs units on both sides)."""
    dom, cod = f.domain, f.codomain
    if dom.unit is None or cod.unit is None:
        raise CategoryError("unitality needs operator systems with units")
    img = cod.to_ambient(f.action @ dom.from_ambient(dom.unit))
    return float(np.max(np.abs(img - cod.unit)))


def is_ucp(f: BlockLinearMap) -> bool:
    """Unital (within 1e-9) and completely positive (Choi PSD within 1e-9)."""
    if f.domain.category != "Osy" or f.codomain.category != "Osy":
        raise CategoryError("is_ucp needs operator-system domain and codomain")
    return unit_residual(f) <= 1e-9 and choi_and_cp(f).is_cp


# -- trace preservation -----------------------------------------------


@dataclass
class TraceCheck:
    ok: bool
    residual: float
    convention: str


def _dual_blocks(space: SpaceDescriptor, vec: np.ndarray) -> list[np.ndarray]:
    return space.split(vec)


def trace_preservation_check(
    phi: BlockLinearMap, convention: Literal["plain", "per_state"] = "plain", tol: float = 1e-9
) -> TraceCheck:
    """Check trace preservation of a dual-side map on a basis.

    ``plain`` asks ``Tr(φ(a)) = Tr(a)``. ``per_state`` is the literal
    reading ``Tr_λ(φ(a)) = Tr(a)`` for every state λ on the codomain, tested
    at the vertex states.
    """
    dom, cod = phi.domain, phi.codomain
    if any(s != q for s, q in dom.blocks + cod.blocks):
        raise CategoryError("trace preservation needs square blocks")
    resid = 0.0
    eye = np.eye(dom.dim)
    states = [None] if convention == "plain" else [
        StateVector.of(np.eye(len(cod.blocks))[i]) for i in range(len(cod.blocks))
    ]
    if convention not in ("plain", "per_state"):
        raise PreconditionError(f"unknown convention {convention!r}")
    for k in range(dom.dim):
        a = dom.split(eye[k])
        img = cod.split(phi.action[:, k])
        ta = trace_plain(a)
        for st in states:
            t_img = trace_plain(img) if st is None else st.trace(img)
            resid = max(resid, abs(t_img - ta))
    return TraceCheck(resid <= tol, resid, convention)


# -- TPCQ / CQ structure ------------------------------------------------


def automorphism_factors(entry: np.ndarray, s: int, q: int, tol: float = 1e-8) -> Optional[tuple[np.ndarray, np.ndarray, float]]:
    """Write a map on s x q matrices as ``a ↦ u a v`` with u, v unitary.

    The surjective complete isometries of ``T_{s,q}`` are exactly these maps.
    Returns ``(u, v, residual)`` or None when the entry is not of this form.
    """
    e = np.asarray(entry, dtype=complex)
    # a ↦ u a v has row-major matrix kron(u, v.T); rearrange to a rank-one matrix.
    r = e.reshape(s, q, s, q).transpose(0, 2, 1, 3).reshape(s * s, q * q)
    uu, sv, vh = np.linalg.svd(r)
    if sv[0] == 0 or (sv.size > 1 and sv[1] > tol * max(1.0, sv[0])):
        return None
    u = (uu[:, 0] * np.sqrt(sv[0])).reshape(s, s)
    vt = (vh[0] * np.sqrt(sv[0])).reshape(q, q)
    scale = np.sqrt(abs(np.linalg.det(u)) ** (2 / s)) if s else 1.0
    if scale == 0:
        return None
    u, vt = u / scale, vt * scale
    v = vt.T
    resid = max(
        float(np.max(np.abs(u @ u.conj().T - np.eye(s)))),
        float(np.max(np.abs(v @ v.conj().T - np.eye(q)))),
        float(np.max(np.abs(np.kron(u, v.T) - e))),
    )
    if resid > tol:
        return None
    return u, v, resid


@dataclass
class StructureReport:
    ok: bool
    violations: list[str] = field(default_factory=list)
    norm_residual: float = 0.0


_COLUMN_CB_CACHE: dict[bytes, float] = {}


def column_cb_norm(col: np.ndarray, s: int, q: int) -> float:
    """Cb norm of a column ``T_{s,q} -> ℓ_1^d(T_{s,q})`` given as (d, t, t)."""
    col = np.ascontiguousarray(col, dtype=complex)
    if s == q == 1:
        return float(np.abs(col).sum())
    key = col.tobytes() + bytes((s, q))
    if key not in _COLUMN_CB_CACHE:
        d, t, _ = col.shape
        f = BlockLinearMap(SpaceDescriptor.ell_one(1, s, q), SpaceDescriptor.ell_one(d, s, q), col.reshape(d * t, t))
        if len(_COLUMN_CB_CACHE) > 4096:
            _COLUMN_CB_CACHE.clear()
        _COLUMN_CB_CACHE[key] = trace_class_cb(f)
    return _COLUMN_CB_CACHE[key]


def column_is_tp_cp(dv: np.ndarray, j: int, q: int, tol: float = 1e-8) -> tuple[bool, float]:
    """Trace-preserving and CP test for the j-th column of a dual-side matrix."""
    d = dv.shape[0]
    resid = 0.0
    sq = SpaceDescriptor.matrices(q)
    total = np.zeros((q * q, q * q), dtype=complex)
    for i in range(d):
        ent = BlockLinearMap(sq, sq, dv[i, j])
        lo = min_eig(choi_matrix(ent))
        resid = max(resid, max(0.0, -lo))
        total += dv[i, j]
    # Σ_i tr(v_i(a)) = tr(a) for all a  <=>  vec(I)^T Σ_i V_i = vec(I)^T.
    vec_i = np.eye(q).ravel()
    resid = max(resid, float(np.max(np.abs(vec_i @ total - vec_i))))
    return resid <= tol, resid


def structure_check(
    matrix: BlockLinearMap, class_tag: Literal["CQ", "TPCQ"], tol: float = 1e-8
) -> StructureReport:
    """Check the block-matrix description of CQ / TPCQ maps on ℓ_1-sums.

    Every row needs an entry that is a surjective complete isometry (an
    automorphism ``a ↦ u a v``) whose column is otherwise zero; every column
    must be completely contractive (CQ) or trace-preserving CP (TPCQ); for
    TPCQ the last column must be ``(0, ..., 0, Id)`` exactly.
    """
    if class_tag not in ("CQ", "TPCQ"):
        raise PreconditionError(f"unknown class {class_tag!r}")
    dom, cod = matrix.domain, matrix.codomain
    if dom.kind != "one" or cod.kind != "one" or len(set(dom.blocks + cod.blocks)) != 1:
        raise PreconditionError("structure_check needs a map between ℓ_1^n(T) and ℓ_1^d(T)")
    s, q = dom.blocks[0]
    d, n = len(cod.blocks), len(dom.blocks)
    dv = matrix.dual_view if matrix.dual_view is not None else dual_view_of(matrix.action, d, n)
    violations: list[str] = []
    norm_resid = 0.0
    nonzero = np.array([[bool(np.any(dv[i, j] != 0)) for j in range(n)] for i in range(d)])
    for i in range(d):
        found = False
        for j in range(n):
            if not nonzero[i, j] or nonzero[:, j].sum() != 1:
                continue
            fac = automorphism_factors(dv[i, j], s, q, tol)
            if fac is None:
                continue
            if class_tag == "TPCQ" and not np.allclose(fac[0] @ fac[1], np.eye(s), atol=tol):
                continue
            found = True
            norm_resid = max(norm_resid, fac[2])
            break
        if not found:
            violations.append(f"row {i}: no automorphism entry with an otherwise-zero column")
    for j in range(n):
        if class_tag == "CQ":
            if not nonzero[:, j].any():
                continue
            bound = float(haagerup_bound(dv[:, j], s, q))
            nrm = bound if bound <= 1 + tol else column_cb_norm(dv[:, j], s, q)
            norm_resid = max(norm_resid, max(0.0, nrm - 1))
            if nrm > 1 + tol:
                violations.append(f"column {j}: cb norm {nrm:.12g} exceeds 1")
        else:
            ok, resid = column_is_tp_cp(dv, j, q, tol)
            norm_resid = max(norm_resid, resid)
            if not ok:
                violations.append(f"column {j}: not trace-preserving CP (residual {resid:.3g})")
    if class_tag == "TPCQ":
        last = dv[:, n - 1]
        pinned = all(not np.any(last[i]) for i in range(d - 1)) and np.array_equal(
            last[d - 1], np.eye(s * q)
        )
        if not pinned:
            violations.append("last column is not (0, ..., 0, Id)")
    return StructureReport(not violations, violations, norm_resid)


# -- perturbation of near-unital tuples -----------------------------------


@dataclass
class PerturbResult:
    psi_d: BlockLinearMap
    unitality_residual: float
    distance: float
    one_minus_y_psd: bool
    is_cp: bool
    warning: Optional[str] = None


def perturb_ucp(
    psi_list: Sequence[BlockLinearMap],
    phi_d: BlockLinearMap,
    state: DensityState,
    eps: float,
) -> PerturbResult:
    """Correct the last map of a near-unital CP tuple to make the sum unital.

    ``ψ_d(x) = φ_d(x) + s(x)(1 - y)`` with ``y = Σ ψ_i(1) + φ_d(1)``. The sum
    becomes exactly unital and ``‖ψ_d - φ_d‖_cb = ‖1 - y‖ < eps``. Complete
    positivity of ψ_d is certified only when ``1 - y ⪰ 0``; otherwise the
    result carries a warning.
    """
    sp = phi_d.domain
    if len(sp.blocks) != 1 or sp.blocks[0][0] != sp.blocks[0][1]:
        raise CategoryError("perturb_ucp works with maps M_q -> M_q")
    q = sp.blocks[0][0]
    one = np.eye(q, dtype=complex).ravel()

    def img_one(f: BlockLinearMap) -> np.ndarray:
        return (f.action @ one).reshape(q, q)

    y = sum((img_one(p) for p in psi_list), np.zeros((q, q), dtype=complex)) + img_one(phi_d)
    gap = np.eye(q) - y
    dist = op_norm(gap)
    if not dist < eps:
        raise PreconditionError(f"‖y - 1‖ = {dist:.3g} is not below eps = {eps}")
    # s(x) = tr(ρ x) = Σ_kl ρ_lk x_kl, as a row vector on row-major x.
    s_row = state.rho.T.ravel()
    action = phi_d.action + np.outer(gap.ravel(), s_row)
    psi_d = BlockLinearMap(sp, phi_d.codomain, action)
    total = sum((img_one(p) for p in psi_list), np.zeros((q, q), dtype=complex)) + img_one(psi_d)
    unit_res = float(np.max(np.abs(total - np.eye(q))))
    psd = min_eig(gap) >= -1e-12
    cp = choi_and_cp(psi_d).is_cp
    warning = None
    if not psd:
        warning = "1 - y is not positive semidefinite; complete positivity is not certified"
    return PerturbResult(psi_d, unit_res, float(dist), bool(psd), bool(cp), warning)
