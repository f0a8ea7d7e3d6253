"""Stable amalgamation witnesses, distance estimates and the ARP harness.

Everything here works with full ∞-sums of matrix blocks, the injective
spaces of the library. Amalgams live in ``V = Y ⊕_∞ Z``: ``i(y) = (y, Ψ(y))``
and ``j(z) = (Φ(z), z)`` are complete isometries because one coordinate is
the identity and the other is a complete contraction.

For operator spaces Ψ and Φ come from extending ``ψ∘φ⁻¹`` and ``φ∘ψ⁻¹``.
For operator systems they must be ucp, so each is the ucp map closest to
``ψ∘φ⁻¹`` on ``φ(X)`` in cb norm, found by one SDP per codomain block.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .cbnorm import _corner, _entry_coeffs, _im, _re, cb_norm_value, choi_apply, extend_cc
from .errors import (
    BudgetError,
    CategoryError,
    ConsistencyError,
    NetConstructionError,
    PreconditionError,
    ShapeError,
)
from .nets import build_nets, haagerup_bound, random_class_map
from .opspace import (
    BlockLinearMap,
    SpaceDescriptor,
    delta_defect,
    dualize,
    identity_map,
    reassemble_dual_view,
    stability_modulus,
)
from .ramsey import ColoringSpec
from .sdp import SdpProblem, solve_sdp
from .systems import PointedSpace, unit_residual

log = logging.getLogger(__name__)

SDP_TOL = 1e-9
ISOMETRY_TOL = 1e-6

__all__ = [
    "ClassConfig",
    "AmalgamationWitness",
    "PointedWitness",
    "amalgamate",
    "amalgamate_pointed",
    "canonical_embedding",
    "perturbed_embedding",
    "AmalgamationInstance",
    "random_amalgamation_instance",
    "instance_from_spaces",
    "random_cc_map",
    "random_ucp_map",
    "MultiAmalgam",
    "multi_amalgamate",
    "DistanceEstimate",
    "distance_estimate",
    "EmbNet",
    "emb_net",
    "OscillationReport",
    "oscillation",
    "ArpResult",
    "arp_search",
]


@dataclass(frozen=True)
class ClassConfig:
    """Class of the amalgamation problem and its modulus ϖ."""

    category: str = "Osp"
    pointed: bool = False
    eps: float = 1e-6

    def modulus(self, delta: float) -> float:
        return stability_modulus(self.category, delta, self.pointed)

    def bound(self, delta: float) -> float:
        return self.modulus(delta) + self.eps


def _cb(f: BlockLinearMap) -> float:
    return cb_norm_value(f, SDP_TOL)


def _diff(a: BlockLinearMap, b: BlockLinearMap) -> BlockLinearMap:
    return BlockLinearMap(a.domain, a.codomain, a.action - b.action)


def _require_injective_class(*spaces: SpaceDescriptor) -> str:
    cats = {sp.category for sp in spaces}
    if len(cats) != 1:
        raise CategoryError("all spaces must lie in one class")
    for sp in spaces:
        if sp.kind != "inf" or not sp.is_full:
            raise PreconditionError("amalgamation needs full ∞-sums of matrix blocks (injective spaces)")
    return cats.pop()


def _direct_sum(*spaces: SpaceDescriptor) -> SpaceDescriptor:
    blocks: list[tuple[int, int]] = []
    for sp in spaces:
        blocks.extend(sp.blocks)
    return SpaceDescriptor(tuple(blocks), None, spaces[0].category)


def _stack(domain: SpaceDescriptor, codomain: SpaceDescriptor, parts: Sequence[np.ndarray]) -> BlockLinearMap:
    return BlockLinearMap(domain, codomain, np.vstack(parts))


# -- random and canonical embeddings -------------------------------------


def random_cc_map(
    domain: SpaceDescriptor, codomain: SpaceDescriptor, rng: np.random.Generator
) -> BlockLinearMap:
    """A random complete contraction with cb norm exactly 1."""
    shape = (codomain.dim, domain.dim)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    f = BlockLinearMap(domain, codomain, a)
    return f.scaled(1.0 / _cb(f))


def random_ucp_map(
    domain: SpaceDescriptor, codomain: SpaceDescriptor, rng: np.random.Generator
) -> BlockLinearMap:
    """A random ucp map ``Σ_r V_r* x V_r`` between square-block algebras."""
    if any(q != s for q, s in domain.blocks) or any(q != s for q, s in codomain.blocks):
        raise CategoryError("ucp maps need square blocks")
    n = domain.row_dims[0]
    outs = []
    for p, _ in codomain.blocks:
        reps = p // n + 2
        g = rng.standard_normal((reps * n, p)) + 1j * rng.standard_normal((reps * n, p))
        iso, _ = np.linalg.qr(g)
        outs.append(iso.reshape(reps, n, p))

    def fn(blocks: list[np.ndarray]) -> list[np.ndarray]:
        from .linalg import block_diag

        x = block_diag(*blocks)
        return [sum(v.conj().T @ x @ v for v in kr) for kr in outs]

    return _tabulate(domain, codomain, fn)


def _tabulate(domain: SpaceDescriptor, codomain: SpaceDescriptor, fn: Callable) -> BlockLinearMap:
    cols = []
    for k in range(domain.dim):
        cols.append(codomain.flatten(fn(domain.split(np.eye(domain.dim)[k]))))
    return BlockLinearMap(domain, codomain, np.array(cols).T)


def _random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    from scipy.stats import unitary_group

    if n == 1:
        return np.exp(2j * np.pi * rng.random()) * np.eye(1)
    return unitary_group.rvs(n, random_state=rng)


def canonical_embedding(
    X: SpaceDescriptor, Y: SpaceDescriptor, rng: Optional[np.random.Generator] = None
) -> Optional[BlockLinearMap]:
    """A complete isometry X -> Y placing each X block into a free Y block.

    Blocks are matched first-fit. Operator spaces use the upper-left corner
    of a large enough block; operator systems need a block of equal size and
    fill unmatched blocks with the unital map ``x ↦ x_{00} 1``. With ``rng``
    every matched block is twisted by random unitaries. Returns None when
    no matching exists.
    """
    cat = _require_injective_class(X, Y)
    used: list[Optional[int]] = [None] * len(Y.blocks)
    host = []
    for i, (q, s) in enumerate(X.blocks):
        for k, (qy, sy) in enumerate(Y.blocks):
            if used[k] is not None:
                continue
            fits = (qy, sy) == (q, s) if cat == "Osy" else (qy >= q and sy >= s)
            if fits:
                used[k] = i
                host.append(k)
                break
        else:
            return None
    twist = []
    for i, k in enumerate(host):
        qy, sy = Y.blocks[k]
        u = np.eye(qy, dtype=complex) if rng is None else _random_unitary(qy, rng)
        if cat == "Osy":
            v = u.conj().T
        else:
            v = np.eye(sy, dtype=complex) if rng is None else _random_unitary(sy, rng)
        twist.append((u, v))

    def fn(blocks: list[np.ndarray]) -> list[np.ndarray]:
        out = []
        for k, (qy, sy) in enumerate(Y.blocks):
            i = used[k]
            if i is None:
                if cat == "Osy":
                    out.append(blocks[0][0, 0] * np.eye(qy))
                else:
                    out.append(np.zeros((qy, sy)))
                continue
            q, s = X.blocks[i]
            pad = np.zeros((qy, sy), dtype=complex)
            pad[:q, :s] = blocks[i]
            u, v = twist[i]
            out.append(u @ pad @ v)
        return out

    return _tabulate(X, Y, fn)


def _left_inverse(phi0: BlockLinearMap) -> BlockLinearMap:
    """Compression ``P`` with ``P∘φ0 = id`` for a canonical embedding.

    P reads each X block back out of its host block, so it is a complete
    contraction (ucp for systems).
    """
    X, Y = phi0.domain, phi0.codomain
    a = phi0.action
    rows = []
    for i, (q, s) in enumerate(X.blocks):
        o = X.offsets[i]
        # The host block is the one whose rows carry block i isometrically.
        for k, (qy, sy) in enumerate(Y.blocks):
            oy = Y.offsets[k]
            sub = a[oy : oy + qy * sy, o : o + q * s]
            if np.allclose(a[oy : oy + qy * sy, :o], 0) and np.allclose(a[oy : oy + qy * sy, o + q * s :], 0):
                sv = np.linalg.svd(sub, compute_uv=False)
                if sv.size and np.allclose(sv[: q * s], 1.0, atol=1e-9):
                    rows.append((i, k))
                    break
        else:
            raise PreconditionError("no host block found for a block of the domain")
    out = np.zeros((X.dim, Y.dim), dtype=complex)
    for i, k in rows:
        o, oy = X.offsets[i], Y.offsets[k]
        q, s = X.blocks[i]
        qy, sy = Y.blocks[k]
        out[o : o + q * s, oy : oy + qy * sy] = np.linalg.pinv(a[oy : oy + qy * sy, o : o + q * s])
    return BlockLinearMap(Y, X, out)


def perturbed_embedding(
    X: SpaceDescriptor,
    Y: SpaceDescriptor,
    delta: float,
    rng: np.random.Generator,
    twist: bool = True,
) -> tuple[BlockLinearMap, BlockLinearMap]:
    """A δ-embedding ``φ = (1 - t) φ0 + t ρ`` and its exact part ``φ0``.

    With ``t = δ / (2 (1 + δ))`` the map is a complete contraction (ucp for
    systems) and ``‖φ⁻¹‖_cb ≤ 1 / (1 - 2t) = 1 + δ``.
    """
    if delta < 0:
        raise PreconditionError("delta must be nonnegative")
    phi0 = canonical_embedding(X, Y, rng if twist else None)
    if phi0 is None:
        raise PreconditionError("the domain does not embed into the codomain blockwise")
    if delta == 0:
        return phi0, phi0
    rho = random_ucp_map(X, Y, rng) if X.category == "Osy" else random_cc_map(X, Y, rng)
    t = delta / (2 * (1 + delta))
    return BlockLinearMap(X, Y, (1 - t) * phi0.action + t * rho.action), phi0


@dataclass
class AmalgamationInstance:
    """φ: X -> Y and ψ: X -> Z, δ-embeddings by construction."""

    phi: BlockLinearMap
    psi: BlockLinearMap
    delta: float
    pointed: Optional[tuple[PointedSpace, PointedSpace, PointedSpace]] = None


_OSP_SHAPES = ((1, 1), (1, 2), (2, 1), (2, 2))


def _random_blocks(category: str, rng: np.random.Generator, max_dim: int) -> list[tuple[int, int]]:
    shapes = _OSP_SHAPES if category == "Osp" else ((1, 1), (2, 2))
    blocks = [shapes[int(rng.integers(len(shapes)))]]
    while rng.random() < 0.4:
        b = shapes[int(rng.integers(len(shapes)))]
        if sum(q * s for q, s in blocks) + b[0] * b[1] > max_dim:
            break
        blocks.append(b)
    return blocks


def _random_superspace(X: SpaceDescriptor, rng: np.random.Generator, max_dim: int) -> SpaceDescriptor:
    blocks = list(X.blocks)
    shapes = _OSP_SHAPES if X.category == "Osp" else ((1, 1), (2, 2))
    for b in rng.permutation(len(shapes)):
        q, s = shapes[int(b)]
        if X.dim + q * s <= max_dim and rng.random() < 0.6:
            blocks.append((q, s))
            break
    return SpaceDescriptor(tuple(blocks), None, X.category)


def random_amalgamation_instance(
    category: str,
    delta: float,
    rng: np.random.Generator,
    pointed: bool = False,
    max_dim: int = 8,
) -> AmalgamationInstance:
    """A random pair of δ-embeddings out of a common space, all dims ≤ max_dim.

    For pointed instances ``R`` is the scalars, ``s_X`` a random complete
    contraction (a state for systems) and ``s_Y = s_X∘P`` with P the
    compression inverting the exact part of φ, so ``‖s_Y∘φ - s_X‖ ≤ δ``.
    """
    X = SpaceDescriptor(tuple(_random_blocks(category, rng, max_dim // 2)), None, category)
    Y = _random_superspace(X, rng, max_dim)
    Z = _random_superspace(X, rng, max_dim)
    return instance_from_spaces(X, Y, Z, delta, rng, pointed)


def instance_from_spaces(
    X: SpaceDescriptor,
    Y: SpaceDescriptor,
    Z: SpaceDescriptor,
    delta: float,
    rng: np.random.Generator,
    pointed: bool = False,
) -> AmalgamationInstance:
    """Random δ-embeddings ``X -> Y`` and ``X -> Z`` for given spaces."""
    category = _require_injective_class(X, Y, Z)
    phi, phi0 = perturbed_embedding(X, Y, delta, rng)
    psi, psi0 = perturbed_embedding(X, Z, delta, rng)
    pts = None
    if pointed:
        R = SpaceDescriptor.matrices(1, category=category)
        s_x = random_ucp_map(X, R, rng) if category == "Osy" else random_cc_map(X, R, rng)
        s_y = s_x.compose(_left_inverse(phi0))
        s_z = s_x.compose(_left_inverse(psi0))
        pts = (PointedSpace(X, s_x), PointedSpace(Y, s_y), PointedSpace(Z, s_z))
    return AmalgamationInstance(phi, psi, delta, pts)


# -- ucp fitting for operator systems ------------------------------------


def _ucp_fit_block(
    phi: BlockLinearMap, target: np.ndarray, p: int
) -> tuple[list[np.ndarray], float]:
    """Choi blocks of a ucp ``Ψ_j: Y -> M_p`` minimizing ``‖Ψ_j∘φ - target‖_cb``.

    ``target[:, k]`` is the image of the k-th X basis vector, flattened.
    The Paulsen matrix Θ of the difference shares the SDP with the Choi
    blocks C_i of Ψ_j, one per Y block.
    """
    X, Y = phi.domain, phi.codomain
    qd, sd = X.row_dims
    n = qd + sd
    mp = 2 * p
    ydims = [q * p for q, _ in Y.blocks]
    dims = [n * mp] + ydims
    nb = len(dims)
    zero = [np.zeros((d, d), dtype=complex) for d in dims]

    ph = np.diag(np.r_[np.ones(qd), np.zeros(sd)]).astype(complex)
    pk = np.diag(np.r_[np.zeros(qd), np.ones(sd)]).astype(complex)
    gh = _entry_coeffs(ph, mp)
    gk = _entry_coeffs(pk, mp)
    t_coeff = _re(gh[0, 0])
    cons: list[tuple[list[np.ndarray], float]] = []

    def only_theta(c: np.ndarray, rhs: float) -> None:
        mats = list(zero)
        mats[0] = c
        cons.append((mats, rhs))

    for g, diag_set in ((gh, range(p)), (gk, range(p, mp))):
        for k in range(mp):
            for l in range(k, mp):
                if k == l:
                    if g is gh and k == 0:
                        continue
                    c = _re(g[k, k])
                    if k in diag_set:
                        c = c - t_coeff
                    only_theta(c, 0.0)
                else:
                    only_theta(_re(g[k, l]), 0.0)
                    only_theta(_im(g[k, l]), 0.0)

    images = phi.action  # Y coordinates of φ(e_k)
    for k in range(X.dim):
        vec = np.eye(X.dim)[k]
        g = _entry_coeffs(_corner(X, vec), mp)
        img_blocks = Y.split(images[:, k])
        gy = [_entry_coeffs(b, p) for b in img_blocks]
        tgt = target[:, k].reshape(p, p)
        for a in range(mp):
            for b in range(mp):
                corner = a < p <= b
                for part, rhs_val in ((_re, tgt[a, b - p].real if corner else 0.0), (_im, tgt[a, b - p].imag if corner else 0.0)):
                    mats = list(zero)
                    mats[0] = part(g[a, b])
                    if corner:
                        for i in range(len(Y.blocks)):
                            mats[1 + i] = -part(gy[i][a, b - p])
                        cons.append((mats, -rhs_val))
                    else:
                        cons.append((mats, 0.0))

    gi = [_entry_coeffs(np.eye(q, dtype=complex), p) for q, _ in Y.blocks]
    for a in range(p):
        for b in range(a, p):
            parts = ((_re, 1.0 if a == b else 0.0),) if a == b else ((_re, 0.0), (_im, 0.0))
            for part, rhs_val in parts:
                mats = list(zero)
                for i in range(len(Y.blocks)):
                    mats[1 + i] = part(gi[i][a, b])
                cons.append((mats, rhs_val))

    objective = [t_coeff] + zero[1:]
    problem = SdpProblem.from_constraints(dims, objective, cons)
    sol = solve_sdp(problem, sdp_tol=SDP_TOL)
    if sol.status != "optimal" and not (sol.status == "max_iter" and sol.gap < 1e-6):
        raise ConsistencyError(f"ucp fitting SDP ended with status {sol.status}")
    chois = [np.asarray(c) for c in sol.primal_blocks[1:nb]]
    return chois, max(0.0, sol.primal_value)


def _psd_part(c: np.ndarray) -> np.ndarray:
    c = (c + c.conj().T) / 2
    w, v = np.linalg.eigh(c)
    return (v * np.clip(w, 0, None)) @ v.conj().T


def ucp_fit(phi: BlockLinearMap, psi: BlockLinearMap) -> BlockLinearMap:
    """A ucp ``Ψ: Y -> Z`` approximately minimizing ``‖Ψ∘φ - ψ‖_cb``.

    The SDP optimum is made exactly ucp by dropping negative Choi
    eigenvalues and renormalizing with ``Ψ(1)^{-1/2}`` on both sides.
    """
    Y, Z = phi.codomain, psi.codomain
    blocks_out = []
    for j, (p, _) in enumerate(Z.blocks):
        comp = psi.codomain_component(j)
        chois, _ = _ucp_fit_block(phi, comp, p)
        chois = [_psd_part(c) for c in chois]
        unit = sum(choi_apply(c, np.eye(q), p) for c, (q, _) in zip(chois, Y.blocks))
        w, v = np.linalg.eigh((unit + unit.conj().T) / 2)
        if w.min() <= 1e-12:
            raise ConsistencyError("ucp fit is degenerate on the unit")
        r = (v / np.sqrt(w)) @ v.conj().T
        block = np.zeros((p * p, Y.dim), dtype=complex)
        for i, (q, _) in enumerate(Y.blocks):
            o = Y.offsets[i]
            for a in range(q):
                for b in range(q):
                    e = np.zeros((q, q))
                    e[a, b] = 1
                    block[:, o + a * q + b] = (r @ choi_apply(chois[i], e, p) @ r).ravel()
        blocks_out.append(block)
    return BlockLinearMap(Y, Z, np.vstack(blocks_out))


# -- amalgamation --------------------------------------------------------


@dataclass
class AmalgamationWitness:
    V: SpaceDescriptor
    i: BlockLinearMap
    j: BlockLinearMap
    defect: float
    modulus_bound: float
    delta: float
    category: str
    isometry_defects: tuple[float, float] = (0.0, 0.0)
    cross: tuple[Optional[BlockLinearMap], Optional[BlockLinearMap]] = (None, None)

    @property
    def ok(self) -> bool:
        return (
            max(self.isometry_defects) <= ISOMETRY_TOL
            and self.defect <= self.modulus_bound + 1e-6
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "V": self.V.to_json(),
            "i": self.i.to_json(),
            "j": self.j.to_json(),
            "defect": self.defect,
            "modulus_bound": self.modulus_bound,
            "delta": self.delta,
            "category": self.category,
            "isometry_defects": list(self.isometry_defects),
            "ok": self.ok,
        }


def _cross_map(phi: BlockLinearMap, psi: BlockLinearMap, category: str) -> BlockLinearMap:
    """Ψ: Y -> Z with ``Ψ∘φ ≈ ψ``: an extension (Osp) or a ucp fit (Osy)."""
    if category == "Osy":
        return ucp_fit(phi, psi)
    Y = phi.codomain
    sub = SpaceDescriptor(Y.blocks, phi.action.T.copy(), "Osp")
    g = BlockLinearMap(sub, psi.codomain, psi.action)
    norm = _cb(g)
    if norm > 1:
        g = g.scaled(1.0 / (norm * (1 + 1e-9)))
    if sub.dim == Y.dim:
        # φ is onto: the "extension" is g itself, moved to Y coordinates.
        return BlockLinearMap(Y, psi.codomain, g.action @ np.linalg.inv(phi.action))
    return extend_cc(g, budget_tol=1e-6)


def _embedding_delta(f: BlockLinearMap) -> float:
    return delta_defect(f, _cb)


def coordinate_isometry_defect(f: BlockLinearMap, offset: int) -> float:
    """δ-defect of a map whose rows ``offset : offset + dim`` are the identity.

    The inverse on the image is the restriction of a coordinate projection,
    a complete contraction, and the identity rows have cb norm 1, so the
    defect is ``max(0, ‖rest‖_cb - 1)`` where ``rest`` collects the other
    codomain blocks. A ucp ``rest`` has cb norm 1 and needs no SDP. The
    defect is infinite when the identity rows are not there.
    """
    n = f.domain.dim
    block = f.action[offset : offset + n]
    if block.shape != (n, n) or not np.allclose(block, np.eye(n), atol=1e-12, rtol=0):
        return math.inf
    cod = f.codomain
    keep = [k for k, o in enumerate(cod.offsets) if not offset <= o < offset + n]
    if not keep:
        return 0.0
    rows = np.concatenate(
        [np.arange(cod.offsets[k], cod.offsets[k] + cod.blocks[k][0] * cod.blocks[k][1]) for k in keep]
    )
    sub = SpaceDescriptor(tuple(cod.blocks[k] for k in keep), None, cod.category)
    rest = BlockLinearMap(f.domain, sub, f.action[rows])
    if sub.category == "Osy" and f.domain.category == "Osy":
        from .cbnorm import choi_and_cp

        if unit_residual(rest) <= 1e-9 and choi_and_cp(rest).min_eig >= -1e-10:
            return 0.0
    return max(0.0, _cb(rest) - 1.0)


def amalgamate(
    phi: BlockLinearMap,
    psi: BlockLinearMap,
    cfg: Optional[ClassConfig] = None,
    delta: Optional[float] = None,
) -> AmalgamationWitness:
    """Amalgamate two δ-embeddings of X into ``V = Y ⊕_∞ Z``.

    ``delta`` defaults to the measured ``max(δ(φ), δ(ψ))``.
    """
    if phi.domain.dim != psi.domain.dim or not phi.domain.same_as(psi.domain):
        raise ShapeError("phi and psi must share their domain")
    X, Y, Z = phi.domain, phi.codomain, psi.codomain
    category = _require_injective_class(X, Y, Z)
    cfg = cfg or ClassConfig(category)
    if cfg.category != category:
        raise CategoryError(f"class config is {cfg.category} but the spaces are {category}")
    if category == "Osy" and max(unit_residual(phi), unit_residual(psi)) > 1e-9:
        raise CategoryError("operator-system embeddings must be unital")
    if delta is None:
        delta = max(_embedding_delta(phi), _embedding_delta(psi))
    if not math.isfinite(delta):
        raise PreconditionError("phi and psi must be injective complete contractions")
    big = _direct_sum(Y, Z)
    Psi = _cross_map(phi, psi, category)
    Phi = _cross_map(psi, phi, category)
    i = _stack(Y, big, [np.eye(Y.dim), Psi.action])
    j = _stack(Z, big, [Phi.action, np.eye(Z.dim)])
    defect = _cb(_diff(i.compose(phi), j.compose(psi)))
    iso = (coordinate_isometry_defect(i, 0), coordinate_isometry_defect(j, Y.dim))
    return AmalgamationWitness(big, i, j, defect, cfg.bound(delta), float(delta), category, iso, (Psi, Phi))


@dataclass
class PointedWitness:
    base: AmalgamationWitness
    W: SpaceDescriptor
    I: BlockLinearMap
    J: BlockLinearMap
    s_W: BlockLinearMap
    defect: float
    modulus_bound: float
    delta: float
    residuals: tuple[float, float]
    isometry_defects: tuple[float, float]

    @property
    def ok(self) -> bool:
        return (
            max(self.isometry_defects) <= ISOMETRY_TOL
            and max(self.residuals) <= 1e-8
            and self.defect <= self.modulus_bound + 1e-6
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "W": self.W.to_json(),
            "I": self.I.to_json(),
            "J": self.J.to_json(),
            "s_W": self.s_W.to_json(),
            "defect": self.defect,
            "modulus_bound": self.modulus_bound,
            "delta": self.delta,
            "residuals": list(self.residuals),
            "isometry_defects": list(self.isometry_defects),
            "ok": self.ok,
        }


def _into_domain(f: BlockLinearMap, theta: BlockLinearMap) -> BlockLinearMap:
    """``θ∘f`` where f lands in R and θ is defined on a subspace of R."""
    fa = f.with_ambient_codomain()
    sub = theta.domain
    img = fa.action
    if not all(sub.contains(img[:, k], tol=1e-9) for k in range(img.shape[1])):
        raise PreconditionError("theta is not defined on the image of the distinguished map")
    coords = np.array([sub.from_ambient(img[:, k]) for k in range(img.shape[1])]).T
    return BlockLinearMap(f.domain, theta.codomain, theta.action @ coords.reshape(sub.dim, -1))


def pointed_delta(Xp: PointedSpace, Yp: PointedSpace, phi: BlockLinearMap) -> float:
    """``max(δ(φ), ‖s_Y∘φ - s_X‖_cb)``."""
    return max(_embedding_delta(phi), _cb(_diff(Yp.s_map.compose(phi), Xp.s_map)))


def amalgamate_pointed(
    Xp: PointedSpace,
    Yp: PointedSpace,
    Zp: PointedSpace,
    phi: BlockLinearMap,
    psi: BlockLinearMap,
    R0: Optional[SpaceDescriptor] = None,
    theta: Optional[BlockLinearMap] = None,
    cfg: Optional[ClassConfig] = None,
) -> PointedWitness:
    """Pointed amalgam ``W = V ⊕_∞ R0`` with ``s_W`` the projection onto R0.

    θ defaults to the identity of the common target R.
    """
    R = Xp.target
    if not (Yp.target.same_as(R) and Zp.target.same_as(R)):
        raise PreconditionError("pointed spaces must point toward a common R")
    category = _require_injective_class(Xp.space, Yp.space, Zp.space)
    cfg = cfg or ClassConfig(category, pointed=True)
    delta = max(pointed_delta(Xp, Yp, phi), pointed_delta(Xp, Zp, psi))
    base = amalgamate(phi, psi, ClassConfig(category, False, cfg.eps), delta=delta)
    if theta is None:
        theta = identity_map(R if R0 is None else R0)
    R0 = theta.codomain
    if not R0.is_full or R0.kind != "inf":
        raise PreconditionError("R0 must be a full ∞-sum in the class")
    if category == "Osy" and R0.category != "Osy":
        raise CategoryError("R0 must be an operator system")
    if _embedding_delta(theta) > ISOMETRY_TOL:
        raise PreconditionError("theta must be a complete isometry")
    ty = _into_domain(Yp.s_map, theta)
    tz = _into_domain(Zp.s_map, theta)
    W = _direct_sum(base.V, R0)
    I = _stack(Yp.space, W, [base.i.action, ty.action])
    J = _stack(Zp.space, W, [base.j.action, tz.action])
    proj = np.hstack([np.zeros((R0.dim, base.V.dim)), np.eye(R0.dim)])
    s_W = BlockLinearMap(W, R0, proj)
    res = (
        float(np.max(np.abs(s_W.compose(I).action - ty.action), initial=0.0)),
        float(np.max(np.abs(s_W.compose(J).action - tz.action), initial=0.0)),
    )
    defect = _cb(_diff(I.compose(phi), J.compose(psi)))
    iso = (coordinate_isometry_defect(I, 0), coordinate_isometry_defect(J, Yp.space.dim))
    return PointedWitness(base, W, I, J, s_W, defect, cfg.bound(delta), delta, res, iso)


# -- multi-amalgamation --------------------------------------------------


@dataclass
class MultiAmalgam:
    V: SpaceDescriptor
    embeddings: list[BlockLinearMap]
    isometry_defects: list[float]
    samples: int = 0
    worst_excess: float = 0.0
    covered: bool = True
    complete: bool = True

    def to_json(self) -> dict[str, Any]:
        return {
            "V": self.V.to_json(),
            "embeddings": [e.to_json() for e in self.embeddings],
            "isometry_defects": list(self.isometry_defects),
            "samples": self.samples,
            "worst_excess": self.worst_excess,
            "covered": self.covered,
            "complete": self.complete,
        }


def _common_part(A: SpaceDescriptor, B: SpaceDescriptor) -> Optional[SpaceDescriptor]:
    """The largest sub-multiset of blocks shared by A and B, as a space."""
    pool = list(B.blocks)
    common = []
    for b in A.blocks:
        if b in pool:
            pool.remove(b)
            common.append(b)
    if not common:
        return None
    return SpaceDescriptor(tuple(common), None, A.category)


def multi_amalgamate(
    spaces: Sequence[SpaceDescriptor],
    delta: float = 0.0,
    eps: float = 0.05,
    cfg: Optional[ClassConfig] = None,
    samples: int = 0,
    seed: int = 0,
    budget: int = 1000,
) -> MultiAmalgam:
    """Amalgamate a family along the chain F[0], F[1], ... .

    Each step amalgamates the current V with the next space over their
    largest common block part, using canonical embeddings. The covering
    property is then spot-checked: for sampled δ-embeddings ``γ: X -> Y`` and
    ``η: X -> Z`` near canonical ones, ``J = I_Z`` must give
    ``‖I_Y∘γ - J∘η‖_cb ≤ ϖ(δ) + ε``.
    """
    if not spaces:
        raise PreconditionError("need at least one space")
    if len(spaces) > 5:
        raise PreconditionError("multi-amalgamation supports at most 5 spaces")
    category = _require_injective_class(*spaces)
    cfg = cfg or ClassConfig(category, eps=eps)
    V = spaces[0]
    embs = [identity_map(V)]
    for X in spaces[1:]:
        C = _common_part(V, X)
        if C is None:
            big = _direct_sum(V, X)
            i = _stack(V, big, [np.eye(V.dim), np.zeros((X.dim, V.dim))])
            j = _stack(X, big, [np.zeros((V.dim, X.dim)), np.eye(X.dim)])
            if category == "Osy":
                raise CategoryError("operator systems need a common block to amalgamate over")
        else:
            phi = canonical_embedding(C, V)
            psi = canonical_embedding(C, X)
            w = amalgamate(phi, psi, ClassConfig(category, eps=cfg.eps), delta=0.0)
            big, i, j = w.V, w.i, w.j
        embs = [i.compose(e) for e in embs] + [j]
        V = big
    iso = []
    for e in embs:
        iso.append(_embedding_delta(e))
    out = MultiAmalgam(V, embs, iso)
    if samples <= 0:
        return out
    rng = np.random.default_rng(seed)
    triples = []
    for a, b, c in itertools.product(range(len(spaces)), repeat=3):
        g0 = canonical_embedding(spaces[a], spaces[b])
        h0 = canonical_embedding(spaces[a], spaces[c])
        if g0 is not None and h0 is not None:
            triples.append((a, b, c, g0, h0))
    worst = -math.inf
    t_max = min(delta / (2 * (1 + delta)), eps / 4)
    for k in range(samples):
        if k >= budget:
            out.complete = False
            break
        a, b, c, g0, h0 = triples[int(rng.integers(len(triples)))]
        gam = _mix(g0, rng, rng.random() * t_max)
        eta = _mix(h0, rng, rng.random() * t_max)
        err = _cb(_diff(embs[b].compose(gam), embs[c].compose(eta)))
        worst = max(worst, err - cfg.bound(delta))
        log.debug("covering sample %d on (%d,%d,%d): %.3e", k, a, b, c, err)
    out.samples = min(samples, budget)
    out.worst_excess = float(worst)
    out.covered = worst <= 1e-6
    return out


def _mix(f0: BlockLinearMap, rng: np.random.Generator, t: float) -> BlockLinearMap:
    if t == 0:
        return f0
    rho = (
        random_ucp_map(f0.domain, f0.codomain, rng)
        if f0.domain.category == "Osy"
        else random_cc_map(f0.domain, f0.codomain, rng)
    )
    return BlockLinearMap(f0.domain, f0.codomain, (1 - t) * f0.action + t * rho.action)


# -- distances -------------------------------------------------------------


@dataclass
class DistanceEstimate:
    gh_upper: float
    bm_upper: float
    gh_witness: Optional[tuple[BlockLinearMap, BlockLinearMap]]
    bm_witness: Optional[BlockLinearMap]
    budget: int
    evaluations: int
    trace: list[float] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "gh_upper": self.gh_upper,
            "bm_upper": self.bm_upper,
            "budget": self.budget,
            "evaluations": self.evaluations,
        }
        if self.gh_witness is not None:
            out["gh_witness"] = {"f": self.gh_witness[0].to_json(), "g": self.gh_witness[1].to_json()}
        if self.bm_witness is not None:
            out["bm_witness"] = self.bm_witness.to_json()
        return out


def _condition(X: SpaceDescriptor, Y: SpaceDescriptor, t: np.ndarray) -> float:
    try:
        inv = np.linalg.inv(t)
    except np.linalg.LinAlgError:
        return math.inf
    if not np.all(np.isfinite(inv)):
        return math.inf
    return _cb(BlockLinearMap(X, Y, t)) * _cb(BlockLinearMap(Y, X, inv))


def _gh_value(X: SpaceDescriptor, Y: SpaceDescriptor, F: np.ndarray, G: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """δ for the pair ``f = F/‖F‖, g = G/‖G‖`` (inf if not embeddings)."""
    f = BlockLinearMap(X, Y, F)
    g = BlockLinearMap(Y, X, G)
    nf, ng = _cb(f), _cb(g)
    if nf == 0 or ng == 0:
        return math.inf, F, G
    f, g = f.scaled(1 / nf), g.scaled(1 / ng)
    df, dg = _embedding_delta(f), _embedding_delta(g)
    if not (math.isfinite(df) and math.isfinite(dg)):
        return math.inf, f.action, g.action
    gf = _cb(BlockLinearMap(X, X, g.action @ f.action - np.eye(X.dim)))
    fg = _cb(BlockLinearMap(Y, Y, f.action @ g.action - np.eye(Y.dim)))
    return max(df, dg, gf, fg), f.action, g.action


def _starts(X: SpaceDescriptor, Y: SpaceDescriptor, seed: int, count: int) -> list[np.ndarray]:
    n = X.dim
    out = [np.eye(n, dtype=complex)]
    perm = _block_permutation(X, Y)
    if perm is not None:
        out.insert(0, perm)
    for k in range(count):
        r = np.random.default_rng([seed, k])
        from scipy.stats import unitary_group

        out.append(unitary_group.rvs(n, random_state=r) if n > 1 else np.exp(2j * np.pi * r.random()) * np.eye(1))
    return out


def _block_permutation(X: SpaceDescriptor, Y: SpaceDescriptor) -> Optional[np.ndarray]:
    if sorted(X.blocks) != sorted(Y.blocks):
        return None
    used = [False] * len(Y.blocks)
    t = np.zeros((Y.dim, X.dim), dtype=complex)
    for i, b in enumerate(X.blocks):
        k = next(k for k, c in enumerate(Y.blocks) if c == b and not used[k])
        used[k] = True
        size = b[0] * b[1]
        t[Y.offsets[k] : Y.offsets[k] + size, X.offsets[i] : X.offsets[i] + size] = np.eye(size)
    return t


def distance_estimate(
    X: SpaceDescriptor,
    Y: SpaceDescriptor,
    budget: int = 40,
    seed: int = 0,
    which: Sequence[str] = ("gh", "bm"),
    step: float = 0.2,
) -> DistanceEstimate:
    """Upper bounds for the Gromov–Hausdorff and Banach–Mazur distances.

    ``bm_upper = log(‖T‖_cb ‖T⁻¹‖_cb)`` for the best T found. ``gh_upper``
    is the smallest δ found for a pair of δ-embeddings f, g whose
    compositions are δ-close to the identities. Both searches are random
    local searches from fixed starts with best-so-far semantics: the first
    ``budget`` evaluations for a larger budget are the same as for a
    smaller one, so the bounds are monotone in the budget.
    """
    _require_injective_class(X, Y)
    if budget < 1:
        raise PreconditionError("budget must be positive")
    if "bm" in which and X.dim != Y.dim:
        raise ShapeError("Banach–Mazur distance needs equal dimensions")
    if X.dim != Y.dim:
        return DistanceEstimate(math.inf, math.inf, None, None, budget, 0)
    starts = _starts(X, Y, seed, 3)
    rng = np.random.default_rng([seed, 1_000_003])
    evals = 0
    best_bm, best_t = math.inf, None
    trace: list[float] = []
    if "bm" in which:
        cur, cur_val, sc = None, math.inf, step
        k = 0
        while evals < budget:
            if k < len(starts):
                cand = starts[k]
                k += 1
            elif cur is None:
                break
            else:
                g = rng.standard_normal(cur.shape) + 1j * rng.standard_normal(cur.shape)
                cand = cur @ (np.eye(X.dim) + sc * g / np.linalg.norm(g, 2))
            val = _condition(X, Y, cand)
            evals += 1
            if val < cur_val:
                cur, cur_val = cand, val
            elif k >= len(starts):
                sc *= 0.85
            if val < best_bm:
                best_bm, best_t = val, cand
            trace.append(math.log(best_bm) if math.isfinite(best_bm) else math.inf)
    bm = max(0.0, math.log(best_bm)) if math.isfinite(best_bm) else math.inf
    bm_w = None if best_t is None else BlockLinearMap(X, Y, best_t)

    best_gh, gh_w = math.inf, None
    if "gh" in which:
        gh_evals = 0
        F = best_t if best_t is not None else starts[0]
        G = np.linalg.inv(F)
        cur_val, F, G = _gh_value(X, Y, F, G)
        gh_evals += 1
        if cur_val < best_gh:
            best_gh, gh_w = cur_val, (F, G)
        for start in starts:
            if gh_evals >= budget:
                break
            val, F2, G2 = _gh_value(X, Y, start, np.linalg.inv(start))
            gh_evals += 1
            if val < best_gh:
                best_gh, gh_w = val, (F2, G2)
        sc = step
        side = 0
        while gh_evals < budget and gh_w is not None:
            F, G = gh_w
            g = rng.standard_normal(F.shape) + 1j * rng.standard_normal(F.shape)
            pert = np.eye(X.dim) + sc * g / np.linalg.norm(g, 2)
            # Alternate between moving f and moving g.
            F2, G2 = (F @ pert, G) if side == 0 else (F, G @ pert)
            side ^= 1
            val, F2, G2 = _gh_value(X, Y, F2, G2)
            gh_evals += 1
            if val < best_gh:
                best_gh, gh_w = val, (F2, G2)
            else:
                sc *= 0.85
        evals += gh_evals
    gh_pair = None
    if gh_w is not None and math.isfinite(best_gh):
        gh_pair = (BlockLinearMap(X, Y, gh_w[0]), BlockLinearMap(Y, X, gh_w[1]))
    gh = max(0.0, best_gh) if math.isfinite(best_gh) else math.inf
    return DistanceEstimate(gh, bm, gh_pair, bm_w, budget, evals, trace)


# -- embedding nets --------------------------------------------------------


def _homogeneous(space: SpaceDescriptor) -> tuple[int, int, int]:
    if space.kind != "inf" or not space.is_full or len(set(space.blocks)) != 1:
        raise PreconditionError("embedding nets need spaces ℓ_∞^n(M_{q,s}) with one block shape")
    q, s = space.blocks[0]
    return len(space.blocks), q, s


@dataclass
class EmbNet:
    """Finite net of complete isometries ``ℓ_∞^d(M_{q,s}) -> ℓ_∞^m(M_{q,s})``.

    A member is the dual of a complete quotient ``ℓ_1^m(T) -> ℓ_1^d(T)``:
    an injection ``host`` (X block i is carried by Z block host[i]), one
    automorphism index per X block, and a P column for every other Z block.
    Members are ordered by (host, automorphisms, columns).
    """

    X: SpaceDescriptor
    Z: SpaceDescriptor
    eps: float
    units: np.ndarray  # (K, t, t)
    columns: np.ndarray  # (P, d, t, t)
    hosts: list[tuple[int, ...]]
    density_defect: float = math.nan
    samples: int = 0

    @property
    def d(self) -> int:
        return len(self.X.blocks)

    @property
    def m(self) -> int:
        return len(self.Z.blocks)

    def __len__(self) -> int:
        if not self.hosts:
            return 0
        return len(self.hosts) * len(self.units) ** self.d * len(self.columns) ** (self.m - self.d)

    def decode(self, k: int) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        if not 0 <= k < len(self):
            raise IndexError(k)
        nu, npc = len(self.units), len(self.columns)
        rest_p = npc ** (self.m - self.d)
        per_host = nu ** self.d * rest_p
        h, r = divmod(k, per_host)
        us, r = divmod(r, rest_p)
        u_idx = []
        for _ in range(self.d):
            us, x = divmod(us, nu)
            u_idx.append(x)
        p_idx = []
        for _ in range(self.m - self.d):
            r, x = divmod(r, npc)
            p_idx.append(x)
        return self.hosts[h], tuple(reversed(u_idx)), tuple(reversed(p_idx))

    def dual_view(self, k: int) -> np.ndarray:
        host, us, ps = self.decode(k)
        t = self.units.shape[1]
        dv = np.zeros((self.d, self.m, t, t), dtype=complex)
        for i, j in enumerate(host):
            dv[i, j] = self.units[us[i]]
        free = [j for j in range(self.m) if j not in host]
        for j, p in zip(free, ps):
            dv[:, j] = self.columns[p]
        return dv

    def map(self, k: int) -> BlockLinearMap:
        dv = self.dual_view(k)
        d, m, _, _ = dv.shape
        q, s = self.X.blocks[0]
        quot = BlockLinearMap(
            SpaceDescriptor.ell_one(m, s, q), SpaceDescriptor.ell_one(d, s, q), reassemble_dual_view(dv)
        )
        emb = dualize(quot)
        return BlockLinearMap(self.X, self.Z, emb.action)

    def nearest(self, dv: np.ndarray) -> tuple[float, int]:
        """Smallest cb-distance bound from a quotient dual view to the net."""
        q, s = self.X.blocks[0]
        best, best_k = math.inf, -1
        nu, npc = len(self.units), len(self.columns)
        col_d = [_col_dist(self.columns, dv[:, j], s, q) for j in range(self.m)]
        unit_cols = {}
        for i in range(self.d):
            stack = np.zeros((nu, self.d) + self.units.shape[1:], dtype=complex)
            stack[:, i] = self.units
            unit_cols[i] = stack
        for h, host in enumerate(self.hosts):
            worst, us = 0.0, []
            for i, j in enumerate(host):
                dist = _col_dist(unit_cols[i], dv[:, j], s, q)
                us.append(int(np.argmin(dist)))
                worst = max(worst, float(dist[us[-1]]))
            ps = []
            for j in range(self.m):
                if j in host:
                    continue
                ps.append(int(np.argmin(col_d[j])))
                worst = max(worst, float(col_d[j][ps[-1]]))
            if worst < best:
                idx = 0
                for u in us:
                    idx = idx * nu + u
                for p in ps:
                    idx = idx * npc + p
                best, best_k = worst, h * nu ** self.d * npc ** (self.m - self.d) + idx
        return best, best_k

    def summary(self) -> dict[str, Any]:
        return {
            "X": self.X.to_json(),
            "Z": self.Z.to_json(),
            "eps": self.eps,
            "size": len(self),
            "units": len(self.units),
            "columns": len(self.columns),
            "density_defect": None if math.isnan(self.density_defect) else self.density_defect,
            "samples": self.samples,
        }


def _col_dist(stack: np.ndarray, col: np.ndarray, s: int, q: int) -> np.ndarray:
    diff = stack - col[None]
    if s == q == 1:
        return np.abs(diff).sum(axis=(1, 2, 3))
    return haagerup_bound(diff, s, q)


def emb_net(
    X: SpaceDescriptor,
    Z: SpaceDescriptor,
    eps: float = 0.5,
    seed: int = 0,
    field: str = "complex",
    samples: int = 200,
    max_size: int = 2_000_000,
) -> EmbNet:
    """A finite eps-net of ``Emb(X, Z)``, built through the dual quotients."""
    d, q, s = _homogeneous(X)
    m, qz, sz = _homogeneous(Z)
    if (q, s) != (qz, sz):
        raise PreconditionError("X and Z must share their block shape")
    t = q * s
    if d > m:
        return EmbNet(X, Z, eps, np.zeros((0, t, t)), np.zeros((0, d, t, t)), [], 0.0, 0)
    nets = build_nets("CQ", d, m, q, s, eps=eps, eps0=eps / 2, seed=seed, field=field,
                      verify_samples=samples if q * s == 1 else 0)
    hosts = list(itertools.permutations(range(m), d))
    net = EmbNet(X, Z, eps, nets.Q.U.matrices, nets.P.members, hosts)
    if len(net) > max_size:
        raise BudgetError(f"embedding net would have {len(net)} members; increase eps")
    rng = np.random.default_rng([seed, 7])
    worst = 0.0
    for _ in range(samples):
        rho = random_class_map("CQ", d, m, s, q, field, rng)
        dist, _ = net.nearest(rho.dual_view)
        if dist > worst:
            worst = dist
            if dist > eps:
                raise NetConstructionError(
                    f"embedding net misses a sampled embedding by {dist:.4f} > {eps}",
                    sample=dualize(rho).action,
                )
    net.density_defect = worst
    net.samples = samples
    return net


# -- oscillation and ARP -------------------------------------------------------


def map_color(coloring: ColoringSpec, f: BlockLinearMap) -> float:
    """Evaluate a coloring on a map.

    Lipschitz colorings use their cb-distance formula. Discrete colorings
    of maps support the ``constant`` rule and a seeded hash of the rounded
    matrix.
    """
    if coloring.kind == "lipschitz":
        return coloring.value(f)
    if coloring.table is not None:
        raise PreconditionError("table colorings are indexed by rigid surjections, not maps")
    if coloring.r == 1 or coloring.rule == "constant":
        return 0.0
    if coloring.rule != "hash":
        raise PreconditionError(f"rule {coloring.rule!r} does not apply to maps")
    a = np.round(f.action, 9) + 0.0
    h = hashlib.blake2b(digest_size=8, key=int(coloring.seed).to_bytes(8, "little"))
    h.update(np.ascontiguousarray(a).tobytes())
    return float(int.from_bytes(h.digest(), "little") % coloring.r)


@dataclass
class OscillationReport:
    description: str
    osc: float
    epsilon: Optional[float]
    size: int
    values: list[float] = field(default_factory=list)

    @property
    def stabilized(self) -> Optional[bool]:
        return None if self.epsilon is None else self.osc <= self.epsilon

    def to_json(self) -> dict[str, Any]:
        return {
            "set": self.description,
            "osc": self.osc,
            "epsilon": self.epsilon,
            "size": self.size,
            "values": list(self.values),
        }


def oscillation(
    coloring: ColoringSpec,
    maps: Sequence[BlockLinearMap],
    epsilon: Optional[float] = None,
    description: str = "finite set",
) -> OscillationReport:
    """Max pairwise coloring difference over a finite set (0 when empty)."""
    vals = [map_color(coloring, f) for f in maps]
    osc = float(max(vals) - min(vals)) if vals else 0.0
    return OscillationReport(description, osc, epsilon, len(vals), vals)


@dataclass
class ArpResult:
    gamma: Optional[BlockLinearMap]
    gamma_index: Optional[int]
    report: OscillationReport
    examined: int

    def to_json(self) -> dict[str, Any]:
        return {
            "found": self.gamma is not None,
            "gamma_index": self.gamma_index,
            "gamma": None if self.gamma is None else self.gamma.to_json(),
            "report": self.report.to_json(),
            "examined": self.examined,
        }


def arp_search(
    X: SpaceDescriptor,
    Y: SpaceDescriptor,
    Z: SpaceDescriptor,
    coloring: ColoringSpec,
    eps: float,
    seed: int = 0,
    budget: int = 50,
    net_eps: float = 0.5,
    field: str = "complex",
    samples: int = 200,
) -> ArpResult:
    """Look for γ in a net of Emb(Y, Z) on which the coloring eps-stabilizes.

    Candidates γ are taken in net order; for each the oscillation over
    ``γ∘emb_net(X, Y)`` is computed. Returns the first γ with
    ``osc ≤ eps``, or no γ and the best report once ``budget`` candidates
    have been examined.
    """
    inner = emb_net(X, Y, net_eps, seed, field, samples)
    outer = emb_net(Y, Z, net_eps, seed + 1, field, samples)
    inner_maps = [inner.map(k) for k in range(len(inner))]
    best: Optional[tuple[float, int, OscillationReport]] = None
    examined = 0
    for k in range(len(outer)):
        if examined >= budget:
            break
        examined += 1
        gamma = outer.map(k)
        rep = oscillation(coloring, [gamma.compose(f) for f in inner_maps], eps, f"gamma[{k}] o Emb(X,Y) net")
        if rep.osc <= eps:
            return ArpResult(gamma, k, rep, examined)
        if best is None or rep.osc < best[0]:
            best = (rep.osc, k, rep)
    if best is None:
        return ArpResult(None, None, OscillationReport("empty", 0.0, eps, 0), examined)
    return ArpResult(None, None, best[2], examined)
