"""Completely bounded norms, Choi matrices and injective extensions.

The cb norm of ``f: X -> M_{q,s}`` (X a subspace of an ∞-sum realized as
block-diagonal operators ``K -> H``) is the least ``t`` for which the map

    [[λ, x], [y*, μ]]  ↦  [[t λ, f(x)], [f(y)*, t μ]]

on the Paulsen system of X extends to a completely positive map on the full
matrix algebra ``M_{dim H + dim K}``. Because ``t`` enters linearly once the
diagonal is scaled, this is one SDP in the Choi matrix of the extension,
minimizing ``t`` directly. Codomain ∞-sums are handled one block at a time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CategoryError, ConsistencyError, PreconditionError
from .linalg import is_hermitian, min_eig
from .opspace import (
    ISOMETRY_TOL,
    BlockLinearMap,
    SpaceDescriptor,
    SpaceElement,
    delta_defect,
    element_from_coords,
    level_norm,
)
from .sdp import SdpProblem, SdpSolution, solve_sdp

log = logging.getLogger(__name__)

SDP_TOL = 1e-9


@dataclass
class CbCertificate:
    value: float
    lower_value: float
    lower_level: int
    lower_witness: Optional[SpaceElement]
    upper_witness: Optional[SdpSolution]
    component_values: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "value": self.value,
            "lower_value": self.lower_value,
            "lower_level": self.lower_level,
            "component_values": list(self.component_values),
        }
        if self.upper_witness is not None:
            out["upper_status"] = self.upper_witness.status
            out["upper_gap"] = self.upper_witness.gap
        return out


# -- Paulsen extension SDP ---------------------------------------------


def _corner(space: SpaceDescriptor, vec: np.ndarray) -> np.ndarray:
    """Place an ambient element in the upper-right corner of M_{Q+S}."""
    qd, sd = space.row_dims
    out = np.zeros((qd + sd, qd + sd), dtype=complex)
    out[:qd, qd:] = space.block_diagonal(vec)
    return out


def _entry_coeffs(a: np.ndarray, mp: int) -> np.ndarray:
    """G[k, l] with Ψ(a)_{kl} = tr(G[k, l] C) for the Choi matrix C of Ψ."""
    n = a.shape[0]
    out = np.zeros((mp, mp, n * mp, n * mp), dtype=complex)
    at = a.T
    for k in range(mp):
        for l in range(mp):
            unit = np.zeros((mp, mp))
            unit[l, k] = 1.0
            out[k, l] = np.kron(at, unit)
    return out


def _re(g: np.ndarray) -> np.ndarray:
    return (g + g.conj().T) / 2


def _im(g: np.ndarray) -> np.ndarray:
    return (g - g.conj().T) / 2j


@dataclass
class _PaulsenData:
    problem: SdpProblem
    n: int
    mp: int


def _paulsen_problem(
    domain: SpaceDescriptor, images: Sequence[np.ndarray], q: int, s: int
) -> _PaulsenData:
    """SDP minimizing t with ``images[k] = f(basis_k)`` as q x s matrices."""
    qd, sd = domain.row_dims
    n = qd + sd
    mp = q + s
    ph = np.diag(np.r_[np.ones(qd), np.zeros(sd)]).astype(complex)
    pk = np.diag(np.r_[np.zeros(qd), np.ones(sd)]).astype(complex)
    gh = _entry_coeffs(ph, mp)
    gk = _entry_coeffs(pk, mp)
    t_coeff = _re(gh[0, 0])
    coeffs: list[np.ndarray] = []
    rhs: list[float] = []

    # Ψ(P_H) = t diag(I_q, 0) and Ψ(P_K) = t diag(0, I_s): Hermitian targets.
    for g, diag_set in ((gh, range(q)), (gk, range(q, mp))):
        for k in range(mp):
            for l in range(k, mp):
                if k == l:
                    c = _re(g[k, k])
                    if k in diag_set:
                        if g is gh and k == 0:
                            continue
                        c = c - t_coeff
                    coeffs.append(c)
                    rhs.append(0.0)
                else:
                    coeffs.append(_re(g[k, l]))
                    rhs.append(0.0)
                    coeffs.append(_im(g[k, l]))
                    rhs.append(0.0)

    basis = domain.basis_matrix()
    for vec, img in zip(basis, images):
        g = _entry_coeffs(_corner(domain, vec), mp)
        target = np.zeros((mp, mp), dtype=complex)
        target[:q, q:] = img
        for k in range(mp):
            for l in range(mp):
                coeffs.append(_re(g[k, l]))
                rhs.append(float(target[k, l].real))
                coeffs.append(_im(g[k, l]))
                rhs.append(float(target[k, l].imag))

    problem = SdpProblem(
        (n * mp,), (t_coeff,), (np.array(coeffs),), np.array(rhs, dtype=float)
    )
    return _PaulsenData(problem, n, mp)


def _component_images(f: BlockLinearMap, j: int) -> tuple[list[np.ndarray], int, int]:
    fa = f.with_ambient_codomain()
    q, s = fa.codomain.blocks[j]
    comp = fa.codomain_component(j)
    return [comp[:, k].reshape(q, s) for k in range(f.domain.dim)], q, s


def _solve_component(
    f: BlockLinearMap, j: int, sdp_tol: float
) -> tuple[float, Optional[SdpSolution], Optional[_PaulsenData]]:
    images, q, s = _component_images(f, j)
    if max((float(np.max(np.abs(m))) for m in images), default=0.0) == 0.0:
        return 0.0, None, None
    if (q, s) == (1, 1) and f.domain.is_full:
        # A functional on a full ∞-sum: its (cb) norm is the sum of the
        # trace norms of its blockwise coefficient matrices.
        coeff = np.array([m[0, 0] for m in images])
        return functional_norm(f.domain, coeff), None, None
    data = _paulsen_problem(f.domain, images, q, s)
    sol = solve_sdp(data.problem, sdp_tol=sdp_tol)
    if sol.status != "optimal":
        if sol.status == "max_iter" and sol.gap < 1e-6 and sol.primal_residual < 1e-6:
            log.debug("accepting near-optimal Paulsen SDP (gap %.2e)", sol.gap)
        else:
            raise ConsistencyError(
                f"Paulsen SDP ended with status {sol.status} "
                f"(gap={sol.gap:.2e}, residual={sol.primal_residual:.2e})"
            )
    return max(0.0, (sol.primal_value + sol.dual_value) / 2), sol, data


def _to_inf(f: BlockLinearMap) -> BlockLinearMap:
    """Maps between ℓ_1-sums have the cb norm of their preduals."""
    if f.domain.kind == "one" or f.codomain.kind == "one":
        if f.domain.kind != f.codomain.kind:
            raise PreconditionError("mixed ∞-sum/ℓ_1-sum maps are not supported")
        return f.dualize()
    return f.with_ambient_codomain()


def cb_norm_value(f: BlockLinearMap, sdp_tol: float = SDP_TOL) -> float:
    """The cb norm without witnesses."""
    f = _to_inf(f)
    return max(_solve_component(f, j, sdp_tol)[0] for j in range(len(f.codomain.blocks)))


def haagerup_bound(cols: np.ndarray, s: int, q: int) -> np.ndarray:
    """Cb-norm upper bounds for a stack ``(..., d, t, t)`` of columns.

    The realignment SVD writes each entry as ``a ↦ Σ_k A_k a B_k``; on the
    predual side the column becomes ``(y_i) ↦ Σ_{i,k} B_ik y_i A_ik`` whose cb
    norm is at most ``‖Σ B B*‖^{1/2} ‖Σ A* A‖^{1/2}``. The bound is exact for
    completely positive columns and never exceeds the realignment bound.
    """
    c = np.asarray(cols, dtype=complex)
    lead = c.shape[:-3]
    d = c.shape[-3]
    r = c.reshape(lead + (d, s, q, s, q)).swapaxes(-3, -2).reshape(lead + (d, s * s, q * q))
    uu, sv, vh = np.linalg.svd(r, full_matrices=False)
    k = sv.shape[-1]
    a = (uu * np.sqrt(sv)[..., None, :]).swapaxes(-1, -2).reshape(lead + (d, k, s, s))
    bt = (vh * np.sqrt(sv)[..., :, None]).reshape(lead + (d, k, q, q))
    b = bt.swapaxes(-1, -2)
    s1 = np.einsum("...ab,...cb->...ac", b, b.conj()).sum(axis=(-4, -3))
    s2 = np.einsum("...ba,...bc->...ac", a.conj(), a).sum(axis=(-4, -3))
    n1 = np.linalg.eigvalsh((s1 + s1.conj().swapaxes(-1, -2)) / 2)[..., -1]
    n2 = np.linalg.eigvalsh((s2 + s2.conj().swapaxes(-1, -2)) / 2)[..., -1]
    return np.sqrt(np.maximum(n1, 0) * np.maximum(n2, 0))


def _trace_class_square(f: BlockLinearMap) -> tuple[np.ndarray, int, int]:
    """Action of f on square trace-class matrices, padding block diagonals."""
    dom, cod = f.domain, f.codomain
    rs, cs = dom.row_dims
    n_in = max(rs, cs)
    ro, co = cod.row_dims
    n_out = max(ro, co)
    big = np.zeros((n_out * n_out, n_in * n_in), dtype=complex)
    r_off = np.cumsum([0] + [b[0] for b in dom.blocks])
    c_off = np.cumsum([0] + [b[1] for b in dom.blocks])
    k = 0
    for bi, (bs, bq) in enumerate(dom.blocks):
        for a in range(bs):
            for b in range(bq):
                img = cod.split(f.action[:, k])
                out = np.zeros((n_out, n_out), dtype=complex)
                ro_, co_ = 0, 0
                for blk in img:
                    out[ro_ : ro_ + blk.shape[0], co_ : co_ + blk.shape[1]] = blk
                    ro_ += blk.shape[0]
                    co_ += blk.shape[1]
                big[:, (r_off[bi] + a) * n_in + c_off[bi] + b] = out.ravel()
                k += 1
    return big, n_in, n_out


def diamond_norm(action: np.ndarray, n_in: int, n_out: int, sdp_tol: float = SDP_TOL) -> float:
    """Cb norm of a map ``T_{n_in} -> T_{n_out}`` given on row-major vectors.

    Solves the standard SDP: maximize ``Re <J, X>`` subject to
    ``[[1 ⊗ ρ0, X], [X*, 1 ⊗ ρ1]] ⪰ 0`` with ρ0, ρ1 density matrices, where
    ``J = Σ Φ(E_ab) ⊗ E_ab``.
    """
    e = np.asarray(action, dtype=complex)
    if not np.any(e):
        return 0.0
    nx, ny = n_in, n_out
    dim = nx * ny
    j = np.zeros((dim, dim), dtype=complex)
    for a in range(nx):
        for b in range(nx):
            unit = np.zeros((nx, nx))
            unit[a, b] = 1.0
            j += np.kron(e[:, a * nx + b].reshape(ny, ny), unit)
    w_dim = 2 * dim
    obj_w = np.zeros((w_dim, w_dim), dtype=complex)
    obj_w[:dim, dim:] = -j / 2
    obj_w[dim:, :dim] = -j.conj().T / 2
    zero_r = np.zeros((nx, nx), dtype=complex)
    cons: list[tuple[list[np.ndarray], float]] = []

    def unit_mat(n: int, r: int, c: int) -> np.ndarray:
        u = np.zeros((n, n), dtype=complex)
        u[r, c] = 1.0
        return u

    for off, which in ((0, 1), (dim, 2)):
        for al in range(dim):
            for be in range(al, dim):
                (y, x), (y2, x2) = divmod(al, nx), divmod(be, nx)
                g = unit_mat(w_dim, off + be, off + al)
                h = unit_mat(nx, x2, x) if y == y2 else zero_r
                parts = [(_re, "re")] + ([(_im, "im")] if al != be else [])
                for fn, _ in parts:
                    blocks = [fn(g), zero_r, zero_r]
                    blocks[which] = -fn(h) if y == y2 else zero_r
                    cons.append((blocks, 0.0))
    cons.append(([np.zeros((w_dim, w_dim)), np.eye(nx), zero_r], 1.0))
    cons.append(([np.zeros((w_dim, w_dim)), zero_r, np.eye(nx)], 1.0))
    prob = SdpProblem.from_constraints((w_dim, nx, nx), (obj_w, zero_r, zero_r), cons)
    sol = solve_sdp(prob, sdp_tol=sdp_tol)
    if sol.status != "optimal" and not (sol.status == "max_iter" and sol.gap < 1e-6):
        raise ConsistencyError(f"diamond-norm SDP ended with status {sol.status}")
    return max(0.0, -(sol.primal_value + sol.dual_value) / 2)


def trace_class_cb(f: BlockLinearMap, sdp_tol: float = SDP_TOL) -> float:
    """Cb norm of a map between full ℓ_1-sums of trace classes.

    Agrees with :func:`cb_norm_value` (which works on the predual) and is
    much cheaper for maps between a few small blocks.
    """
    if f.domain.kind != "one" or f.codomain.kind != "one" or not f.domain.is_full:
        raise PreconditionError("trace_class_cb needs a map between full ℓ_1-sums")
    fa = f.with_ambient_codomain()
    # Blocks carry (1/rows) times the trace norm; rescale to plain trace norms.
    d_in = np.concatenate([np.full(a * b, float(a)) for a, b in fa.domain.blocks])
    d_out = np.concatenate([np.full(a * b, 1.0 / a) for a, b in fa.codomain.blocks])
    scaled = BlockLinearMap(fa.domain, fa.codomain, d_out[:, None] * fa.action * d_in[None, :])
    big, n_in, n_out = _trace_class_square(scaled)
    return diamond_norm(big, n_in, n_out, sdp_tol)


def functional_norm(domain: SpaceDescriptor, coeff: np.ndarray) -> float:
    """Norm of ``x ↦ Σ coeff_k x_k`` (ambient coordinates) on a full ∞-sum."""
    return float(
        sum(np.sum(np.linalg.svd(b, compute_uv=False)) for b in domain.split(coeff))
    )


def smith_level(codomain: SpaceDescriptor) -> int:
    """Level at which amplification norms of maps into this ∞-sum stabilize.

    Each block M_{q,s} sits inside M_{max(q,s)}, so Smith's lemma gives
    ``max(q, s)``. The smaller ``min(q, s)`` is not enough: the identity
    from rows M_{1,2} to columns M_{2,1} has norm 1 but cb norm √2.
    """
    return max(max(q, s) for q, s in codomain.blocks)


def cb_norm(
    f: BlockLinearMap,
    tol: float = 1e-6,
    witness: bool = True,
    restarts: int = 8,
    seed: int = 0,
) -> CbCertificate:
    """Compute ``‖f‖_cb`` with an SDP upper certificate and an ascent lower witness."""
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    f = _to_inf(f)
    sdp_tol = min(SDP_TOL, tol / 100)
    vals, sols = [], []
    for j in range(len(f.codomain.blocks)):
        v, sol, _ = _solve_component(f, j, sdp_tol)
        vals.append(v)
        sols.append(sol)
    jmax = int(np.argmax(vals))
    value = float(vals[jmax])
    level = smith_level(f.codomain)
    low_val, low_x = 0.0, None
    if witness and value > 0:
        low_val, low_x = amplification_norm(f, level, restarts=restarts, seed=seed)
    return CbCertificate(value, low_val, level, low_x, sols[jmax], [float(v) for v in vals])


# -- amplification norms by ascent -------------------------------------


def _apply_level(f: BlockLinearMap, c: np.ndarray) -> SpaceElement:
    return element_from_coords(f.codomain, c @ f.action.T)


def _top_pair(x: SpaceElement) -> tuple[float, int, np.ndarray, np.ndarray]:
    best = (-1.0, 0, None, None)
    for j, d in enumerate(x.data):
        u, sv, vh = np.linalg.svd(d)
        if sv[0] > best[0]:
            best = (float(sv[0]), j, u[:, 0], vh[0].conj())
    return best  # type: ignore[return-value]


def _functional_grad(space: SpaceDescriptor, m: int, j: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """h with u* x_j v = Σ h ⊙ (ambient level-m coords of x)."""
    amb = space.ambient_dim
    h = np.zeros((m, m, amb), dtype=complex)
    o = space.offsets[j]
    q, s = space.blocks[j]
    uu = u.conj().reshape(m, q)
    vv = v.reshape(m, s)
    h[:, :, o : o + q * s] = np.einsum("au,bv->abuv", uu, vv).reshape(m, m, q * s)
    return h


def _polar_maximizer(domain: SpaceDescriptor, g: np.ndarray) -> np.ndarray:
    """Coords (full domain) of the unit-ball element maximizing Re Σ g ⊙ c."""
    m = g.shape[0]
    w = element_from_coords(domain, g)
    out = []
    for d in w.data:
        uu, _, vh = np.linalg.svd(d.T, full_matrices=False)
        out.append((vh.conj().T @ uu.conj().T))
    x = SpaceElement(domain, m, tuple(out))
    return x.coords()


def amplification_norm(
    f: BlockLinearMap,
    m: int,
    restarts: int = 8,
    seed: int = 0,
    iters: int = 300,
    start: Optional[np.ndarray] = None,
) -> tuple[float, SpaceElement]:
    """Lower bound for ``‖f^{(m)}‖`` by multi-start ascent, with its maximizer.

    Full domains use alternating maximization: fix the top singular pair of
    the image, then jump to the polar element that maximizes the resulting
    linear functional (a trace-norm dual). Subspace domains use normalized
    gradient ascent on ``‖f^{(m)}(x)‖ / ‖x‖``.
    """
    rng = np.random.default_rng(seed)
    dim = f.domain.dim
    starts = []
    if start is not None:
        starts.append(np.asarray(start, dtype=complex))
    for _ in range(restarts):
        starts.append(rng.normal(size=(m, m, dim)) + 1j * rng.normal(size=(m, m, dim)))
    best_val, best_c = -1.0, None
    for c0 in starts:
        if f.domain.is_full:
            val, c = _ascent_full(f, m, c0, iters)
        else:
            val, c = _ascent_subspace(f, m, c0, iters)
        if val > best_val:
            best_val, best_c = val, c
    assert best_c is not None
    x = element_from_coords(f.domain, best_c)
    nx = level_norm(x)
    x = element_from_coords(f.domain, best_c / nx)
    return float(level_norm(_apply_level(f, x.coords()))), x


def _ascent_full(f: BlockLinearMap, m: int, c: np.ndarray, iters: int) -> tuple[float, np.ndarray]:
    c = c / level_norm(element_from_coords(f.domain, c))
    val = level_norm(_apply_level(f, c))
    for _ in range(iters):
        y = _apply_level(f, c)
        _, j, u, v = _top_pair(y)
        h = _functional_grad(f.codomain, m, j, u, v)
        g = h @ f.action  # gradient in domain coordinates
        c_new = _polar_maximizer(f.domain, g)
        new = level_norm(_apply_level(f, c_new))
        if new <= val + 1e-15:
            if new >= val:
                c = c_new
            break
        c, val = c_new, new
    return float(val), c


def _ascent_subspace(f: BlockLinearMap, m: int, c: np.ndarray, iters: int) -> tuple[float, np.ndarray]:
    dom = f.domain
    basis = dom.basis_matrix()

    def ratio(cc: np.ndarray) -> float:
        return level_norm(_apply_level(f, cc)) / level_norm(element_from_coords(dom, cc))

    val = ratio(c)
    step = 0.5
    for _ in range(iters):
        y = _apply_level(f, c)
        ny, j, u, v = _top_pair(y)
        g_num = _functional_grad(f.codomain, m, j, u, v) @ f.action
        x = element_from_coords(dom, c)
        nx, jd, ud, vd = _top_pair(x)
        g_den = _functional_grad(dom, m, jd, ud, vd) @ basis.T
        grad = (g_num / ny - g_den / nx).conj()
        scale = np.linalg.norm(c)
        improved = False
        while step > 1e-9:
            trial = c + step * scale * grad / max(np.linalg.norm(grad), 1e-300)
            tv = ratio(trial)
            if tv > val:
                c, val = trial / np.linalg.norm(trial), tv
                step *= 1.5
                improved = True
                break
            step /= 2
        if not improved:
            break
    return float(val), c


# -- Choi matrices -----------------------------------------------------


@dataclass
class ChoiResult:
    choi: np.ndarray
    is_cp: bool
    min_eig: float


def _require_square(space: SpaceDescriptor) -> None:
    if any(q != s for q, s in space.blocks):
        raise CategoryError("Choi matrices need square-block algebras")
    if not space.is_full:
        raise CategoryError("Choi matrices need a full block algebra domain")


def choi_matrix(f: BlockLinearMap) -> np.ndarray:
    """``Σ E_ij ⊗ f(E_ij)`` over the matrix units of the domain block algebra."""
    _require_square(f.domain)
    fa = f.with_ambient_codomain()
    _require_square(fa.codomain)
    nd = fa.domain.row_dims[0]
    kd = fa.codomain.row_dims[0]
    out = np.zeros((nd * kd, nd * kd), dtype=complex)
    row0 = 0
    for o, (q, _) in zip(fa.domain.offsets, fa.domain.blocks):
        for i in range(q):
            for j in range(q):
                img = fa.codomain.block_diagonal(fa.action[:, o + i * q + j])
                r, c = row0 + i, row0 + j
                out[r * kd : (r + 1) * kd, c * kd : (c + 1) * kd] = img
        row0 += q
    return out


def choi_apply(choi: np.ndarray, x: np.ndarray, out_dim: int) -> np.ndarray:
    """Recover ``φ(x)`` from its Choi matrix: ``Tr_1[(xᵀ ⊗ I) C]``."""
    n = x.shape[0]
    c4 = choi.reshape(n, out_dim, n, out_dim)
    return np.einsum("ij,ikjl->kl", x, c4)


def choi_and_cp(f: BlockLinearMap) -> ChoiResult:
    """Choi matrix and CP verdict; a non-Hermitian Choi matrix is never CP.

    ``min_eig`` is the smallest eigenvalue of the Hermitian part.
    """
    c = choi_matrix(f)
    lo = min_eig(c)
    return ChoiResult(c, is_hermitian(c) and lo >= -1e-9, lo)


# -- injective extension -----------------------------------------------


def extend_cc(f: BlockLinearMap, budget_tol: float = 1e-6) -> BlockLinearMap:
    """Extend a complete contraction on a subspace to the ambient ∞-sum.

    Solves the Paulsen SDP per codomain block and reads the extension off
    the corner of the CP extension. The result is then corrected on the
    subspace so that it agrees with ``f`` there exactly.
    """
    if not f.codomain.is_full:
        raise PreconditionError("extension needs a full ∞-sum codomain")
    dom = f.domain
    amb = dom.ambient()
    blocks = []
    for j, (q, s) in enumerate(f.codomain.blocks):
        t, sol, data = _solve_component(f, j, SDP_TOL)
        if t > 1 + 1e-7:
            raise PreconditionError(f"map is not completely contractive (cb norm {t:.9f})")
        if sol is None or data is None:
            blocks.append(np.zeros((q * s, amb.dim), dtype=complex))
            continue
        choi = sol.primal_blocks[0]
        g = np.zeros((q * s, amb.dim), dtype=complex)
        for k in range(amb.dim):
            img = choi_apply(choi, _corner(amb, np.eye(amb.dim)[k]), data.mp)
            g[:, k] = img[:q, q:].ravel()
        blocks.append(g)
    g_sdp = np.vstack(blocks)
    if dom.is_full:
        return BlockLinearMap(amb, f.codomain, f.action.copy())
    b = dom.basis_matrix()  # rows: basis in ambient coords
    coords = np.linalg.pinv(b.T)  # ambient -> subspace coords (orthogonal projection)
    action = f.action @ coords + g_sdp @ (np.eye(amb.dim) - b.T @ coords)
    g = BlockLinearMap(amb, f.codomain, action)
    norm = cb_norm_value(g)
    if norm > 1 + budget_tol:
        raise ConsistencyError(f"extension has cb norm {norm:.9f} > 1 + {budget_tol}")
    return g


# -- tuples of maps out of a single block ------------------------------


def tupled_map(components: Sequence[BlockLinearMap]) -> BlockLinearMap:
    """``x ↦ (f_1(x), ..., f_k(x))`` into the ∞-sum of the codomains."""
    if not components:
        raise PreconditionError("need at least one component")
    dom = components[0].domain
    blocks: list[tuple[int, int]] = []
    rows = []
    for c in components:
        if c.domain.dim != dom.dim:
            raise PreconditionError("components must share a domain")
        ca = c.with_ambient_codomain()
        blocks.extend(ca.codomain.blocks)
        rows.append(ca.action)
    return BlockLinearMap(dom, SpaceDescriptor(tuple(blocks)), np.vstack(rows))


@dataclass
class InjectiveCheck:
    is_complete_isometry: bool
    witness_index: Optional[int]
    defects: list[float]


def lemma_injective_check(components: Sequence[BlockLinearMap]) -> InjectiveCheck:
    """Decide whether the tupled map is a complete isometry via its components.

    For a domain ``M_{q,s}`` the tuple of complete contractions is a complete
    isometry exactly when one component is, so it suffices to look for a
    component with ``delta_defect ≤ 1e-6``.
    """
    defects = []
    for i, c in enumerate(components):
        if not (c.domain.is_full and len(c.domain.blocks) == 1):
            raise PreconditionError("components must be defined on a single block M_{q,s}")
        if cb_norm_value(c) > 1 + 1e-7:
            raise PreconditionError(f"component {i} is not completely contractive")
        defects.append(delta_defect(c, cb_norm_value))
    for i, d in enumerate(defects):
        if d <= ISOMETRY_TOL:
            return InjectiveCheck(True, i, defects)
    return InjectiveCheck(False, None, defects)


def transpose_map(q: int) -> BlockLinearMap:
    sp = SpaceDescriptor.matrices(q)
    a = np.zeros((q * q, q * q), dtype=complex)
    for i in range(q):
        for j in range(q):
            a[j * q + i, i * q + j] = 1
    return BlockLinearMap(sp, sp, a)


def is_complete_isometry(f: BlockLinearMap) -> bool:
    return delta_defect(f, cb_norm_value) <= ISOMETRY_TOL
