"""Primal-dual interior-point solver for small dense complex SDPs.

Standard form, one Hermitian PSD variable per block::

    minimize    sum_b <C_b, X_b>
    subject to  sum_b <A_ib, X_b> = c_i,   X_b >= 0

with the real trace pairing ``<A, X> = Re tr(A X)``. The dual is::

    maximize    c . y
    subject to  S_b = C_b - sum_i y_i A_ib >= 0

The iteration is an infeasible-start path-following method with the HKM
search direction and a Mehrotra predictor-corrector step. Blocks stay complex
Hermitian throughout; the real symmetric embedding lives only in the tests.
Infeasibility is detected by watching the iterates for a Farkas ray and
returning that ray as a checkable certificate.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ShapeError, SymmetryError
from .linalg import matrix_from_json, matrix_to_json

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
DEFAULT_MAX_DIM = 400


def _square(c: Any, n: int) -> np.ndarray:
    a = np.array(c, dtype=complex)
    if a.size != n * n:
        raise ShapeError(f"expected an {n} x {n} block, got {a.size} entries")
    return a.reshape(n, n)


@dataclass(frozen=True)
class SdpProblem:
    """A complex Hermitian SDP in standard form.

    Constraints are stored stacked: ``coeffs[b]`` has shape ``(m, n_b, n_b)``
    and holds the block-``b`` coefficient of every constraint, ``rhs`` has
    shape ``(m,)``. Use :meth:`from_constraints` to build one from a list of
    ``(per-block matrices, rhs)`` pairs.
    """

    block_dims: tuple[int, ...]
    objective: tuple[np.ndarray, ...]
    coeffs: tuple[np.ndarray, ...]
    rhs: np.ndarray

    def __post_init__(self) -> None:
        if not self.block_dims or any(int(n) <= 0 for n in self.block_dims):
            raise ShapeError("block_dims must be a nonempty list of positive ints")
        if len(self.objective) != len(self.block_dims) or len(self.coeffs) != len(
            self.block_dims
        ):
            raise ShapeError("objective/coeffs must have one entry per block")
        m = np.asarray(self.rhs).shape[0] if np.ndim(self.rhs) else 0
        for n, c, a in zip(self.block_dims, self.objective, self.coeffs):
            if c.shape != (n, n):
                raise ShapeError(f"objective block has shape {c.shape}, expected {(n, n)}")
            if a.shape != (m, n, n):
                raise ShapeError(f"coefficient stack has shape {a.shape}, expected {(m, n, n)}")
            scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
            if np.max(np.abs(c - c.conj().T), initial=0.0) > 1e-10 * scale:
                raise SymmetryError("objective block is not Hermitian")
            if m and np.max(np.abs(a - a.conj().transpose(0, 2, 1))) > 1e-10 * max(
                1.0, float(np.max(np.abs(a)))
            ):
                raise SymmetryError("constraint coefficient is not Hermitian")

    @property
    def num_constraints(self) -> int:
        return int(self.rhs.shape[0])

    @property
    def constraints(self) -> list[tuple[list[np.ndarray], float]]:
        return [
            ([a[i] for a in self.coeffs], float(self.rhs[i]))
            for i in range(self.num_constraints)
        ]

    @classmethod
    def from_constraints(
        cls,
        block_dims: Sequence[int],
        objective: Sequence[Any],
        constraints: Sequence[tuple[Sequence[Any], float]],
    ) -> "SdpProblem":
        dims = tuple(int(n) for n in block_dims)
        obj = tuple(_square(c, n) for c, n in zip(objective, dims))
        m = len(constraints)
        stacks = []
        for b, n in enumerate(dims):
            stack = np.zeros((m, n, n), dtype=complex)
            for i, (mats, _) in enumerate(constraints):
                if len(mats) != len(dims):
                    raise ShapeError("each constraint needs one coefficient per block")
                stack[i] = _square(mats[b], n)
            stacks.append(stack)
        rhs = np.array([float(r) for _, r in constraints], dtype=float)
        return cls(dims, obj, tuple(stacks), rhs)

    def to_json(self) -> dict[str, Any]:
        return {
            "block_dims": list(self.block_dims),
            "objective": [matrix_to_json(c) for c in self.objective],
            "constraints": [
                {"coeffs": [matrix_to_json(a) for a in mats], "rhs": r}
                for mats, r in self.constraints
            ],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SdpProblem":
        try:
            dims = obj["block_dims"]
            objective = [matrix_from_json(c) for c in obj["objective"]]
            cons = [
                ([matrix_from_json(a) for a in c["coeffs"]], float(c["rhs"]))
                for c in obj["constraints"]
            ]
        except (KeyError, TypeError) as exc:
            raise ShapeError(f"malformed SDP JSON: {exc}") from exc
        return cls.from_constraints(dims, objective, cons)


@dataclass(frozen=True)
class SdpSolution:
    """Solver output.

    ``gap`` is the relative duality gap ``|p - d| / (1 + |p| + |d|)``.
    For ``infeasible`` the ``certificate`` is a unit-norm ``y`` with
    ``A*(y) <= 0`` (up to ``sdp_tol``) and ``c . y > 10 sdp_tol``; for
    ``unbounded`` it is the flattened recession direction ``X``.
    """

    status: str
    primal_blocks: tuple[np.ndarray, ...]
    dual_vector: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    dual_slacks: tuple[np.ndarray, ...] = field(default=(), repr=False)
    certificate: Optional[np.ndarray] = field(default=None, repr=False)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "status": self.status,
            "primal_blocks": [matrix_to_json(x) for x in self.primal_blocks],
            "dual_vector": [float(v) for v in self.dual_vector],
            "primal_value": float(self.primal_value),
            "dual_value": float(self.dual_value),
            "gap": float(self.gap),
            "iterations": int(self.iterations),
        }
        if self.certificate is not None:
            out["certificate"] = [float(v) for v in np.real(self.certificate).ravel()]
        return out


class _Ops:
    """Vectorized constraint operator and its adjoint."""

    def __init__(self, p: SdpProblem) -> None:
        self.m = p.num_constraints
        self.dims = p.block_dims
        self.avec = [a.reshape(self.m, -1) for a in p.coeffs]
        self.coeffs = p.coeffs

    def apply(self, zs: Sequence[np.ndarray]) -> np.ndarray:
        """``Re tr(A_i Z)`` summed over blocks (Z need not be Hermitian)."""
        out = np.zeros(self.m)
        for av, z in zip(self.avec, zs):
            out += np.real(av @ z.T.ravel())
        return out

    def adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        return [(y @ av).reshape(n, n) for av, n in zip(self.avec, self.dims)]

    def schur(self, xs: Sequence[np.ndarray], sinvs: Sequence[np.ndarray]) -> np.ndarray:
        mat = np.zeros((self.m, self.m))
        for a, av, x, si in zip(self.coeffs, self.avec, xs, sinvs):
            g = x @ a @ si
            mat += np.real(av @ g.transpose(0, 2, 1).reshape(self.m, -1).T)
        return (mat + mat.T) / 2


def _herm(z: np.ndarray) -> np.ndarray:
    return (z + z.conj().T) / 2


def _inner(xs: Sequence[np.ndarray], ss: Sequence[np.ndarray]) -> float:
    return float(sum(np.real(np.vdot(x, s)) for x, s in zip(xs, ss)))


def _fro(zs: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.real(np.vdot(z, z)) for z in zs)))


def _max_step(xs: Sequence[np.ndarray], dxs: Sequence[np.ndarray]) -> float:
    """Largest alpha with X + alpha dX PSD (inf if unbounded)."""
    best = np.inf
    for x, dx in zip(xs, dxs):
        lo = np.linalg.cholesky(x)
        w = sla.solve_triangular(lo, dx, lower=True)
        w = sla.solve_triangular(lo, w.conj().T, lower=True).conj().T
        lam = np.linalg.eigvalsh(_herm(w))[0]
        if lam < 0:
            best = min(best, -1.0 / lam)
    return best


def _solve_psd(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        c = sla.cho_factor(mat, lower=True, check_finite=False)
        return sla.cho_solve(c, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq(mat, rhs, rcond=None)[0]


def solve_sdp(
    p: SdpProblem,
    sdp_tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    max_dim: int = DEFAULT_MAX_DIM,
) -> SdpSolution:
    """Solve ``p`` to relative gap and absolute residuals at most ``sdp_tol``."""
    if sdp_tol <= 0:
        raise ValueError("sdp_tol must be positive")
    total = sum(p.block_dims)
    if total > max_dim:
        raise ShapeError(f"total block dimension {total} exceeds limit {max_dim}")
    ops = _Ops(p)
    m = ops.m
    b = p.rhs.astype(float)
    cs = [_herm(c) for c in p.objective]

    xs, ss = [], []
    for k, n in enumerate(p.block_dims):
        a_norms = np.linalg.norm(ops.avec[k], axis=1) if m else np.zeros(1)
        b_abs = np.abs(b) if m else np.zeros(1)
        xi = max(10.0, np.sqrt(n), np.sqrt(n) * float(np.max((1 + b_abs) / (1 + a_norms))))
        eta = max(10.0, np.sqrt(n), 1 + max(float(np.linalg.norm(cs[k])), float(np.max(a_norms))))
        xs.append(xi * np.eye(n, dtype=complex))
        ss.append(eta * np.eye(n, dtype=complex))
    y = np.zeros(m)

    best: Optional[tuple[float, SdpSolution]] = None
    status = "max_iter"
    certificate = None

    def snapshot(st: str, it: int, cert: Optional[np.ndarray] = None) -> SdpSolution:
        rp = b - ops.apply(xs)
        rd = [c - a - s for c, a, s in zip(cs, ops.adjoint(y), ss)]
        pobj = _inner(cs, xs)
        dobj = float(b @ y)
        return SdpSolution(
            status=st,
            primal_blocks=tuple(_herm(x) for x in xs),
            dual_vector=y.copy(),
            primal_value=pobj,
            dual_value=dobj,
            gap=abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj)),
            iterations=it,
            primal_residual=float(np.max(np.abs(rp), initial=0.0)),
            dual_residual=max((float(np.max(np.abs(r))) for r in rd), default=0.0),
            dual_slacks=tuple(_herm(s) for s in ss),
            certificate=cert,
        )

    it = 0
    for it in range(max_iter + 1):
        aty = ops.adjoint(y)
        rp = b - ops.apply(xs)
        rd = [c - a - s for c, a, s in zip(cs, aty, ss)]
        pobj = _inner(cs, xs)
        dobj = float(b @ y)
        mu = _inner(xs, ss) / total
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        pinf = float(np.max(np.abs(rp), initial=0.0))
        dinf = max((float(np.max(np.abs(r))) for r in rd), default=0.0)
        merit = max(relgap, pinf, dinf, mu / (1 + abs(pobj) + abs(dobj)))
        if best is None or merit < best[0]:
            best = (merit, snapshot("max_iter", it))
        if max(relgap, pinf, dinf) <= sdp_tol and mu / (1 + abs(pobj) + abs(dobj)) <= sdp_tol:
            status = "optimal"
            break

        # Farkas ray for primal infeasibility: A*(y) <= 0 with b.y > 0.
        ny = float(np.linalg.norm(y))
        if m and dobj > 0 and ny > 0:
            ybar = y / ny
            lam = max(float(np.linalg.eigvalsh(_herm(z))[-1]) for z in ops.adjoint(ybar))
            if lam <= sdp_tol and float(b @ ybar) > 10 * sdp_tol:
                status, certificate = "infeasible", ybar
                break
        # Recession direction for dual infeasibility: A(X) = 0, <C,X> < 0.
        nx = _fro(xs)
        if pobj < 0 and nx > 0:
            xbar = [x / nx for x in xs]
            if (
                float(np.max(np.abs(ops.apply(xbar)), initial=0.0)) <= sdp_tol
                and _inner(cs, xbar) < -10 * sdp_tol
            ):
                status = "unbounded"
                certificate = np.concatenate([x.ravel() for x in xbar])
                break
        if it == max_iter:
            break
        if ny > 1e14 or nx > 1e14:
            log.debug("iterates diverged without a clean certificate")
            break

        try:
            sinvs = [np.linalg.inv(s) for s in ss]
            schur = ops.schur(xs, sinvs) if m else np.zeros((0, 0))
            x_rd_si = ops.apply([x @ r @ si for x, r, si in zip(xs, rd, sinvs)])

            def direction(rc: list[np.ndarray]) -> tuple[list, np.ndarray, list]:
                rhs = rp - ops.apply(rc) + x_rd_si
                dy = _solve_psd(schur, rhs) if m else np.zeros(0)
                for _ in range(3 if m else 1):
                    # Iterative refinement: the Schur matrix is badly
                    # conditioned near the optimum, so correct dy until the
                    # primal equation A(dX) = rp holds to working precision.
                    ds = [r - a for r, a in zip(rd, ops.adjoint(dy))]
                    dx = [_herm(q - x @ d @ si) for q, x, d, si in zip(rc, xs, ds, sinvs)]
                    if not m:
                        break
                    resid = rp - ops.apply(dx)
                    if float(np.max(np.abs(resid))) <= 1e-15 * (1 + float(np.max(np.abs(rp)))):
                        break
                    dy = dy + _solve_psd(schur, resid)
                return dx, dy, ds

            dxa, dya, dsa = direction([-x for x in xs])
            ap = min(1.0, _max_step(xs, dxa))
            ad = min(1.0, _max_step(ss, dsa))
            mu_aff = _inner(
                [x + ap * d for x, d in zip(xs, dxa)], [s + ad * d for s, d in zip(ss, dsa)]
            ) / total
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
            rc = [
                sigma * mu * si - x - dxx @ dss @ si
                for si, x, dxx, dss in zip(sinvs, xs, dxa, dsa)
            ]
            dx, dy, ds = direction(rc)
            gamma = 0.9 + 0.09 * min(ap, ad)
            ap = min(1.0, gamma * _max_step(xs, dx))
            ad = min(1.0, gamma * _max_step(ss, ds))
        except np.linalg.LinAlgError:
            log.debug("factorization failed at iteration %d", it)
            break
        if ap < 1e-12 and ad < 1e-12:
            break
        log.debug("it=%d relgap=%.2e pinf=%.2e dinf=%.2e mu=%.2e ap=%.3f ad=%.3f sigma=%.2e", it, relgap, pinf, dinf, mu, ap, ad, sigma)
        xs = [_herm(x + ap * d) for x, d in zip(xs, dx)]
        y = y + ad * dy
        ss = [_herm(s + ad * d) for s, d in zip(ss, ds)]

    if status in ("optimal", "infeasible", "unbounded"):
        return snapshot(status, it, certificate)
    assert best is not None
    sol = best[1]
    return SdpSolution(**{**sol.__dict__, "status": "max_iter", "iterations": it})


def real_embedding(p: SdpProblem) -> SdpProblem:
    """Equivalent real symmetric SDP (each n x n block becomes 2n x 2n).

    Used as a cross-check oracle: ``X = Re + i Im`` maps to
    ``[[Re, -Im], [Im, Re]]`` and pairings pick up a factor 2, which is
    compensated by halving the coefficients.
    """

    def emb(z: np.ndarray) -> np.ndarray:
        return np.block([[z.real, -z.imag], [z.imag, z.real]]).astype(complex)

    obj = tuple(emb(c) / 2 for c in p.objective)
    coeffs = tuple(
        np.stack([emb(a[i]) / 2 for i in range(p.num_constraints)])
        if p.num_constraints
        else np.zeros((0, 2 * n, 2 * n), dtype=complex)
        for a, n in zip(p.coeffs, p.block_dims)
    )
    return SdpProblem(tuple(2 * n for n in p.block_dims), obj, coeffs, p.rhs.copy())


def load_problem(path: str) -> SdpProblem:
    with open(path, encoding="utf-8") as fh:
        return SdpProblem.from_json(json.load(fh))
