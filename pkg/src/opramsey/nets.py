"""Finite nets of column maps, the α encodings and the rigid surjection τ.

A linear map ``ℓ_1^n(T_{s,q}) -> ℓ_1^d(T_{s,q})`` is stored as a d x n
matrix of entry maps ``T_{s,q} -> T_{s,q}``, each a ``t x t`` matrix with
``t = s q`` acting on row-major vectorized s x q blocks. A *column* is a
``(d, t, t)`` array, i.e. a map ``T_{s,q} -> ℓ_1^d(T_{s,q})``.

Two classes are supported:

* ``CQ``: complete quotient maps. Columns are complete contractions and
  every row carries an automorphism ``a ↦ u a v`` whose column is otherwise
  zero.
* ``TPCQ``: trace-preserving completely positive quotient maps (s = q).
  Columns are quantum channels split over d outputs, automorphisms are
  unitary conjugations and the last column is pinned to ``(0, ..., 0, Id)``.

Cb distances between columns use the realignment bound: an entry with
realigned singular values σ_k is a sum of maps ``a ↦ σ_k A_k a B_k`` with
Frobenius-normalized A_k, B_k, so its cb norm is at most Σ σ_k. For
``q = s = 1`` this bound is the exact ℓ_1 distance.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy.stats import ortho_group, unitary_group

from .cbnorm import haagerup_bound, trace_class_cb
from .errors import (
    BudgetError,
    ConsistencyError,
    NetConstructionError,
    NetResolutionError,
    PreconditionError,
    RigidityError,
)
from .opspace import BlockLinearMap, SpaceDescriptor, reassemble_dual_view, dual_view_of
from .ramsey import RigidSurjection, is_rigid
from .systems import automorphism_factors

log = logging.getLogger(__name__)

CLASSES = ("CQ", "TPCQ")
FIELDS = ("real", "complex")
NORM_MARGIN = 1e-9
UNITARY_NET_CAP = 50_000
SDP_NORM_MARGIN = 1e-7

__all__ = [
    "UnitaryNet",
    "NetP",
    "NetQ",
    "NetPair",
    "build_nets",
    "unitary_grid",
    "encode_alpha",
    "alpha_from_columns",
    "construct_tau",
    "TauResult",
    "random_column",
    "random_class_map",
    "column_map",
    "column_bound",
    "comparison_norm",
]


# -- entry and column helpers ------------------------------------------


def realign(entry: np.ndarray, s: int, q: int) -> np.ndarray:
    """Rearrange a row-major entry matrix so ``kron(u, v.T)`` becomes rank one."""
    e = np.asarray(entry)
    return e.reshape(s, q, s, q).transpose(0, 2, 1, 3).reshape(s * s, q * q)


def entry_bound(entries: np.ndarray, s: int, q: int) -> np.ndarray:
    """Realignment trace norms of a stack ``(..., t, t)`` of entries."""
    e = np.asarray(entries)
    lead = e.shape[:-2]
    r = e.reshape(lead + (s, q, s, q)).swapaxes(-3, -2).reshape(lead + (s * s, q * q))
    return np.linalg.svd(r, compute_uv=False).sum(axis=-1)


def column_bound(col: np.ndarray, s: int, q: int) -> float:
    """Upper bound for the cb norm of a column (exact when q = s = 1)."""
    col = np.asarray(col)
    if s == q == 1:
        return float(np.abs(col).sum())
    return float(haagerup_bound(col, s, q))


def column_map(col: np.ndarray, s: int, q: int) -> BlockLinearMap:
    """The column as a map ``T_{s,q} -> ℓ_1^d(T_{s,q})``."""
    d, t, _ = col.shape
    dom = SpaceDescriptor.ell_one(1, s, q)
    cod = SpaceDescriptor.ell_one(d, s, q)
    return BlockLinearMap(dom, cod, np.asarray(col, dtype=complex).reshape(d * t, t))


def column_cb(col: np.ndarray, s: int, q: int) -> float:
    if s == q == 1:
        return float(np.abs(col).sum())
    if not np.any(col):
        return 0.0
    return trace_class_cb(column_map(col, s, q))


def column_distance(a: np.ndarray, b: np.ndarray, s: int, q: int, exact_above: Optional[float] = None) -> float:
    """Cb distance bound; refined by the SDP when it exceeds ``exact_above``."""
    diff = np.asarray(a) - np.asarray(b)
    bound = column_bound(diff, s, q)
    if exact_above is not None and bound > exact_above and not s == q == 1:
        return column_cb(diff, s, q)
    return bound


def _dual_unit(entry: np.ndarray, q: int) -> np.ndarray:
    """``v*(1)`` for an entry v on T_q under the trace pairing."""
    row = np.eye(q).ravel() @ entry
    return row.reshape(q, q).T


def comparison_norm(class_tag: str, col: np.ndarray, s: int, q: int) -> float:
    """The norm that orders P: cb norm (CQ) or cb norm of the first d-1 rows (TPCQ)."""
    if class_tag == "CQ":
        return column_cb(col, s, q)
    head = col[:-1]
    if not np.any(head):
        return 0.0
    # A CP map into ℓ_1^{d-1}(T_q) has cb norm ‖Σ v_j*(1)‖.
    x = sum(_dual_unit(e, q) for e in head)
    return float(np.linalg.norm((x + x.conj().T) / 2, 2))


def _serial_key(col: np.ndarray) -> tuple:
    c = np.round(np.asarray(col, dtype=complex).ravel(), 12) + 0.0
    return tuple(np.concatenate([c.real, c.imag]).tolist())


def automorphism_matrix(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-major matrix of ``a ↦ u a v`` on s x q matrices."""
    return np.kron(u, np.asarray(v).T)


def conjugation_matrix(u: np.ndarray) -> np.ndarray:
    """Row-major matrix of ``a ↦ u a u*``."""
    return np.kron(u, u.conj())


# -- unitary grids --------------------------------------------------------


def _phase_count(eps: float) -> int:
    if eps >= 2:
        return 1
    return max(1, math.ceil(math.pi / (2 * math.asin(eps / 2))))


def _su2_grid(eps: float, mod_sign: bool) -> list[np.ndarray]:
    """SU(2) points within operator distance eps of every element.

    Unit quaternions are sampled on the faces of the cube [-1, 1]^4 with an
    even number k of cells per edge and projected radially; the projection
    is 1-Lipschitz outside the unit ball and ``‖u - u'‖ = |x - x'|``.
    """
    k = max(2, math.ceil(2 * math.sqrt(3) / eps))
    k += k % 2
    ticks = np.linspace(-1, 1, k + 1)
    pts = set()
    for axis in range(4):
        for sign in (1.0, -1.0):
            for rest in itertools.product(ticks, repeat=3):
                x = list(rest)
                x.insert(axis, sign)
                x = np.array(x) / np.linalg.norm(x)
                if mod_sign:
                    nz = x[np.flatnonzero(np.abs(x) > 1e-12)[0]]
                    x = x * np.sign(nz)
                pts.add(tuple(np.round(x, 12)))
    out = []
    for a, b, c, d in sorted(pts, key=lambda p: (p != (1.0, 0.0, 0.0, 0.0), p)):
        out.append(np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]]))
    return out


def unitary_grid(n: int, eps: float, field: str = "complex", special: bool = False) -> list[np.ndarray]:
    """An eps-dense finite subset of U(n) or O(n) containing the identity.

    ``special`` drops the global phase (SU(2) or SO(2) with reflections kept
    in the real case), which is enough when a phase can be moved elsewhere.
    """
    if eps <= 0:
        raise PreconditionError("grid resolution must be positive")
    if field not in FIELDS:
        raise PreconditionError(f"unknown field {field!r}")
    if eps >= 2:
        # Every pair of unitaries is within distance 2.
        return [np.eye(n, dtype=complex)]
    if n == 1:
        if special:
            return [np.eye(1, dtype=complex)]
        if field == "real":
            return [np.eye(1, dtype=complex), -np.eye(1, dtype=complex)]
        k = _phase_count(eps)
        return [np.exp(2j * np.pi * j / k) * np.eye(1) for j in range(k)]
    if n != 2:
        raise PreconditionError("unitary nets are implemented for block sizes up to 2")
    if field == "real":
        k = _phase_count(eps)
        out = []
        for refl in (False, True):
            for j in range(k):
                th = 2 * np.pi * j / k
                r = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]], dtype=complex)
                out.append(r @ np.diag([1, -1]) if refl else r)
        return out
    if special:
        return _su2_grid(eps, mod_sign=False)
    phases = unitary_grid(1, eps / 2, "complex")
    return [ph[0, 0] * u for ph in phases for u in _su2_grid(eps / 2, mod_sign=False)]


@dataclass
class UnitaryNet:
    """Automorphisms of T_{s,q} drawn from unitary grids; index 0 is the identity."""

    class_tag: str
    s: int
    q: int
    eps0: float
    field: str
    matrices: np.ndarray  # (K, t, t)

    @classmethod
    def build(cls, class_tag: str, s: int, q: int, eps0: float, field: str) -> "UnitaryNet":
        mats: list[np.ndarray] = []
        if class_tag == "TPCQ":
            if field == "real" and q == 2:
                grid = unitary_grid(2, eps0 / 2, "real")
            elif q == 1:
                grid = [np.eye(1, dtype=complex)]
            else:
                grid = _su2_grid(eps0 / 2, mod_sign=True) if q == 2 else unitary_grid(q, eps0 / 2, field)
            mats = [conjugation_matrix(u) for u in grid]
        else:
            share = eps0 if q == 1 or s == 1 else eps0 / 2
            us = unitary_grid(s, share, field)
            vs = unitary_grid(q, share, field, special=True)
            if len(us) * len(vs) > UNITARY_NET_CAP:
                raise BudgetError(
                    f"automorphism net would have {len(us) * len(vs)} elements; increase eps0"
                )
            mats = [automorphism_matrix(u, v) for u in us for v in vs]
        t = s * q
        ident = np.eye(t, dtype=complex)
        seen, uniq = set(), [ident]
        seen.add(_serial_key(ident))
        for m in mats:
            key = _serial_key(m)
            if key not in seen:
                seen.add(key)
                uniq.append(m)
        return cls(class_tag, s, q, eps0, field, np.array(uniq))

    def __len__(self) -> int:
        return len(self.matrices)

    def nearest(self, entry: np.ndarray) -> tuple[int, float]:
        if self.s == self.q == 1:
            dist = np.abs(self.matrices[:, 0, 0] - entry[0, 0])
        else:
            dist = haagerup_bound((self.matrices - entry[None])[:, None], self.s, self.q)
        k = int(np.argmin(dist))
        return k, float(dist[k])


# -- nets -------------------------------------------------------------------


@dataclass
class NetP:
    """A finite, ordered net of admissible columns.

    Members are sorted by comparison norm, ties broken by serialized entries.
    For CQ index 0 is the zero column. ``pinned`` marks TPCQ members whose
    first d-1 rows vanish.
    """

    class_tag: str
    d: int
    q: int
    s: int
    eps: float
    field: str
    members: np.ndarray  # (P, d, t, t)
    norms: np.ndarray
    density_defect: float = 0.0
    construction: str = "lattice"
    _lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        keys = [_serial_key(c) for c in self.members]
        order = sorted(range(len(keys)), key=lambda i: (round(float(self.norms[i]), 12), keys[i]))
        self.members = self.members[order]
        self.norms = np.asarray(self.norms, dtype=float)[order]
        self._lookup = {keys[i]: j for j, i in enumerate(order)}

    def __len__(self) -> int:
        return len(self.members)

    @property
    def t(self) -> int:
        return self.s * self.q

    @property
    def pinned(self) -> np.ndarray:
        if self.class_tag != "TPCQ":
            return np.zeros(len(self), dtype=bool)
        return ~np.any(self.members[:, :-1] != 0, axis=(1, 2, 3))

    @property
    def zero_index(self) -> Optional[int]:
        return 0 if self.class_tag == "CQ" else None

    def index_of(self, col: np.ndarray) -> int:
        key = _serial_key(col)
        if key not in self._lookup:
            raise KeyError("column is not a member of the net")
        return self._lookup[key]

    def embedding(self, i: int) -> np.ndarray:
        col = np.zeros((self.d, self.t, self.t), dtype=complex)
        col[i] = np.eye(self.t)
        return col

    def column_map(self, i: int) -> BlockLinearMap:
        return column_map(self.members[i], self.s, self.q)

    def summary(self) -> dict[str, Any]:
        return {
            "class": self.class_tag,
            "d": self.d,
            "q": self.q,
            "s": self.s,
            "eps": self.eps,
            "field": self.field,
            "size": len(self),
            "density_defect": None if math.isnan(self.density_defect) else self.density_defect,
            "verified": not math.isnan(self.density_defect),
            "construction": self.construction,
        }


@dataclass
class NetQ:
    """Structured m x d matrices with entries from a unitary net, indexed lazily.

    A member is an injection ``j: d -> m`` (column i has its only nonzero
    entry in row j(i)) together with one automorphism index per free column.
    Members are ordered lexicographically by (injection, automorphism
    indices); for TPCQ the last column is pinned to ``Id`` in the last row.
    """

    class_tag: str
    d: int
    m: int
    q: int
    s: int
    eps0: float
    U: UnitaryNet
    injections: list[tuple[int, ...]]

    @classmethod
    def build(cls, class_tag: str, d: int, m: int, U: UnitaryNet) -> "NetQ":
        if class_tag == "TPCQ":
            inj = [p + (m - 1,) for p in itertools.permutations(range(m - 1), d - 1)]
        else:
            inj = list(itertools.permutations(range(m), d))
        if not inj:
            raise PreconditionError("need m >= d for quotient maps onto ℓ_1^d")
        return cls(class_tag, d, m, U.q, U.s, U.eps0, U, inj)

    @property
    def free(self) -> int:
        return self.d - 1 if self.class_tag == "TPCQ" else self.d

    def __len__(self) -> int:
        return len(self.injections) * len(self.U) ** self.free

    def decode(self, idx: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        if not 0 <= idx < len(self):
            raise IndexError(idx)
        k = len(self.U)
        per = k ** self.free
        inj, rest = divmod(idx, per)
        us = []
        for _ in range(self.free):
            rest, r = divmod(rest, k)
            us.append(r)
        return self.injections[inj], tuple(reversed(us))

    def encode(self, injection: Sequence[int], us: Sequence[int]) -> int:
        inj = self.injections.index(tuple(injection))
        k = len(self.U)
        idx = 0
        for u in us[: self.free]:
            idx = idx * k + int(u)
        return inj * k ** self.free + idx

    def matrix(self, idx: int) -> np.ndarray:
        inj, us = self.decode(idx)
        t = self.s * self.q
        out = np.zeros((self.m, self.d, t, t), dtype=complex)
        for i, row in enumerate(inj):
            out[row, i] = self.U.matrices[us[i]] if i < self.free else np.eye(t)
        return out

    def summary(self) -> dict[str, Any]:
        return {"class": self.class_tag, "d": self.d, "m": self.m, "unitary_net": len(self.U), "size": len(self)}


@dataclass
class NetPair:
    P: NetP
    Q: NetQ

    def antilex_index(self, q_idx: int, p_idx: int) -> int:
        """Position of (B, w) in the antilexicographic order (P compared first)."""
        return p_idx * len(self.Q) + q_idx

    def antilex_pair(self, k: int) -> tuple[int, int]:
        p_idx, q_idx = divmod(k, len(self.Q))
        return q_idx, p_idx


# -- sampling admissible columns ------------------------------------------


def _random_unitary(n: int, field: str, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        if field == "real":
            return np.array([[rng.choice([-1.0, 1.0])]], dtype=complex)
        return np.exp(2j * np.pi * rng.random()) * np.eye(1)
    if field == "real":
        return ortho_group.rvs(n, random_state=rng).astype(complex)
    return unitary_group.rvs(n, random_state=rng)


def random_column(
    class_tag: str, d: int, s: int, q: int, field: str, rng: np.random.Generator, sparse: float = 0.3
) -> np.ndarray:
    """A random admissible column (complete contraction, or TP CP column)."""
    t = s * q
    keep = rng.random(d) >= sparse
    if not keep.any():
        keep[rng.integers(d)] = True
    if class_tag == "TPCQ":
        if q == 1:
            w = rng.exponential(size=d) * keep
            if rng.random() < 0.2:
                w = w * rng.random(d) ** 4
                w[-1] += 1e-3
            return (w / w.sum()).reshape(d, 1, 1).astype(complex)
        r = 2
        g = rng.standard_normal((d * r * q, q))
        if field == "complex":
            g = g + 1j * rng.standard_normal((d * r * q, q))
        g = g.reshape(d, r * q, q) * keep[:, None, None]
        iso, _ = np.linalg.qr(g.reshape(d * r * q, q))
        kr = iso.reshape(d, r, q, q)
        col = np.zeros((d, t, t), dtype=complex)
        for i in range(d):
            for k in kr[i]:
                col[i] += np.kron(k, k.conj())
        return col
    g = rng.standard_normal((d, t, t))
    if field == "complex":
        g = g + 1j * rng.standard_normal((d, t, t))
    g = g * keep[:, None, None]
    nrm = column_cb(g, s, q)
    radius = rng.random() ** (1.0 / max(1, d)) if rng.random() < 0.8 else 1.0
    return g / nrm * radius


def random_class_map(
    class_tag: str, d: int, m: int, s: int, q: int, field: str, rng: np.random.Generator
) -> BlockLinearMap:
    """A random CQ or TPCQ map ``ℓ_1^m(T_{s,q}) -> ℓ_1^d(T_{s,q})`` with its block view."""
    if class_tag not in CLASSES:
        raise PreconditionError(f"unknown class {class_tag!r}")
    if m < d:
        raise PreconditionError("a quotient onto ℓ_1^d needs m >= d")
    t = s * q
    dv = np.zeros((d, m, t, t), dtype=complex)
    if class_tag == "TPCQ":
        if s != q:
            raise PreconditionError("TPCQ needs square blocks")
        rows = list(rng.permutation(m - 1)[: d - 1]) + [m - 1]
    else:
        rows = list(rng.permutation(m)[:d])
    for i, j in enumerate(rows):
        if class_tag == "TPCQ":
            dv[i, j] = np.eye(t) if i == d - 1 else conjugation_matrix(_random_unitary(q, field, rng))
        else:
            dv[i, j] = automorphism_matrix(_random_unitary(s, field, rng), _random_unitary(q, field, rng))
    for j in range(m):
        if j not in rows:
            if class_tag == "CQ" and rng.random() < 0.2:
                continue
            dv[:, j] = random_column(class_tag, d, s, q, field, rng)
    dom = SpaceDescriptor.ell_one(m, s, q)
    cod = SpaceDescriptor.ell_one(d, s, q)
    return BlockLinearMap(dom, cod, reassemble_dual_view(dv), dv)


# -- P construction ---------------------------------------------------------


def _lattice_cq(d: int, eps: float, field: str) -> tuple[np.ndarray, float]:
    c = 1.0 if field == "real" else math.sqrt(2)
    n = math.floor(d * c / eps) + 1
    h = 1.0 / n
    rng = range(-n, n + 1)
    if field == "real":
        pts = [z for z in itertools.product(rng, repeat=d) if sum(abs(x) for x in z) <= n]
        arr = np.array(pts, dtype=complex) * h
    else:
        pts = []
        for z in itertools.product(rng, repeat=2 * d):
            zz = np.array(z[:d]) + 1j * np.array(z[d:])
            if np.abs(zz).sum() <= n + 1e-9:
                pts.append(zz)
        arr = np.array(pts) * h
    return arr.reshape(-1, d, 1, 1), d * c * h


def _lattice_tpcq(d: int, eps: float) -> tuple[np.ndarray, float]:
    n = math.floor(2 * (d - 1) / eps) + 1
    pts = [z + (n - sum(z),) for z in itertools.product(range(n + 1), repeat=d - 1) if sum(z) <= n]
    return (np.array(pts, dtype=complex) / n).reshape(-1, d, 1, 1), 2 * (d - 1) / n


@dataclass
class _Cover:
    ok: bool
    distance: float
    index: Optional[int]
    fallback: bool


def _cover(
    P: NetP, v: np.ndarray, norm_v: float, eps: float, exclude_zero_norm: bool = True
) -> _Cover:
    """Net member τ would choose for a column v (without the B = A† rule).

    Distances are realignment bounds, so a reported cover is always valid.
    """
    s, q = P.s, P.q
    exact = s == q == 1
    margin = NORM_MARGIN if exact or P.class_tag == "TPCQ" else SDP_NORM_MARGIN
    if exact:
        dist = np.abs(P.members[:, :, 0, 0] - v[None, :, 0, 0]).sum(axis=1)
    else:
        dist = haagerup_bound(P.members - v[None], s, q)
    if P.class_tag == "CQ":
        cand = (P.norms > 0) & (P.norms < norm_v - margin)
        fallback_mask = P.norms == 0
    else:
        pinned = P.pinned
        cand = ~pinned & (P.norms < norm_v - margin)
        fallback_mask = pinned
    for mask, is_fb in ((cand, False), (fallback_mask, True)):
        if not mask.any():
            continue
        idx = np.flatnonzero(mask)
        k = idx[np.argmin(dist[idx])]
        dk = float(dist[k])
        if dk < eps:
            return _Cover(True, dk, int(k), is_fb)
    return _Cover(False, math.inf, None, False)


def _check_density(P: NetP, samples: int, rng: np.random.Generator) -> float:
    worst = 0.0
    for _ in range(samples):
        v = random_column(P.class_tag, P.d, P.s, P.q, P.field, rng)
        c = _cover(P, v, comparison_norm(P.class_tag, v, P.s, P.q), P.eps)
        if not c.ok:
            raise NetConstructionError(
                f"net is not {P.eps}-dense: a sampled column has no admissible approximant", v
            )
        worst = max(worst, c.distance)
    return worst


def _greedy_members(
    class_tag: str, d: int, s: int, q: int, eps: float, field: str, rng: np.random.Generator, patience: int, budget: int,
    strict: bool = True,
) -> tuple[list[np.ndarray], list[float]]:
    t = s * q
    members = []
    if class_tag == "CQ":
        members.append(np.zeros((d, t, t), dtype=complex))
    for i in range(d):
        col = np.zeros((d, t, t), dtype=complex)
        col[i] = np.eye(t)
        members.append(col)
    streak, draws = 0, 0
    norms: list[float] = []
    while streak < patience:
        draws += 1
        if draws > budget:
            if not strict:
                break
            raise NetConstructionError(f"greedy net construction did not reach {eps}-density within {budget} samples")
        if len(norms) < len(members):
            norms.extend(comparison_norm(class_tag, c, s, q) for c in members[len(norms):])
            P = NetP(class_tag, d, q, s, eps, field, np.array(members), np.array(norms), construction="greedy")
        v = random_column(class_tag, d, s, q, field, rng)
        r = comparison_norm(class_tag, v, s, q)
        if _cover(P, v, r, eps).ok:
            streak += 1
            continue
        streak = 0
        if class_tag == "CQ":
            shrink = min(0.5, eps / 2 / max(column_bound(v, s, q), 1e-300))
            members.append(v * (1 - shrink))
        elif r > 0:
            head_bound = column_bound(v[:-1], s, q)
            c = min(0.5, eps / 4 / max(head_bound, 1e-300))
            w = v.copy()
            w[:-1] *= 1 - c
            w[-1] = v[-1] + c * v[:-1].sum(axis=0)
            members.append(w)
            if r < eps:
                members.append(np.concatenate([np.zeros_like(v[:-1]), v.sum(axis=0)[None]]))
        else:
            members.append(v)
    return members, norms


def build_nets(
    class_tag: str,
    d: int,
    m: int,
    q: int,
    s: Optional[int] = None,
    eps: float = 0.15,
    eps0: float = 0.05,
    seed: int = 0,
    field: str = "real",
    verify_samples: int = 1000,
    patience: int = 40,
    budget: int = 4000,
) -> NetPair:
    """Build the nets P and Q for a class.

    For ``q = s = 1`` P is a lattice with a proven covering radius below
    eps. Otherwise it is grown greedily from the zero column and the
    coordinate embeddings by adding norm-shrunk copies of uncovered samples.
    Either way density is verified on ``verify_samples`` fresh samples.
    """
    if class_tag not in CLASSES:
        raise PreconditionError(f"unknown class {class_tag!r}")
    if field not in FIELDS:
        raise PreconditionError(f"unknown field {field!r}")
    s = q if s is None else s
    if class_tag == "TPCQ" and s != q:
        raise PreconditionError("TPCQ nets need s = q")
    if eps <= 0 or eps0 <= 0:
        raise PreconditionError("eps and eps0 must be positive")
    if min(d, m, q, s) < 1:
        raise PreconditionError("d, m, q, s must be positive")
    if eps0 > eps:
        raise NetResolutionError("eps0 must not exceed eps (A† must be eps-close)")
    rng = np.random.default_rng(seed)
    if s == q == 1:
        if class_tag == "CQ":
            members, radius = _lattice_cq(d, eps, field)
        else:
            members, radius = _lattice_tpcq(d, eps)
        construction = "lattice"
    else:
        members, norms = _greedy_members(
            class_tag, d, s, q, eps, field, rng, patience, budget, strict=verify_samples > 0
        )
        members = np.array(members)
        norms.extend(comparison_norm(class_tag, c, s, q) for c in members[len(norms):])
        construction = "greedy"
    if construction == "lattice":
        norms = [comparison_norm(class_tag, c, s, q) for c in members]
    norms = np.array(norms)
    P = NetP(class_tag, d, q, s, eps, field, members, norms, construction=construction)
    # verify_samples = 0 leaves the net unverified (density_defect is NaN).
    P.density_defect = _check_density(P, verify_samples, rng) if verify_samples > 0 else math.nan
    U = UnitaryNet.build(class_tag, s, q, eps0, field)
    return NetPair(P, NetQ.build(class_tag, d, m, U))


# -- α encodings -----------------------------------------------------------


def alpha_from_columns(columns: Sequence[np.ndarray], class_tag: str, s: int, q: int) -> BlockLinearMap:
    """The block matrix with the given columns (plus the pinned column for TPCQ)."""
    cols = [np.asarray(c, dtype=complex) for c in columns]
    rows, t = cols[0].shape[0], s * q
    if class_tag == "TPCQ":
        pin = np.zeros((rows, t, t), dtype=complex)
        pin[-1] = np.eye(t)
        cols.append(pin)
    dv = np.stack(cols, axis=1)
    dom = SpaceDescriptor.ell_one(len(cols), s, q)
    cod = SpaceDescriptor.ell_one(rows, s, q)
    return BlockLinearMap(dom, cod, reassemble_dual_view(dv), dv)


def apply_q(B: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Column ``B w`` for a Q member (m, d, t, t) and a column (d, t, t)."""
    return np.einsum("kjab,jbc->kac", B, w)


def encode_alpha(values: Sequence[int], nets: NetPair, over: str = "P") -> BlockLinearMap:
    """α for a rigid surjection ``n -> P`` or ``n -> Q × P`` (antilex indices)."""
    P, Q = nets.P, nets.Q
    if over == "P":
        size = len(P)
    elif over == "QxP":
        size = len(P) * len(Q)
    else:
        raise PreconditionError("over must be 'P' or 'QxP'")
    if not is_rigid(values, size):
        raise RigidityError(f"tuple is not a rigid surjection onto a net of size {size}")
    if over == "P":
        cols = [P.members[v] for v in values]
    else:
        cache: dict[int, np.ndarray] = {}
        cols = []
        for k in values:
            qi, pi = nets.antilex_pair(k)
            if qi not in cache:
                cache[qi] = Q.matrix(qi)
            cols.append(apply_q(cache[qi], P.members[pi]))
    return alpha_from_columns(cols, P.class_tag, P.s, P.q)


# -- τ ------------------------------------------------------------------------


@dataclass
class TauResult:
    tau: RigidSurjection
    defect: float
    a_dagger: int
    a_dagger_defect: float
    snap_distance: float
    fallbacks: int
    nets: NetPair = field(repr=False)

    def __call__(self, q_idx: int, p_idx: int) -> int:
        return self.tau(self.nets.antilex_index(q_idx, p_idx))

    def preimage_min(self, p_idx: int) -> tuple[int, int]:
        k = self.tau.values.index(p_idx)
        return self.nets.antilex_pair(k)

    def to_json(self) -> dict[str, Any]:
        return {
            "tau_size": self.tau.domain_size,
            "net_size": self.tau.codomain_size,
            "defect": self.defect,
            "a_dagger": self.a_dagger,
            "a_dagger_defect": self.a_dagger_defect,
            "snap_distance": self.snap_distance,
            "fallbacks": self.fallbacks,
            "rigid": True,
        }


def find_a_dagger(A: np.ndarray, Q: NetQ, eps: float, tol: float = 1e-8) -> tuple[int, float]:
    """The Q member A† with ``A A†`` entrywise closest to the identity."""
    d, m, t, _ = A.shape
    s, q = Q.s, Q.q
    inj, us, worst = [], [], 0.0
    used = set()
    for i in range(d):
        pick = None
        cands = [m - 1] if Q.class_tag == "TPCQ" and i == d - 1 else range(m)
        for j in cands:
            if j in used or not np.any(A[i, j]) or np.count_nonzero(np.any(A[:, j] != 0, axis=(1, 2))) != 1:
                continue
            if automorphism_factors(A[i, j], s, q, 1e-6) is not None:
                pick = j
                break
        if pick is None:
            raise PreconditionError(f"row {i} of the representative matrix has no automorphism entry")
        used.add(pick)
        inj.append(pick)
        inv = np.linalg.inv(A[i, pick])
        if Q.class_tag == "TPCQ" and i == d - 1:
            us.append(0)
            err = column_bound((A[i, pick] - np.eye(t))[None], s, q)
        else:
            k, _ = Q.U.nearest(inv)
            us.append(k)
            err = column_bound((A[i, pick] @ Q.U.matrices[k] - np.eye(t))[None], s, q)
            if err > eps and not s == q == 1:
                err = column_cb((A[i, pick] @ Q.U.matrices[k] - np.eye(t))[None], s, q)
        worst = max(worst, err)
    if Q.class_tag == "TPCQ" and inj[-1] != m - 1:
        raise PreconditionError("TPCQ representative matrix must have the pinned last column")
    if worst > eps + tol:
        raise NetResolutionError(f"no A† within {eps}: best ‖AA† - Id‖ = {worst:.3g}")
    return Q.encode(inj, us), worst


def construct_tau(rho: BlockLinearMap, nets: NetPair, eps: Optional[float] = None) -> TauResult:
    """Build the rigid surjection ``τ: Q × P -> P`` approximating ``(B, w) ↦ A B w``.

    ``τ(B, w) = w`` when ``B = A†``. Otherwise τ picks the nearest member with
    strictly smaller comparison norm within eps of ``ABw`` (nonzero, resp.
    with nonzero first d-1 rows for TPCQ). When no such member exists the
    column is below net resolution and snaps to zero (CQ) or to the nearest
    pinned member (TPCQ). Zero columns map to zero.
    """
    P, Q = nets.P, nets.Q
    eps = P.eps if eps is None else eps
    if eps < P.eps - 1e-12:
        raise NetResolutionError(f"eps = {eps} is finer than the net resolution {P.eps}")
    d, m = Q.d, Q.m
    s, q = P.s, P.q
    if rho.domain.blocks != ((s, q),) * m or rho.codomain.blocks != ((s, q),) * d:
        raise PreconditionError("rho must map ℓ_1^m(T_{s,q}) to ℓ_1^d(T_{s,q}) for the nets' sizes")
    A = rho.dual_view if rho.dual_view is not None else dual_view_of(rho.action, d, m)
    a_dag, a_dag_defect = find_a_dagger(A, Q, eps)
    nq, np_ = len(Q), len(P)
    values = np.empty(nq * np_, dtype=np.int64)
    defect, snap, fallbacks = 0.0, 0.0, 0
    norm_cache: dict[tuple, float] = {}
    for qi in range(nq):
        B = Q.matrix(qi)
        AB = np.einsum("ikab,kjbc->ijac", A, B)
        for pi in range(np_):
            k = pi * nq + qi
            w = P.members[pi]
            if P.class_tag == "CQ" and pi == 0:
                values[k] = 0
                continue
            v = np.einsum("ijab,jbc->iac", AB, w)
            if qi == a_dag:
                values[k] = pi
                dist = column_distance(w, v, s, q, exact_above=eps)
            else:
                key = _serial_key(v)
                if key not in norm_cache:
                    norm_cache[key] = comparison_norm(P.class_tag, v, s, q)
                c = _cover(P, v, norm_cache[key], eps)
                if not c.ok:
                    raise NetResolutionError(f"no net member within {eps} of A B w for (B, w) = ({qi}, {pi})")
                values[k] = c.index
                dist = c.distance
                if c.fallback:
                    fallbacks += 1
                    snap = max(snap, dist)
            defect = max(defect, dist)
    vals = tuple(int(x) for x in values)
    if not is_rigid(vals, np_):
        raise ConsistencyError("τ is not a rigid surjection")
    tau = RigidSurjection(vals, np_)
    res = TauResult(tau, defect, a_dag, a_dag_defect, snap, fallbacks, nets)
    pinned = P.pinned
    for pi in range(np_):
        if (P.class_tag == "CQ" and pi == 0) or pinned[pi]:
            continue
        if res.preimage_min(pi) != (a_dag, pi):
            raise ConsistencyError(f"min τ⁻¹({pi}) is not (A†, {pi})")
    return res
