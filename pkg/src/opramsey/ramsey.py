"""Rigid surjections, Stirling counts and dual Ramsey instance search.

A rigid surjection from ``n = {0..n-1}`` onto ``k`` is a surjection whose
preimage minima increase with the target. As value sequences these are the
restricted-growth strings: ``values[0] == 0`` and every prefix maximum grows
by at most one per step.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterator, Optional, Sequence


from .errors import BudgetError, PreconditionError, RigidityError, ShapeError

log = logging.getLogger(__name__)

DRT_CAP = 5_000_000

__all__ = [
    "RigidSurjection",
    "is_rigid",
    "stirling",
    "iter_epi",
    "enumerate_epi",
    "compose_epi",
    "ColoringSpec",
    "DrtResult",
    "drt_search",
]


def is_rigid(values: Sequence[int], k: int) -> bool:
    """True when ``values`` is a rigid surjection onto ``{0..k-1}``."""
    top = -1
    for v in values:
        if v < 0 or v > top + 1:
            return False
        top = max(top, v)
    return top == k - 1


@dataclass(frozen=True)
class RigidSurjection:
    values: tuple[int, ...]
    codomain_size: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if self.codomain_size < 0:
            raise PreconditionError("codomain size must be nonnegative")
        if not is_rigid(self.values, self.codomain_size):
            raise RigidityError(
                f"{list(self.values)} is not a rigid surjection onto {self.codomain_size}"
            )

    @classmethod
    def identity(cls, n: int) -> "RigidSurjection":
        return cls(tuple(range(n)), n)

    @property
    def domain_size(self) -> int:
        return len(self.values)

    def __call__(self, i: int) -> int:
        return self.values[i]

    def first_occurrences(self) -> list[int]:
        first: dict[int, int] = {}
        for i, v in enumerate(self.values):
            first.setdefault(v, i)
        return [first[j] for j in range(self.codomain_size)]

    def __str__(self) -> str:
        if self.codomain_size <= 10:
            return "".join(str(v) for v in self.values)
        return ",".join(str(v) for v in self.values)

    def to_json(self) -> dict[str, Any]:
        return {"domain_size": self.domain_size, "codomain_size": self.codomain_size, "values": list(self.values)}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RigidSurjection":
        return cls(tuple(obj["values"]), int(obj["codomain_size"]))


@lru_cache(maxsize=None)
def stirling(n: int, k: int) -> int:
    """Stirling numbers of the second kind by the standard recurrence."""
    if n < 0 or k < 0:
        raise PreconditionError("n and k must be nonnegative")
    if n == k:
        return 1
    if n == 0 or k == 0 or k > n:
        return 0
    return k * stirling(n - 1, k) + stirling(n - 1, k - 1)


def iter_epi(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """Rigid surjections ``n -> k`` as value tuples, in lexicographic order."""
    if n < 0 or k < 0:
        raise PreconditionError("n and k must be nonnegative")
    if k > n or (k == 0) != (n == 0):
        return
    vals = [0] * n

    def rec(i: int, top: int) -> Iterator[tuple[int, ...]]:
        # top = current prefix maximum; k - 1 - top new values still needed.
        if i == n:
            if top == k - 1:
                yield tuple(vals)
            return
        remaining = n - i
        for v in range(0, min(top + 1, k - 1) + 1):
            new_top = max(top, v)
            if k - 1 - new_top > remaining - 1:
                continue
            vals[i] = v
            yield from rec(i + 1, new_top)

    if n == 0:
        yield ()
        return
    yield from rec(1, 0)


def enumerate_epi(n: int, k: int) -> list[RigidSurjection]:
    return [RigidSurjection(v, k) for v in iter_epi(n, k)]


def compose_epi(outer: RigidSurjection, inner: RigidSurjection) -> RigidSurjection:
    """``outer ∘ inner``: first apply ``inner``, then ``outer``."""
    if inner.codomain_size != outer.domain_size:
        raise ShapeError(
            f"cannot compose: inner maps onto {inner.codomain_size}, outer is defined on {outer.domain_size}"
        )
    return RigidSurjection(tuple(outer.values[v] for v in inner.values), outer.codomain_size)


# -- colorings ------------------------------------------------------------


def _seeded_hash(values: Sequence[int], seed: int) -> int:
    h = hashlib.blake2b(digest_size=8, key=int(seed).to_bytes(8, "little", signed=False))
    h.update(bytes(str(list(values)), "ascii"))
    return int.from_bytes(h.digest(), "little")


DISCRETE_RULES: dict[str, Callable[[tuple[int, ...], int, int], int]] = {
    "constant": lambda v, r, seed: 0,
    "parity_preimage0": lambda v, r, seed: sum(1 for x in v if x == 0) % 2 % r,
    "preimage0_mod": lambda v, r, seed: sum(1 for x in v if x == 0) % r,
    "last_value_mod": lambda v, r, seed: v[-1] % r if v else 0,
    "hash": lambda v, r, seed: _seeded_hash(v, seed) % r,
}


@dataclass
class ColoringSpec:
    """A coloring of rigid surjections (discrete) or of maps (lipschitz).

    Discrete colorings take either a named rule or a lookup table indexed by
    the lexicographic enumeration index of ``Epi(n, R)``. The lipschitz form
    is ``c(φ) = min(1, min_ref d_cb(φ, ref))``, which is 1-Lipschitz in the
    cb distance by construction.
    """

    kind: str
    r: int = 1
    rule: Optional[str] = None
    table: Optional[list[int]] = None
    refs: list[Any] = field(default_factory=list)
    seed: int = 0
    _index: dict[tuple[int, ...], int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("discrete", "lipschitz"):
            raise PreconditionError(f"unknown coloring kind {self.kind!r}")
        if self.kind == "discrete":
            if self.r < 1:
                raise PreconditionError("r must be positive")
            if self.table is None:
                rule = self.rule or "constant"
                if rule not in DISCRETE_RULES:
                    raise PreconditionError(f"unknown coloring rule {rule!r}")
                self.rule = rule
            elif any(not 0 <= c < self.r for c in self.table):
                raise PreconditionError("table colors must lie in 0..r-1")

    def color(self, f: RigidSurjection) -> int:
        if self.kind != "discrete":
            raise PreconditionError("color() needs a discrete coloring")
        if self.table is not None:
            if not self._index:
                self._index.update(
                    {v: i for i, v in enumerate(iter_epi(f.domain_size, f.codomain_size))}
                )
            i = self._index[f.values]
            if i >= len(self.table):
                raise PreconditionError("coloring table is shorter than Epi(n, R)")
            return int(self.table[i])
        return int(DISCRETE_RULES[self.rule](f.values, self.r, self.seed))

    def value(self, phi: Any) -> float:
        """Lipschitz coloring value of a map (a BlockLinearMap)."""
        if self.kind != "lipschitz":
            raise PreconditionError("value() needs a lipschitz coloring")
        from .cbnorm import cb_norm_value
        from .opspace import BlockLinearMap

        if not self.refs:
            return 1.0
        best = 1.0
        for ref in self.refs:
            diff = BlockLinearMap(phi.domain, phi.codomain, phi.action - ref.action)
            best = min(best, cb_norm_value(diff))
        return float(min(1.0, max(0.0, best)))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "seed": self.seed}
        if self.kind == "discrete":
            out["r"] = self.r
            if self.table is not None:
                out["table"] = list(self.table)
            else:
                out["rule"] = self.rule
        else:
            out["refs"] = [m.to_json() for m in self.refs]
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ColoringSpec":
        kind = obj.get("kind", "discrete")
        refs = []
        if kind == "lipschitz":
            from .opspace import BlockLinearMap

            refs = [BlockLinearMap.from_json(m) for m in obj.get("refs", [])]
        return cls(
            kind,
            int(obj.get("r", 1)),
            obj.get("rule"),
            obj.get("table"),
            refs,
            int(obj.get("seed", 0)),
        )


@dataclass
class DrtResult:
    gamma: Optional[RigidSurjection]
    color: Optional[int]
    checked: int

    def to_json(self) -> dict[str, Any]:
        return {
            "found": self.gamma is not None,
            "gamma": None if self.gamma is None else self.gamma.to_json(),
            "color": self.color,
            "checked": self.checked,
        }


def drt_search(
    n: int, r_size: int, s_size: int, coloring: ColoringSpec, cap: int = DRT_CAP
) -> DrtResult:
    """Find γ in Epi(n, S) with ``{σ ∘ γ : σ ∈ Epi(S, R)}`` monochromatic.

    The first witness in lexicographic order is returned, or none after an
    exhaustive scan.
    """
    if coloring.kind != "discrete":
        raise PreconditionError("drt_search needs a discrete coloring")
    if not 0 <= r_size <= s_size <= n:
        raise PreconditionError("need R_size <= S_size <= n")
    size = stirling(n, s_size)
    if size > cap:
        raise BudgetError(f"|Epi({n},{s_size})| = {size} exceeds the cap {cap}")
    sigmas = enumerate_epi(s_size, r_size)
    checked = 0
    for gv in iter_epi(n, s_size):
        checked += 1
        gamma = RigidSurjection(gv, s_size)
        colors = {coloring.color(compose_epi(sig, gamma)) for sig in sigmas}
        if len(colors) <= 1:
            c = colors.pop() if colors else None
            return DrtResult(gamma, c, checked)
    return DrtResult(None, None, checked)
