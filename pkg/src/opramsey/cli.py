"""Command-line front door: ``opramsey <module> <verb> [flags]``.

Flags that take structured input accept inline JSON or ``@path`` to a JSON
file. Spaces also accept short names: ``M2``, ``M2,3``, ``linf3``,
``linf2(M2)``, with an optional ``osy:`` prefix for operator systems.
Maps also accept ``{"builtin": "identity", "space": ...}`` and
``{"builtin": "transpose", "q": 2}``.

Every report is ``{"manifest": ..., "payload": ...}``. ``opramsey replay
REPORT`` reruns the recorded argv and checks that the payload bytes match.

Exit codes: 0 success, 1 internal error, 2 precondition error, 3 budget
exceeded, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import time
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .errors import BudgetError, OpRamseyError, PreconditionError, ShapeError
from .reporting import RunManifest, canonical_json, config_hash, emit_report, write_atomic

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INTERNAL, EXIT_PRECONDITION, EXIT_BUDGET, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


# -- argument decoding ---------------------------------------------------------


def load_arg(value: Any) -> Any:
    """Inline JSON, ``@file`` JSON, or the raw string if it is not JSON."""
    if not isinstance(value, str):
        return value
    text = value
    if value.startswith("@"):
        try:
            with open(value[1:], encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise PreconditionError(f"cannot read {value[1:]}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if value.startswith("@"):
            raise PreconditionError(f"{value[1:]} is not valid JSON")
        return value


_SPACE_RE = re.compile(r"^(?:(osy|osp):)?(?:linf(\d+)(?:\((M\d+(?:,\d+)?)\))?|(M\d+(?:,\d+)?))$", re.I)


def _matrix_shape(tok: str) -> tuple[int, int]:
    parts = tok[1:].split(",")
    q = int(parts[0])
    return q, int(parts[1]) if len(parts) > 1 else q


def parse_space(value: Any):
    from .opspace import SpaceDescriptor

    obj = load_arg(value)
    if isinstance(obj, dict):
        return SpaceDescriptor.from_json(obj)
    if not isinstance(obj, str):
        raise PreconditionError(f"cannot read a space from {value!r}")
    m = _SPACE_RE.match(obj.strip().replace(" ", ""))
    if not m:
        raise PreconditionError(f"cannot parse space {obj!r}")
    cat = "Osy" if (m.group(1) or "").lower() == "osy" else "Osp"
    if m.group(4):
        q, s = _matrix_shape(m.group(4))
        return SpaceDescriptor.matrices(q, s, category=cat)
    n = int(m.group(2))
    q, s = _matrix_shape(m.group(3)) if m.group(3) else (1, 1)
    return SpaceDescriptor.ell_inf(n, q, s, category=cat)


def parse_map(value: Any):
    from .cbnorm import transpose_map
    from .opspace import BlockLinearMap, identity_map

    obj = load_arg(value)
    if not isinstance(obj, dict):
        raise PreconditionError("a map must be a JSON object")
    builtin = obj.get("builtin")
    if builtin == "identity":
        return identity_map(parse_space(obj["space"]))
    if builtin == "transpose":
        return transpose_map(int(obj.get("q", 2)))
    if builtin is not None:
        raise PreconditionError(f"unknown builtin map {builtin!r}")
    return BlockLinearMap.from_json(obj)


def parse_matrix(value: Any) -> np.ndarray:
    from .linalg import matrix_from_json

    obj = load_arg(value)
    if isinstance(obj, dict):
        return matrix_from_json(obj)
    arr = np.array(obj, dtype=complex)
    if arr.ndim != 2:
        raise ShapeError("expected a 2-d matrix")
    return arr


# -- commands --------------------------------------------------------------------


def cmd_sdp_solve(a: argparse.Namespace) -> Any:
    from .sdp import SdpProblem, solve_sdp

    return solve_sdp(SdpProblem.from_json(load_arg(a.input)), sdp_tol=a.tol, max_iter=a.max_iter)


def cmd_cbnorm(a: argparse.Namespace) -> Any:
    from .cbnorm import cb_norm

    return cb_norm(parse_map(a.map), tol=a.tol, witness=not a.no_witness, seed=a.seed)


def cmd_choi(a: argparse.Namespace) -> Any:
    from .cbnorm import choi_and_cp
    from .linalg import matrix_to_json

    res = choi_and_cp(parse_map(a.map))
    if a.format == "csv":
        return res.choi
    return {"choi": matrix_to_json(res.choi), "is_cp": res.is_cp, "min_eig": res.min_eig}


def cmd_dualize(a: argparse.Namespace) -> Any:
    return parse_map(a.map).dualize()


def cmd_ucp_check(a: argparse.Namespace) -> Any:
    from .systems import is_ucp, trace_preservation_check, unit_residual

    f = parse_map(a.map)
    dual = f.dualize()
    tp = trace_preservation_check(dual, a.convention)
    return {
        "is_ucp": is_ucp(f),
        "unit_residual": unit_residual(f),
        "dual_trace_preserving": tp.ok,
        "dual_trace_residual": tp.residual,
        "convention": tp.convention,
    }


def cmd_perturb(a: argparse.Namespace) -> Any:
    from .systems import DensityState, perturb_ucp

    data = load_arg(a.data) if a.data else {}
    if not isinstance(data, dict):
        raise PreconditionError("--data must be a JSON object")
    psi_arg, phi_arg = a.psi or data.get("psi"), a.phi or data.get("phi")
    if psi_arg is None or phi_arg is None:
        raise UsageError("perturb needs psi and phi, via --data or --psi/--phi")
    psis = [parse_map(m) for m in load_arg(psi_arg)]
    phi = parse_map(phi_arg)
    q = phi.domain.blocks[0][0]
    state_arg = a.state or data.get("state")
    state = DensityState.of(parse_matrix(state_arg)) if state_arg else DensityState.maximally_mixed(q)
    res = perturb_ucp(psis, phi, state, a.eps)
    return {
        "psi_d": res.psi_d,
        "unitality_residual": res.unitality_residual,
        "distance": res.distance,
        "one_minus_y_psd": res.one_minus_y_psd,
        "is_cp": res.is_cp,
        "warning": res.warning,
    }


def cmd_epi_count(a: argparse.Namespace) -> Any:
    from .ramsey import stirling

    return {"count": stirling(a.n, a.k)}


def cmd_epi_list(a: argparse.Namespace) -> Any:
    from .ramsey import iter_epi, stirling

    total = stirling(a.n, a.k)
    if total > a.limit:
        raise BudgetError(f"|Epi({a.n},{a.k})| = {total} exceeds --limit {a.limit}")
    return {"count": total, "surjections": [list(v) for v in iter_epi(a.n, a.k)]}


def cmd_drt_search(a: argparse.Namespace) -> Any:
    from .ramsey import ColoringSpec, drt_search

    coloring = ColoringSpec.from_json(load_arg(a.coloring))
    return drt_search(a.n, a.r, a.s, coloring, cap=a.cap)


def _nets(a: argparse.Namespace):
    from .nets import build_nets

    return build_nets(
        a.cls, a.d, a.m, a.q, a.s, eps=a.eps, eps0=a.eps0, seed=a.seed, field=a.field,
        verify_samples=a.verify_samples,
    )


def cmd_nets_build(a: argparse.Namespace) -> Any:
    nets = _nets(a)
    return {"P": nets.P.summary(), "Q": nets.Q.summary()}


def cmd_alpha_encode(a: argparse.Namespace) -> Any:
    from .nets import encode_alpha
    from .systems import structure_check

    nets = _nets(a)
    alpha = encode_alpha(load_arg(a.values), nets, over=a.over)
    rep = structure_check(alpha, a.cls)
    return {"alpha": alpha, "structure": {"ok": rep.ok, "violations": rep.violations, "norm_residual": rep.norm_residual}}


def cmd_tau_demo(a: argparse.Namespace) -> Any:
    from .nets import construct_tau, random_class_map

    nets = _nets(a)
    rng = np.random.default_rng(a.seed)
    rho = random_class_map(a.cls, a.d, a.m, a.s or a.q, a.q, a.field, rng)
    tau = construct_tau(rho, nets, a.tau_eps)
    out = tau.to_json()
    out["rho"] = rho
    out["tau"] = list(tau.tau.values)
    return out


def _instance(a: argparse.Namespace, pointed: bool):
    from .fraisse import instance_from_spaces

    X, Y, Z = (parse_space(v) for v in (a.x, a.y, a.z))
    if a.cls == "Osy":
        from .opspace import SpaceDescriptor

        X, Y, Z = (SpaceDescriptor(sp.blocks, None, "Osy") for sp in (X, Y, Z))
    return instance_from_spaces(X, Y, Z, a.delta, np.random.default_rng(a.seed), pointed)


def cmd_amalgamate(a: argparse.Namespace) -> Any:
    from .fraisse import ClassConfig, amalgamate

    inst = _instance(a, False)
    w = amalgamate(inst.phi, inst.psi, ClassConfig(a.cls, eps=a.eps))
    return {"phi": inst.phi, "psi": inst.psi, "witness": w}


def cmd_amalgamate_pointed(a: argparse.Namespace) -> Any:
    from .fraisse import ClassConfig, amalgamate_pointed

    inst = _instance(a, True)
    Xp, Yp, Zp = inst.pointed
    w = amalgamate_pointed(Xp, Yp, Zp, inst.phi, inst.psi, cfg=ClassConfig(a.cls, True, a.eps))
    return {"phi": inst.phi, "psi": inst.psi, "s_X": Xp.s_map, "witness": w}


def cmd_ghdist(a: argparse.Namespace) -> Any:
    from .fraisse import distance_estimate

    X, Y = parse_space(a.x), parse_space(a.y)
    which = ("gh", "bm") if X.dim == Y.dim else ("gh",)
    return distance_estimate(X, Y, budget=a.budget, seed=a.seed, which=which)


def cmd_embnet(a: argparse.Namespace) -> Any:
    from .fraisse import emb_net

    net = emb_net(parse_space(a.x), parse_space(a.z), eps=a.eps, seed=a.seed, field=a.field, samples=a.samples)
    out = net.summary()
    out["first"] = [net.map(k) for k in range(min(a.show, len(net)))]
    return out


def cmd_arp_search(a: argparse.Namespace) -> Any:
    from .fraisse import arp_search
    from .ramsey import ColoringSpec

    cfg = load_arg(a.config)
    if not isinstance(cfg, dict):
        raise PreconditionError("--config must be a JSON object")
    try:
        X, Y, Z = (parse_space(cfg[k]) for k in ("x", "y", "z"))
    except KeyError as exc:
        raise PreconditionError(f"config is missing {exc}") from exc
    col = dict(cfg.get("coloring", {"kind": "discrete", "r": 1}))
    refs = [parse_map(r) for r in col.pop("refs", [])]
    coloring = ColoringSpec.from_json(col)
    coloring.refs = refs
    return arp_search(
        X, Y, Z, coloring,
        eps=float(cfg.get("eps", 0.1)),
        seed=int(cfg.get("seed", a.seed)),
        budget=int(cfg.get("budget", 50)),
        net_eps=float(cfg.get("net_eps", 0.5)),
        field=cfg.get("field", "complex"),
        samples=int(cfg.get("samples", 200)),
    )


# -- parser ------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="report path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)


def _net_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--class", dest="cls", choices=("CQ", "TPCQ"), default="CQ")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--eps", type=float, default=0.15)
    p.add_argument("--eps0", type=float, default=0.05)
    p.add_argument("--field", choices=("real", "complex"), default="real")
    p.add_argument("--verify-samples", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="opramsey", description="Operator-space Ramsey toolkit")
    root.add_argument("--version", action="version", version=f"opramsey {__version__}")
    sub = root.add_subparsers(dest="module", parser_class=_Parser)

    def leaf(parent, name: str, fn: Callable, help_: str) -> argparse.ArgumentParser:
        p = parent.add_parser(name, help=help_)
        _common(p)
        p.set_defaults(fn=fn)
        return p

    def group(name: str, help_: str):
        p = sub.add_parser(name, help=help_)
        return p.add_subparsers(dest="verb", parser_class=_Parser)

    g = group("sdp", "semidefinite programs")
    p = leaf(g, "solve", cmd_sdp_solve, "solve an SDP given as JSON")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=200)

    p = leaf(sub, "cbnorm", cmd_cbnorm, "cb norm with certificates")
    p.add_argument("--map", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--no-witness", action="store_true")

    p = leaf(sub, "choi", cmd_choi, "Choi matrix and CP test")
    p.add_argument("--map", required=True)

    p = leaf(sub, "dualize", cmd_dualize, "dual map under the trace pairing")
    p.add_argument("--map", required=True)

    g = group("ucp", "unital completely positive maps")
    p = leaf(g, "check", cmd_ucp_check, "ucp test and dual trace preservation")
    p.add_argument("--map", required=True)
    p.add_argument("--convention", choices=("plain", "per_state"), default="plain")

    p = leaf(sub, "perturb", cmd_perturb, "unital correction of a CP tuple")
    p.add_argument("--data", default=None, help='one JSON object {"psi": [...], "phi": ..., "state": ...}')
    p.add_argument("--psi", default=None, help="JSON list of maps")
    p.add_argument("--phi", default=None)
    p.add_argument("--state", default=None, help="density matrix (default maximally mixed)")
    p.add_argument("--eps", type=float, required=True)

    g = group("epi", "rigid surjections")
    for name, fn in (("count", cmd_epi_count), ("list", cmd_epi_list)):
        p = leaf(g, name, fn, f"{name} Epi(n, k)")
        p.add_argument("n", type=int)
        p.add_argument("k", type=int)
        if name == "list":
            p.add_argument("--limit", type=int, default=100_000)

    g = group("drt", "dual Ramsey search")
    p = leaf(g, "search", cmd_drt_search, "find a monochromatic Epi(S,R)∘γ")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--coloring", default='{"kind": "discrete", "r": 2, "rule": "parity_preimage0"}')
    p.add_argument("--cap", type=int, default=5_000_000)

    g = group("nets", "nets P and Q")
    p = leaf(g, "build", cmd_nets_build, "build and summarize nets")
    _net_flags(p)

    g = group("alpha", "α encodings")
    p = leaf(g, "encode", cmd_alpha_encode, "encode a rigid surjection as a block matrix")
    _net_flags(p)
    p.add_argument("--values", required=True, help="JSON list of net indices")
    p.add_argument("--over", choices=("P", "QxP"), default="P")

    g = group("tau", "the rigid surjection τ")
    p = leaf(g, "demo", cmd_tau_demo, "τ for a random class map")
    _net_flags(p)
    p.add_argument("--tau-eps", type=float, default=None)

    for name, fn, text in (
        ("amalgamate", cmd_amalgamate, "amalgamate random δ-embeddings"),
        ("amalgamate-pointed", cmd_amalgamate_pointed, "amalgamate random pointed δ-embeddings"),
    ):
        p = leaf(sub, name, fn, text)
        p.add_argument("--x", required=True)
        p.add_argument("--y", required=True)
        p.add_argument("--z", required=True)
        p.add_argument("--class", dest="cls", choices=("Osp", "Osy"), default="Osp")
        p.add_argument("--delta", type=float, default=0.0)
        p.add_argument("--eps", type=float, default=1e-6)

    p = leaf(sub, "ghdist", cmd_ghdist, "Gromov–Hausdorff and Banach–Mazur upper bounds")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--budget", type=int, default=20)

    p = leaf(sub, "embnet", cmd_embnet, "finite net of Emb(X, Z)")
    p.add_argument("--x", required=True)
    p.add_argument("--z", required=True)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--field", choices=("real", "complex"), default="complex")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--show", type=int, default=0, help="include the first members")

    g = group("arp", "approximate Ramsey search")
    p = leaf(g, "search", cmd_arp_search, "search γ on which a coloring stabilizes")
    p.add_argument("--config", required=True)

    p = sub.add_parser("replay", help="rerun a report's argv and compare payloads")
    p.add_argument("report")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=None, format="json", seed=0)
    return root


# -- driver ----------------------------------------------------------------------------


def _apply_threads() -> Optional[int]:
    raw = os.environ.get("OPRAMSEY_THREADS")
    if not raw:
        return None
    try:
        n = max(1, int(raw))
    except ValueError:
        raise PreconditionError("OPRAMSEY_THREADS must be a positive integer")
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(n)
    except ImportError:  # pragma: no cover - BLAS threads stay as configured
        log.debug("threadpoolctl unavailable; OPRAMSEY_THREADS only recorded")
    return n


def _config(a: argparse.Namespace) -> dict[str, Any]:
    skip = {"fn", "out", "format"}
    return {k: v for k, v in sorted(vars(a).items()) if k not in skip}


def _command_name(a: argparse.Namespace) -> str:
    return a.module if getattr(a, "verb", None) is None else f"{a.module} {a.verb}"


def run_payload(argv: Sequence[str]) -> tuple[Any, RunManifest, argparse.Namespace]:
    """Parse and execute, returning the payload and its manifest."""
    parser = build_parser()
    a = parser.parse_args(list(argv))
    if getattr(a, "module", None) is None:
        raise UsageError("opramsey: missing command")
    if getattr(a, "fn", "missing") == "missing":
        raise UsageError(f"opramsey {a.module}: missing subcommand")
    if a.module == "replay":
        return _replay(a), RunManifest("replay", config_hash(_config(a)), 0, __version__, 0, list(argv)), a
    t0 = time.perf_counter()
    payload = a.fn(a)
    ms = int(round((time.perf_counter() - t0) * 1000))
    manifest = RunManifest(_command_name(a), config_hash(_config(a)), int(a.seed), __version__, ms, list(argv))
    return payload, manifest, a


def _replay(a: argparse.Namespace) -> dict[str, Any]:
    try:
        with open(a.report, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise PreconditionError(f"cannot read {a.report}: {exc}") from exc
    try:
        rep = json.loads(text)
        argv = rep["manifest"]["argv"]
        recorded = canonical_json(rep["payload"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise PreconditionError(f"{a.report} is not an opramsey JSON report") from exc
    argv = [x for i, x in enumerate(argv) if x != "--out" and (i == 0 or argv[i - 1] != "--out")]
    payload, manifest, _ = run_payload(argv)
    fresh = canonical_json(payload)
    return {
        "command": manifest.command,
        "config_hash": manifest.config_hash,
        "recorded_hash": rep["manifest"].get("config_hash"),
        "identical": fresh == recorded,
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=os.environ.get("OPRAMSEY_LOG", "WARNING"))
    try:
        _apply_threads()
        payload, manifest, a = run_payload(argv)
        data = emit_report(payload, a.format, manifest)
        write_atomic(data, a.out)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        print(build_parser().format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OpRamseyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if isinstance(payload, dict) and payload.get("identical") is False and a.module == "replay":
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
