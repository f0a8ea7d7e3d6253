"""The eleven acceptance criteria, one test each.

Each test prints a single ``PASS`` or ``FAIL`` line with its measured
numbers, then asserts. Run ``pytest tests/test_acceptance.py -v -s`` to see
only these lines, or ``python3 tests/test_acceptance.py`` for a summary.
"""

from __future__ import annotations

import itertools
import json
import sys
import time
from math import comb, factorial
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, perturb_instance, random_component, random_system, random_unital_map  # noqa: E402
from opramsey.cbnorm import (  # noqa: E402
    amplification_norm,
    cb_norm,
    cb_norm_value,
    choi_and_cp,
    lemma_injective_check,
    smith_level,
    transpose_map,
    tupled_map,
)
from opramsey.cli import main as cli_main  # noqa: E402
from opramsey.fraisse import ClassConfig, amalgamate, amalgamate_pointed, random_amalgamation_instance  # noqa: E402
from opramsey.nets import build_nets, construct_tau, encode_alpha, random_class_map  # noqa: E402
from opramsey.opspace import BlockLinearMap, SpaceDescriptor, delta_defect  # noqa: E402
from opramsey.ramsey import RigidSurjection, compose_epi, is_rigid, iter_epi, stirling  # noqa: E402
from opramsey.sdp import SdpProblem, solve_sdp  # noqa: E402
from opramsey.systems import DensityState, perturb_ucp, structure_check, trace_preservation_check, unit_residual  # noqa: E402


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}"
    print(line, file=sys.__stdout__, flush=True)
    ACCEPTANCE_LINES.append(line)


def random_rigid(rng: np.random.Generator, n: int, k: int) -> list[int]:
    """A random rigid surjection n -> k (first occurrences at random positions)."""
    firsts = [0] + sorted(rng.choice(np.arange(1, n), size=k - 1, replace=False).tolist())
    vals, top = [], -1
    for i in range(n):
        if top + 1 < k and i == firsts[top + 1]:
            top += 1
            vals.append(top)
        else:
            vals.append(int(rng.integers(0, top + 1)))
    return vals


# -- 1 ----------------------------------------------------------------------


def test_01_transpose_cb_norm():
    t0 = time.perf_counter()
    rows, ok = [], True
    for q in (2, 3):
        cert = cb_norm(transpose_map(q), tol=1e-7)
        ascent = cert.lower_value
        good = abs(cert.value - q) <= 1e-5 and abs(ascent - cert.value) <= 1e-5
        ok &= good
        rows.append(f"q={q} sdp={cert.value:.8f} ascent={ascent:.8f}")
    dt = time.perf_counter() - t0
    ok &= dt <= 60
    report(1, "transpose cb norm", ok, f"{'; '.join(rows)}; {dt:.1f}s")
    assert ok


# -- 2 ----------------------------------------------------------------------


def test_02_smith_stabilization():
    """Literal criterion: plateau from min(q, s). Corrected claim: plateau from max(q, s).

    The literal claim is false for rectangular codomains (the identity from
    rows M_{1,2} to columns M_{2,1} has norm 1 and cb norm √2), so this test
    reports FAIL for it and is marked as an expected failure, while the
    corrected claim is asserted.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst_drop, worst_plateau, worst_cb, violations = 0.0, 0.0, 0.0, []
    for k in range(50):
        q, s = (int(v) for v in rng.integers(1, 4, size=2))
        dq, ds = (int(v) for v in rng.integers(1, 3, size=2))
        X, Y = SpaceDescriptor.matrices(dq, ds), SpaceDescriptor.matrices(q, s)
        a = rng.standard_normal((Y.dim, X.dim)) + 1j * rng.standard_normal((Y.dim, X.dim))
        f = BlockLinearMap(X, Y, a)
        cb = cb_norm_value(f)
        level = smith_level(Y)
        vals, x = [], None
        for m in range(1, level + 2):
            start = None
            if x is not None:
                start = np.zeros((m, m, X.dim), dtype=complex)
                start[: m - 1, : m - 1] = x.coords()
            v, x = amplification_norm(f, m, restarts=4, seed=k, start=start)
            vals.append(v / cb)
        worst_drop = max(worst_drop, max(0.0, max(a - b for a, b in zip(vals, vals[1:]))))
        plateau = vals[level - 1 :]
        worst_plateau = max(worst_plateau, max(plateau) - min(plateau))
        worst_cb = max(worst_cb, abs(plateau[-1] - 1.0))
        if abs(vals[min(q, s) - 1] - 1.0) > 1e-5:
            violations.append(f"M_{dq},{ds}->M_{q},{s} level {min(q, s)} ratio {vals[min(q, s) - 1]:.4f}")
    # The row-to-column identity is the smallest counterexample.
    rc = BlockLinearMap(SpaceDescriptor.matrices(1, 2), SpaceDescriptor.matrices(2, 1), np.eye(2))
    rc_gap = cb_norm_value(rc) - amplification_norm(rc, 1)[0]
    dt = time.perf_counter() - t0
    corrected = worst_drop <= 1e-5 and worst_plateau <= 1e-5 and worst_cb <= 1e-5 and dt <= 300
    literal = corrected and not violations
    report(
        2, "Smith stabilization", literal,
        f"50 maps, nondecreasing (max drop {worst_drop:.1e}); plateau from min(q,s) violated in "
        f"{len(violations)}/50 (first: {violations[0] if violations else '-'}; row->column gap {rc_gap:.4f}); "
        f"plateau from max(q,s) holds (spread {worst_plateau:.1e}, |plateau/cb - 1| {worst_cb:.1e}); {dt:.1f}s",
    )
    assert corrected
    if not literal:
        pytest.xfail("stabilization from min(q,s) is false for rectangular codomains; see the ledger")


# -- 3 ----------------------------------------------------------------------


def test_03_coordinate_isometry_lemma():
    rng = np.random.default_rng(3)
    agree, isometries = 0, 0
    for _ in range(100):
        q, s = (int(v) for v in rng.integers(1, 3, size=2))
        n = int(rng.integers(1, 4))
        comps = [random_component(rng, q, s) for _ in range(n)]
        lemma = lemma_injective_check(comps).is_complete_isometry
        direct = delta_defect(tupled_map(comps), cb_norm_value) <= 1e-6
        agree += lemma == direct
        isometries += direct
    ok = agree == 100 and 0 < isometries < 100
    report(3, "coordinate-isometry lemma", ok, f"{agree}/100 agree ({isometries} complete isometries)")
    assert ok


# -- 4 ----------------------------------------------------------------------


def _blockwise_pair(space: SpaceDescriptor, x: np.ndarray, a: np.ndarray) -> complex:
    dual = space.dual()
    return sum(np.trace(xb @ ab) / xb.shape[1] for xb, ab in zip(space.split(x), dual.split(a)))


def test_04_duality_suite():
    rng = np.random.default_rng(4)
    worst_pair, worst_double, failures, cp_count = 0.0, 0.0, 0, 0
    for k in range(200):
        X, Y = random_system(rng), random_system(rng)
        f = random_unital_map(rng, X, Y, cp=bool(k % 2))
        fd = f.dualize()
        x = rng.standard_normal(X.dim) + 1j * rng.standard_normal(X.dim)
        a = rng.standard_normal(Y.dim) + 1j * rng.standard_normal(Y.dim)
        rhs = _blockwise_pair(Y, f.action @ x, a)
        worst_pair = max(worst_pair, abs(_blockwise_pair(X, x, fd.action @ a) - rhs) / (1 + abs(rhs)))
        worst_double = max(worst_double, float(np.max(np.abs(fd.dualize().action - f.action))))
        cp = choi_and_cp(f).is_cp
        cp_count += cp
        g = f.scaled(1.0 + float(rng.uniform(0.1, 0.5)))
        for h in (f, g):
            unital = unit_residual(h) <= 1e-9
            if unital != trace_preservation_check(h.dualize()).ok:
                failures += 1
        if cp != choi_and_cp(fd).is_cp:
            failures += 1
    ok = worst_pair <= 1e-10 and worst_double <= 1e-10 and failures == 0
    report(
        4, "duality suite", ok,
        f"200 maps ({cp_count} CP), pairing {worst_pair:.1e}, double dual {worst_double:.1e}, "
        f"equivalence failures {failures}",
    )
    assert ok


# -- 5 ----------------------------------------------------------------------


def _stirling_oracle(n: int, k: int) -> int:
    if k > n:
        return 0
    return sum((-1) ** j * comb(k, j) * (k - j) ** n for j in range(k + 1)) // factorial(k)


def test_05_rigid_surjection_counts():
    t0 = time.perf_counter()
    mismatches = 0
    for n in range(11):
        for k in range(n + 1):
            count = sum(1 for _ in iter_epi(n, k))
            mismatches += count != _stirling_oracle(n, k) or stirling(n, k) != count
    compositions = 0
    bad = 0
    for n in range(1, 7):
        for k in range(1, n + 1):
            inners = [RigidSurjection(v, k) for v in iter_epi(n, k)]
            for r in range(1, k + 1):
                outers = [RigidSurjection(v, r) for v in iter_epi(k, r)]
                for inner, outer in itertools.product(inners, outers):
                    c = compose_epi(outer, inner)
                    compositions += 1
                    bad += not is_rigid(c.values, r)
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and bad == 0 and dt <= 30
    report(5, "rigid surjection counts", ok, f"{mismatches} count mismatches, {compositions} compositions, {bad} non-rigid; {dt:.1f}s")
    assert ok


# -- 6 ----------------------------------------------------------------------


def test_06_tau_construction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst, bad = 0.0, 0
    for cls in ("CQ", "TPCQ"):
        nets = build_nets(cls, 2, 2, 1, eps=0.15, eps0=0.05, seed=0, verify_samples=1000)
        for _ in range(50):
            rho = random_class_map(cls, 2, 2, 1, 1, "real", rng)
            res = construct_tau(rho, nets, eps=0.15)
            worst = max(worst, res.defect)
            bad += not is_rigid(res.tau.values, len(nets.P))
            for p in range(len(nets.P)):
                if (cls == "CQ" and p == 0) or nets.P.pinned[p]:
                    continue
                bad += res.preimage_min(p) != (res.a_dagger, p)
    dt = time.perf_counter() - t0
    ok = worst <= 0.15 and bad == 0 and dt <= 300
    report(6, "tau construction", ok, f"100 maps (50 per class), max defect {worst:.4f}, {bad} violations; {dt:.1f}s")
    assert ok


# -- 7 ----------------------------------------------------------------------


def test_07_encoding_soundness():
    rng = np.random.default_rng(7)
    configs = [
        ("CQ", build_nets("CQ", 2, 2, 1, eps=0.15, eps0=0.05, seed=0, verify_samples=200)),
        ("TPCQ", build_nets("TPCQ", 2, 2, 1, eps=0.15, eps0=0.05, seed=0, verify_samples=200)),
        ("CQ", build_nets("CQ", 2, 2, 2, eps=1.0, eps0=1.0, seed=0, verify_samples=0, patience=5, budget=100)),
        ("TPCQ", build_nets("TPCQ", 2, 2, 2, eps=1.0, eps0=1.0, seed=0, verify_samples=0, patience=5, budget=100)),
    ]
    violations, worst, done = 0, 0.0, 0
    for k in range(100):
        cls, nets = configs[k % 4]
        size = len(nets.P)
        over = "P"
        if k % 8 == 1:  # TPCQ with q = 1 has a small Q x P
            over, size = "QxP", len(nets.P) * len(nets.Q)
        n = size + int(rng.integers(0, 4))
        alpha = encode_alpha(random_rigid(rng, n, size), nets, over=over)
        rep = structure_check(alpha, cls)
        violations += len(rep.violations)
        worst = max(worst, rep.norm_residual)
        done += 1
    ok = done == 100 and violations == 0 and worst <= 1e-8
    report(7, "encoding soundness", ok, f"{done} encodings, {violations} violations, max residual {worst:.1e}")
    assert ok


# -- 8 ----------------------------------------------------------------------


def _cross_defect(phi, psi, i, j) -> float:
    d = BlockLinearMap(phi.domain, i.codomain, i.action @ phi.action - j.action @ psi.action)
    return cb_norm_value(d)


def test_08_amalgamation_moduli():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    deltas = (0.0, 0.05, 0.1)
    rows, ok = [], True
    for label in ("Osp", "Osy", "pointed"):
        worst_iso, worst_excess, oracle_gap = 0.0, -np.inf, 0.0
        for k in range(50):
            delta = deltas[k % 3]
            if label == "pointed":
                cat = ("Osp", "Osy")[k % 2]
                inst = random_amalgamation_instance(cat, delta, rng, pointed=True, max_dim=8)
                cfg = ClassConfig(cat, pointed=True)
                w = amalgamate_pointed(*inst.pointed, inst.phi, inst.psi, cfg=cfg)
                maps = (w.I, w.J)
                bound = cfg.modulus(max(delta, w.delta))
            else:
                cat = label
                inst = random_amalgamation_instance(cat, delta, rng, max_dim=8)
                cfg = ClassConfig(cat)
                w = amalgamate(inst.phi, inst.psi, cfg, delta)
                maps = (w.i, w.j)
                bound = cfg.modulus(delta)
            worst_iso = max(worst_iso, max(w.isometry_defects))
            worst_excess = max(worst_excess, w.defect - bound)
            if k % 10 == 0:
                oracle_gap = max(oracle_gap, abs(_cross_defect(inst.phi, inst.psi, *maps) - w.defect))
        good = worst_iso <= 1e-6 and worst_excess <= 0.01 and oracle_gap <= 1e-6
        ok &= good
        rows.append(f"{label}: iso {worst_iso:.1e}, defect - modulus {worst_excess:+.3f}, oracle gap {oracle_gap:.1e}")
    dt = time.perf_counter() - t0
    ok &= dt <= 600
    report(8, "amalgamation moduli", ok, f"{'; '.join(rows)}; {dt:.1f}s")
    assert ok


# -- 9 ----------------------------------------------------------------------


def test_09_perturb_ucp():
    rng = np.random.default_rng(9)
    eps = 0.2
    worst_unit, worst_dist, cp_fail, certified = 0.0, 0.0, 0, 0
    for _ in range(100):
        q, d = int(rng.integers(1, 4)), int(rng.integers(2, 5))
        psis, phi = perturb_instance(rng, q, d, eps)
        res = perturb_ucp(psis, phi, DensityState.maximally_mixed(q), eps)
        worst_unit = max(worst_unit, res.unitality_residual)
        diff = BlockLinearMap(phi.domain, phi.codomain, res.psi_d.action - phi.action)
        worst_dist = max(worst_dist, cb_norm_value(diff))
        if res.one_minus_y_psd:
            certified += 1
            cp_fail += not res.is_cp
    ok = worst_unit <= 1e-12 and worst_dist < eps and cp_fail == 0
    report(
        9, "perturb_ucp", ok,
        f"100 instances, unit residual {worst_unit:.1e}, max cb distance {worst_dist:.4f} < {eps}, "
        f"{certified} certified CP, {cp_fail} failures",
    )
    assert ok


# -- 10 ---------------------------------------------------------------------


def test_10_sdp_conformance():
    rng = np.random.default_rng(10)
    worst_err, worst_gap, not_opt = 0.0, 0.0, 0
    for _ in range(100):
        n = int(rng.integers(1, 21))
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        c = (g + g.conj().T) / 2
        sol = solve_sdp(SdpProblem.from_constraints([n], [c], [([np.eye(n)], 1.0)]))
        not_opt += sol.status != "optimal"
        worst_err = max(worst_err, abs(sol.primal_value - np.linalg.eigvalsh(c)[0]))
        worst_gap = max(worst_gap, sol.gap)
    certified = 0
    for _ in range(10):
        n = int(rng.integers(1, 6))
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        p_mat = g @ g.conj().T + np.eye(n)
        sol = solve_sdp(SdpProblem.from_constraints([n], [np.eye(n)], [([p_mat], -1.0)]))
        y = None if sol.certificate is None else float(np.real(sol.certificate[0]))
        if sol.status == "infeasible" and y is not None:
            # A*(y) = y P must be NSD while b y = -y > 0.
            certified += np.linalg.eigvalsh(y * p_mat)[-1] <= 1e-8 and -y > 0
    ok = not_opt == 0 and worst_err <= 1e-6 and worst_gap <= 1e-7 and certified == 10
    report(
        10, "SDP conformance", ok,
        f"100 min-eig SDPs, max error {worst_err:.1e}, max gap {worst_gap:.1e}; {certified}/10 infeasible certified",
    )
    assert ok


# -- 11 ---------------------------------------------------------------------


def _cli_commands(tmp: Path) -> list[list[str]]:
    sdp = {
        "block_dims": [2],
        "objective": [{"rows": 2, "cols": 2, "data": [[1, 0], [0.5, 0], [0.5, 0], [-1, 0]]}],
        "constraints": [{"coeffs": [{"rows": 2, "cols": 2, "data": [[1, 0], [0, 0], [0, 0], [1, 0]]}], "rhs": 1}],
    }
    (tmp / "sdp.json").write_text(json.dumps(sdp))
    rng = np.random.default_rng(11)
    psis, phi = perturb_instance(rng, 2, 3, 0.2)
    (tmp / "perturb.json").write_text(json.dumps({"psi": [p.to_json() for p in psis], "phi": phi.to_json()}))
    arp = {"x": "linf1", "y": "linf1", "z": "linf2", "coloring": {"kind": "discrete", "r": 1},
           "eps": 0.1, "field": "real", "samples": 20}
    net = ["--class", "TPCQ", "--d", "2", "--m", "2", "--q", "1", "--s", "1", "--eps", "0.15", "--eps0", "0.05",
           "--verify-samples", "50"]
    identity = '{"builtin": "identity", "space": "osy:M2"}'
    return [
        ["sdp", "solve", "--in", f"@{tmp / 'sdp.json'}"],
        ["cbnorm", "--map", '{"builtin": "transpose", "q": 2}'],
        ["choi", "--map", identity],
        ["dualize", "--map", identity],
        ["ucp", "check", "--map", identity],
        ["perturb", "--data", f"@{tmp / 'perturb.json'}", "--eps", "0.2"],
        ["epi", "count", "7", "3"],
        ["epi", "list", "5", "2"],
        ["drt", "search", "--n", "5", "--r", "2", "--s", "3",
         "--coloring", '{"kind": "discrete", "r": 2, "rule": "hash", "seed": 4}'],
        ["nets", "build", *net],
        ["alpha", "encode", *net, "--values", json.dumps(list(range(15)))],
        ["tau", "demo", *net, "--seed", "5"],
        ["amalgamate", "--x", "linf1", "--y", "linf2", "--z", "linf2", "--class", "Osy", "--delta", "0.05", "--seed", "2"],
        ["amalgamate-pointed", "--x", "linf1", "--y", "linf2", "--z", "linf2", "--delta", "0.05", "--seed", "2"],
        ["ghdist", "--x", "M2", "--y", "M2", "--budget", "2"],
        ["embnet", "--x", "linf1", "--z", "linf2", "--field", "real", "--samples", "20", "--show", "2"],
        ["arp", "search", "--config", json.dumps(arp)],
    ]


def test_11_cli_determinism(tmp_path, capsys):
    identical, failed = 0, []
    commands = _cli_commands(tmp_path)
    for k, argv in enumerate(commands):
        out = tmp_path / f"report{k}.json"
        code = cli_main([*argv, "--out", str(out)])
        if code != 0:
            failed.append(f"{' '.join(argv[:2])} exit {code}")
            continue
        first = json.loads(out.read_text())["payload"]
        code = cli_main(["replay", str(out)])
        replay = json.loads(capsys.readouterr().out)["payload"]
        # Byte comparison of the payload sections, independent of replay's own check.
        again = tmp_path / f"again{k}.json"
        cli_main([*argv, "--out", str(again)])
        second = json.loads(again.read_text())["payload"]
        same_bytes = json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)
        if code == 0 and replay["identical"] and same_bytes:
            identical += 1
        else:
            failed.append(" ".join(argv[:2]))
    ok = identical == len(commands)
    detail = f"{identical}/{len(commands)} commands replay byte-identical"
    report(11, "CLI determinism", ok, detail + (f"; failed: {failed}" if failed else ""))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
