import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opramsey.errors import ShapeError, SymmetryError
from opramsey.sdp import SdpProblem, real_embedding, solve_sdp

from conftest import random_hermitian, random_matrix


def min_eig_problem(c: np.ndarray) -> SdpProblem:
    n = c.shape[0]
    return SdpProblem.from_constraints([n], [c], [([np.eye(n)], 1.0)])


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_min_eigenvalue_sdp_matches_spectrum(n, seed):
    c = random_hermitian(np.random.default_rng(seed), n)
    sol = solve_sdp(min_eig_problem(c))
    assert sol.status == "optimal"
    assert sol.primal_value == pytest.approx(np.linalg.eigvalsh(c)[0], abs=1e-6)
    assert sol.gap <= 1e-7


@given(st.integers(0, 2**32 - 1))
def test_primal_and_dual_feasibility_at_optimum(seed):
    rng = np.random.default_rng(seed)
    dims = [2, 3]
    x0 = [(lambda g: g @ g.conj().T)(random_matrix(rng, n)) for n in dims]
    cons = []
    for _ in range(3):
        mats = [random_hermitian(rng, n) for n in dims]
        cons.append((mats, float(sum(np.real(np.trace(a @ x)) for a, x in zip(mats, x0)))))
    obj = [(lambda g: g @ g.conj().T + np.eye(n))(random_matrix(rng, n)) for n in dims]
    p = SdpProblem.from_constraints(dims, obj, cons)
    sol = solve_sdp(p)
    assert sol.status == "optimal"
    for x in sol.primal_blocks:
        assert np.linalg.eigvalsh(x)[0] >= -1e-7
    for (mats, rhs) in cons:
        lhs = sum(np.real(np.trace(a @ x)) for a, x in zip(mats, sol.primal_blocks))
        assert lhs == pytest.approx(rhs, abs=1e-6 * (1 + abs(rhs)))
    for x, s in zip(sol.primal_blocks, sol.dual_slacks):
        assert np.linalg.eigvalsh(s)[0] >= -1e-7
    assert sol.primal_value == pytest.approx(sol.dual_value, abs=1e-6 * (1 + abs(sol.primal_value)))


def test_real_embedding_has_same_value(rng):
    c = random_hermitian(rng, 4)
    p = min_eig_problem(c)
    assert solve_sdp(real_embedding(p)).primal_value == pytest.approx(solve_sdp(p).primal_value, abs=1e-6)


def test_negative_trace_is_certified_infeasible():
    p = SdpProblem.from_constraints([2], [np.eye(2)], [([np.eye(2)], -1.0)])
    sol = solve_sdp(p)
    assert sol.status == "infeasible"
    y = sol.certificate
    assert y is not None
    # A*(y) <= 0 and b.y > 0 separate the data from the PSD cone.
    assert np.linalg.eigvalsh(y[0] * np.eye(2))[-1] <= 1e-8
    assert float(y[0]) * -1.0 > 0


def test_unbounded_problem_is_reported():
    # min -tr(X) subject to X_00 = 1 has a recession direction along X_11.
    e00 = np.diag([1.0, 0.0])
    p = SdpProblem.from_constraints([2], [-np.eye(2)], [([e00], 1.0)])
    assert solve_sdp(p).status == "unbounded"


def test_json_round_trip(rng):
    p = min_eig_problem(random_hermitian(rng, 3))
    q = SdpProblem.from_json(p.to_json())
    assert q.block_dims == p.block_dims
    assert np.array_equal(q.objective[0], p.objective[0])
    assert np.array_equal(q.rhs, p.rhs)


def test_rejects_non_hermitian_and_bad_shapes():
    with pytest.raises(SymmetryError):
        SdpProblem.from_constraints([2], [np.array([[0, 1], [0, 0]])], [([np.eye(2)], 1.0)])
    with pytest.raises(ShapeError):
        SdpProblem.from_constraints([2], [np.eye(3)], [([np.eye(2)], 1.0)])
    with pytest.raises(ShapeError):
        SdpProblem.from_json({"objective": []})
