import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opramsey.cbnorm import (
    amplification_norm,
    cb_norm,
    cb_norm_value,
    choi_and_cp,
    diamond_norm,
    extend_cc,
    haagerup_bound,
    is_complete_isometry,
    lemma_injective_check,
    smith_level,
    trace_class_cb,
    transpose_map,
    tupled_map,
)
from opramsey.errors import PreconditionError
from opramsey.opspace import BlockLinearMap, SpaceDescriptor, delta_defect, identity_map

from conftest import random_component, random_matrix

seeds = st.integers(0, 2**32 - 1)


def test_transpose_has_cb_norm_q():
    for q in (2, 3):
        cert = cb_norm(transpose_map(q))
        assert cert.value == pytest.approx(q, abs=1e-5)
        assert cert.lower_value == pytest.approx(q, abs=1e-5)
        assert cert.lower_value <= cert.value + 1e-7


def test_row_to_column_has_cb_norm_sqrt2():
    f = BlockLinearMap(SpaceDescriptor.matrices(1, 2), SpaceDescriptor.matrices(2, 1), np.eye(2))
    assert cb_norm_value(f) == pytest.approx(np.sqrt(2), abs=1e-6)
    # On a single level it is an isometry.
    assert amplification_norm(f, 1)[0] == pytest.approx(1.0, abs=1e-6)


def test_identity_is_complete_isometry():
    assert is_complete_isometry(identity_map(SpaceDescriptor.full([(2, 2), (1, 2)])))
    assert not is_complete_isometry(transpose_map(2).scaled(0.5))


@settings(max_examples=10)
@given(st.integers(1, 3), seeds)
def test_commutative_codomain_cb_equals_norm(n, seed):
    rng = np.random.default_rng(seed)
    X, Y = SpaceDescriptor.matrices(2), SpaceDescriptor.ell_inf(n)
    f = BlockLinearMap(X, Y, random_matrix(rng, Y.dim, X.dim))
    assert smith_level(Y) == 1
    assert smith_level(SpaceDescriptor.matrices(1, 2)) == 2
    lower, _ = amplification_norm(f, 1, restarts=8, seed=seed)
    assert lower == pytest.approx(cb_norm_value(f), rel=1e-5)


@settings(max_examples=10)
@given(seeds)
def test_amplification_norms_bounded_by_cb(seed):
    rng = np.random.default_rng(seed)
    X = SpaceDescriptor.matrices(2)
    f = BlockLinearMap(X, X, random_matrix(rng, 4, 4))
    cb = cb_norm_value(f)
    for m in (1, 2, 3):
        assert amplification_norm(f, m, restarts=3, seed=seed)[0] <= cb + 1e-6


def test_choi_detects_positivity():
    assert choi_and_cp(identity_map(SpaceDescriptor.matrices(2))).is_cp
    res = choi_and_cp(transpose_map(2))
    assert not res.is_cp
    assert res.min_eig == pytest.approx(-1.0, abs=1e-12)


def test_extend_cc_agrees_on_subspace_and_stays_contractive():
    amb = SpaceDescriptor.ell_inf(2)
    sub = SpaceDescriptor(amb.blocks, np.array([[1.0, 1.0]]), "Osp")
    f = BlockLinearMap(sub, SpaceDescriptor.ell_inf(1), np.array([[1.0]]))
    g = extend_cc(f)
    assert np.allclose(g.action @ sub.basis_matrix().T, f.action)
    assert cb_norm_value(g) <= 1 + 1e-6


def test_extend_cc_rejects_expansive_maps():
    sub = SpaceDescriptor(((1, 1), (1, 1)), np.array([[1.0, 1.0]]), "Osp")
    f = BlockLinearMap(sub, SpaceDescriptor.ell_inf(1), np.array([[2.0]]))
    with pytest.raises(PreconditionError):
        extend_cc(f)


@settings(max_examples=10)
@given(st.integers(1, 2), st.integers(1, 2), st.integers(1, 3), seeds)
def test_lemma_check_agrees_with_tupled_defect(q, s, n, seed):
    rng = np.random.default_rng(seed)
    comps = [random_component(rng, q, s) for _ in range(n)]
    lemma = lemma_injective_check(comps)
    direct = delta_defect(tupled_map(comps), cb_norm_value) <= 1e-6
    assert lemma.is_complete_isometry == direct


def test_trace_class_cb_matches_predual_sdp(rng):
    T = SpaceDescriptor.ell_one(2, 1, 2)
    f = BlockLinearMap(T, SpaceDescriptor.ell_one(1, 1, 2), random_matrix(rng, 2, 4))
    assert trace_class_cb(f) == pytest.approx(cb_norm_value(f), abs=1e-6)
    I = identity_map(SpaceDescriptor.ell_one(1, 2))
    assert trace_class_cb(I) == pytest.approx(1.0, abs=1e-7)


def test_diamond_norm_of_transpose_is_q():
    # The transpose on trace class T_q also has cb norm q.
    assert diamond_norm(transpose_map(2).action, 2, 2) == pytest.approx(2.0, abs=1e-6)


@given(seeds)
def test_haagerup_bound_dominates_cb(seed):
    from opramsey.nets import column_cb

    rng = np.random.default_rng(seed)
    col = random_matrix(rng, 4, 4).reshape(1, 4, 4)
    col = np.concatenate([col, random_matrix(rng, 4, 4).reshape(1, 4, 4)])
    assert column_cb(col, 2, 2) <= float(haagerup_bound(col, 2, 2)) + 1e-7
