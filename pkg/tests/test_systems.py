import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opramsey.cbnorm import cb_norm_value, choi_and_cp
from opramsey.errors import CategoryError, PreconditionError
from opramsey.nets import random_class_map
from opramsey.opspace import BlockLinearMap, SpaceDescriptor, identity_map
from opramsey.systems import (
    DensityState,
    PointedSpace,
    StateVector,
    is_ucp,
    perturb_ucp,
    sigma_d,
    structure_check,
    trace_preservation_check,
    unit_residual,
)

from conftest import perturb_instance, random_system, random_unital_map

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=20)
@given(seeds, st.booleans(), st.booleans())
def test_unital_iff_dual_trace_preserving_and_cp_iff_dual_cp(seed, unital, cp):
    rng = np.random.default_rng(seed)
    X, Y = random_system(rng), random_system(rng)
    f = random_unital_map(rng, X, Y, cp=cp)
    if not unital:
        f = f.scaled(1.5)
    fd = f.dualize()
    assert (unit_residual(f) <= 1e-9) == trace_preservation_check(fd).ok
    assert choi_and_cp(f).is_cp == choi_and_cp(fd).is_cp


def test_identity_on_systems_is_ucp():
    sp = SpaceDescriptor.full([(2, 2), (1, 1)], category="Osy")
    assert is_ucp(identity_map(sp))
    with pytest.raises(CategoryError):
        is_ucp(identity_map(SpaceDescriptor.matrices(2)))


def test_per_state_reading_rejects_identity_on_two_coordinates():
    # Tr_λ(a) = Tr(a) fails for vertex states once d ≥ 2, even for the identity.
    dual = identity_map(SpaceDescriptor.ell_inf(2, category="Osy")).dualize()
    assert trace_preservation_check(dual, "plain").ok
    assert not trace_preservation_check(dual, "per_state").ok
    single = identity_map(SpaceDescriptor.ell_inf(1, category="Osy")).dualize()
    assert trace_preservation_check(single, "per_state").ok


def test_states():
    s = StateVector.of([1, 3])
    assert s.weights == (0.25, 0.75) and s.drift == pytest.approx(3.0)
    with pytest.raises(PreconditionError):
        StateVector.of([-1, 2])
    rho = DensityState.maximally_mixed(2)
    assert rho(np.eye(2)) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        DensityState.of(np.diag([1.0, -1.0]))
    assert is_ucp(sigma_d(3, 2))


def test_pointed_space_requires_contractive_unital_state():
    X = SpaceDescriptor.ell_inf(2, category="Osy")
    good = StateVector.of([0.5, 0.5]).as_map()
    assert PointedSpace(X, good).target.dim == 1
    bad = BlockLinearMap(X, good.codomain, np.array([[1.0, 1.0]]))
    with pytest.raises(PreconditionError):
        PointedSpace(X, bad)


@settings(max_examples=15)
@given(st.sampled_from(["CQ", "TPCQ"]), st.integers(1, 2), seeds)
def test_random_class_maps_pass_structure_check(cls, q, seed):
    rng = np.random.default_rng(seed)
    rho = random_class_map(cls, 2, 3, q, q, "complex", rng)
    rep = structure_check(rho, cls)
    assert rep.ok, rep.violations
    assert rep.norm_residual <= 1e-8


def test_structure_check_flags_broken_matrices():
    rng = np.random.default_rng(0)
    rho = random_class_map("CQ", 2, 3, 1, 1, "real", rng)
    assert not structure_check(rho.scaled(3.0), "CQ").ok
    t = random_class_map("TPCQ", 2, 3, 1, 1, "real", rng)
    assert not structure_check(t.scaled(0.5), "TPCQ").ok


@settings(max_examples=20)
@given(st.integers(1, 3), st.integers(2, 4), seeds)
def test_perturb_ucp_is_exactly_unital_and_close(q, d, seed):
    rng = np.random.default_rng(seed)
    eps = 0.2
    psis, phi = perturb_instance(rng, q, d, eps)
    res = perturb_ucp(psis, phi, DensityState.maximally_mixed(q), eps)
    assert res.unitality_residual <= 1e-12
    diff = BlockLinearMap(phi.domain, phi.codomain, res.psi_d.action - phi.action)
    assert cb_norm_value(diff) < eps
    if res.one_minus_y_psd:
        assert res.is_cp and res.warning is None
    else:
        assert res.warning is not None


def test_perturb_ucp_rejects_far_tuples():
    sp = SpaceDescriptor.matrices(2, category="Osy")
    with pytest.raises(PreconditionError):
        perturb_ucp([], identity_map(sp).scaled(0.5), DensityState.maximally_mixed(2), 0.1)
