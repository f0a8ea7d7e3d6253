import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opramsey.errors import PreconditionError, ShapeError
from opramsey.opspace import (
    BlockLinearMap,
    DualDescriptor,
    SpaceDescriptor,
    amplify,
    delta_defect,
    element_from_coords,
    identity_map,
    level_norm,
    random_element,
    ruan_check,
    stability_modulus,
)

shapes = st.tuples(st.integers(1, 2), st.integers(1, 2))
block_lists = st.lists(shapes, min_size=1, max_size=3)
seeds = st.integers(0, 2**32 - 1)


def random_map(rng, X, Y):
    a = rng.standard_normal((Y.dim, X.dim)) + 1j * rng.standard_normal((Y.dim, X.dim))
    return BlockLinearMap(X, Y, a)


def trace_pair(inf_space, x, a):
    """Σ tr(x_i a_i) / s_i computed block by block."""
    dual = inf_space.dual()
    return sum(
        np.trace(xb @ ab) / xb.shape[1] for xb, ab in zip(inf_space.split(x), dual.split(a))
    )


def test_stability_modulus_values():
    assert stability_modulus("Osp", 0.1) == pytest.approx(0.1)
    assert stability_modulus("Osy", 0.1) == pytest.approx(0.2)
    assert stability_modulus("Osp", 0.1, pointed=True) == pytest.approx(0.2)
    assert stability_modulus("Osy", 0.1, pointed=True) == pytest.approx(0.3)
    with pytest.raises(PreconditionError):
        stability_modulus("Banach", 0.1)


def test_descriptor_json_round_trip():
    sp = SpaceDescriptor(((2, 2), (1, 1)), None, "Osy")
    back = SpaceDescriptor.from_json(sp.to_json())
    assert back.same_as(sp)
    assert sp.dim == 5 and sp.offsets == [0, 4]
    assert sp.dual().kind == "one" and sp.dual().blocks == ((2, 2), (1, 1))


@given(block_lists, st.integers(1, 3), seeds)
def test_coords_round_trip(blocks, m, seed):
    sp = SpaceDescriptor.full(blocks)
    c = np.random.default_rng(seed).standard_normal((m, m, sp.dim)) + 0j
    assert np.allclose(element_from_coords(sp, c).coords(), c)


@given(block_lists, block_lists, seeds)
def test_dual_map_satisfies_pairing_identity(bx, by, seed):
    rng = np.random.default_rng(seed)
    X, Y = SpaceDescriptor.full(bx), SpaceDescriptor.full(by)
    f = random_map(rng, X, Y)
    fd = f.dualize()
    x = rng.standard_normal(X.dim) + 1j * rng.standard_normal(X.dim)
    a = rng.standard_normal(Y.dim) + 1j * rng.standard_normal(Y.dim)
    lhs = trace_pair(X, x, fd.action @ a)
    rhs = trace_pair(Y, f.action @ x, a)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(rhs))
    assert np.allclose(fd.dualize().action, f.action, atol=1e-12)


def test_dual_descriptor_pairing_matches_blockwise_trace(rng):
    sp = SpaceDescriptor.full([(1, 2), (2, 2)])
    dd = DualDescriptor.of(sp)
    x = rng.standard_normal(sp.dim)
    a = rng.standard_normal(sp.dim)
    assert dd.pair(x, a) == pytest.approx(trace_pair(sp, x, a))


@given(block_lists, st.integers(1, 3), seeds)
def test_identity_amplification_preserves_norms(blocks, m, seed):
    sp = SpaceDescriptor.full(blocks)
    x = random_element(sp, m, np.random.default_rng(seed))
    assert level_norm(identity_map(sp)(x)) == pytest.approx(level_norm(x))


def test_amplify_acts_entrywise(rng):
    X, Y = SpaceDescriptor.matrices(2), SpaceDescriptor.ell_inf(2)
    f = random_map(rng, X, Y)
    f2 = amplify(f, 2)
    c = rng.standard_normal((2, 2, X.dim)) + 0j
    x = element_from_coords(X, c)
    direct = f(x)
    via = f2.apply_vec(f2.domain.from_ambient(f2.domain.flatten(list(x.data))))
    assert np.allclose(f2.codomain.to_ambient(via), f2.codomain.flatten(list(direct.data)))


def test_ruan_axiom_holds_and_fake_norm_is_caught():
    sp = SpaceDescriptor.full([(2, 2), (1, 2)])
    assert ruan_check(sp, trials=100, seed=1).num_violations == 0

    def level_weighted(x):
        return x.level * level_norm(x)

    assert ruan_check(sp, trials=100, seed=1, norm=level_weighted).num_violations > 0


def test_delta_defect_frozen_values():
    l1 = SpaceDescriptor.ell_inf(1)
    assert delta_defect(identity_map(SpaceDescriptor.matrices(2))) == pytest.approx(0, abs=1e-6)
    assert delta_defect(identity_map(l1).scaled(0.5)) == pytest.approx(1.0, abs=1e-6)
    assert delta_defect(identity_map(l1).scaled(2.0)) == float("inf")
    zero = BlockLinearMap(SpaceDescriptor.ell_inf(2), l1, np.zeros((1, 2)))
    assert delta_defect(zero) == float("inf")


def test_shape_errors():
    with pytest.raises(ShapeError):
        BlockLinearMap(SpaceDescriptor.ell_inf(2), SpaceDescriptor.ell_inf(1), np.zeros((2, 2)))
    sp = SpaceDescriptor.ell_inf(2)
    with pytest.raises(PreconditionError):
        BlockLinearMap(SpaceDescriptor(((1, 1), (1, 1)), np.array([[1.0, 1.0]])), sp, np.zeros((2, 1))).dualize()
