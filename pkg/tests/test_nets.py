from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opramsey.errors import NetResolutionError, PreconditionError, RigidityError
from opramsey.linalg import op_norm
from opramsey.nets import (
    build_nets,
    column_distance,
    construct_tau,
    encode_alpha,
    random_class_map,
    unitary_grid,
)
from opramsey.ramsey import is_rigid
from opramsey.systems import structure_check

from conftest import random_unitary

seeds = st.integers(0, 2**32 - 1)

_NETS = {}


@lru_cache(maxsize=None)
def _grid(field, eps):
    return np.array(unitary_grid(2, eps, field))


def nets_for(cls, m=2):
    key = (cls, m)
    if key not in _NETS:
        _NETS[key] = build_nets(cls, 2, m, 1, eps=0.15, eps0=0.05, seed=0, verify_samples=200)
    return _NETS[key]


@pytest.mark.parametrize("field,eps", [("complex", 1.0), ("real", 0.3)])
@settings(max_examples=10)
@given(seed=seeds)
def test_unitary_grid_is_dense(field, eps, seed):
    rng = np.random.default_rng(seed)
    grid = _grid(field, eps)
    u = random_unitary(rng, 2)
    if field == "real":
        from scipy.stats import ortho_group

        u = ortho_group.rvs(2, random_state=rng)
    dist = np.linalg.norm(grid - u[None], ord=2, axis=(1, 2))
    assert dist.min() <= eps + 1e-9
    assert np.allclose(grid[0], np.eye(2))
    assert op_norm(grid[0] - np.eye(2)) == 0


@pytest.mark.parametrize("cls", ["CQ", "TPCQ"])
def test_lattice_net_summary(cls):
    nets = nets_for(cls)
    P = nets.P
    assert P.construction == "lattice"
    assert P.density_defect <= 0.15
    assert np.all(np.diff(P.norms) >= -1e-12)
    if cls == "CQ":
        assert not np.any(P.members[0])
    assert len(nets.Q) >= 1
    for k in (0, len(nets.Q) - 1):
        inj, us = nets.Q.decode(k)
        assert nets.Q.encode(inj, us) == k


@pytest.mark.parametrize("cls", ["CQ", "TPCQ"])
def test_encode_alpha_structure(cls):
    nets = nets_for(cls)
    vals = list(range(len(nets.P))) + [0, len(nets.P) - 1]
    rep = structure_check(encode_alpha(vals, nets), cls)
    assert rep.ok, rep.violations
    with pytest.raises(RigidityError):
        encode_alpha([1, 0], nets)


@settings(max_examples=8)
@given(st.sampled_from(["CQ", "TPCQ"]), seeds)
def test_tau_is_rigid_with_small_defect(cls, seed):
    nets = nets_for(cls)
    rho = random_class_map(cls, 2, 2, 1, 1, "real", np.random.default_rng(seed))
    res = construct_tau(rho, nets)
    assert is_rigid(res.tau.values, len(nets.P))
    assert res.defect <= 0.15 + 1e-9
    for p in range(len(nets.P)):
        if (cls == "CQ" and p == 0) or nets.P.pinned[p]:
            continue
        assert res.preimage_min(p) == (res.a_dagger, p)


def test_tau_rejects_finer_eps_than_net():
    nets = nets_for("CQ")
    rho = random_class_map("CQ", 2, 2, 1, 1, "real", np.random.default_rng(0))
    with pytest.raises(NetResolutionError):
        construct_tau(rho, nets, eps=0.01)


def test_preconditions():
    with pytest.raises(PreconditionError):
        build_nets("XQ", 2, 2, 1)
    with pytest.raises(NetResolutionError):
        build_nets("CQ", 2, 2, 1, eps=0.1, eps0=0.2)
    with pytest.raises(PreconditionError):
        random_class_map("CQ", 3, 2, 1, 1, "real", np.random.default_rng(0))


def test_column_distance_is_l1_for_scalars():
    a = np.array([0.5, 0.25]).reshape(2, 1, 1)
    b = np.array([0.25, 0.0]).reshape(2, 1, 1)
    assert column_distance(a, b, 1, 1) == pytest.approx(0.5)
