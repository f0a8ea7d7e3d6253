import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


# Filled by the acceptance tests and echoed in the terminal summary, so the
# PASS/FAIL lines show up even when output capture is on.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda t: int(t.split()[2])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_matrix(rng, n, m=None, real=False):
    m = n if m is None else m
    a = rng.standard_normal((n, m))
    if not real:
        a = a + 1j * rng.standard_normal((n, m))
    return a


def random_hermitian(rng, n):
    a = random_matrix(rng, n)
    return (a + a.conj().T) / 2


def random_unitary(rng, n):
    from scipy.stats import unitary_group

    return np.eye(1) * np.exp(2j * np.pi * rng.random()) if n == 1 else unitary_group.rvs(n, random_state=rng)


def random_component(rng, q, s):
    """A complete contraction out of M_{q,s}: an isometric corner embedding or a scaled random map."""
    from opramsey.cbnorm import cb_norm_value
    from opramsey.opspace import BlockLinearMap, SpaceDescriptor, map_from_function

    dom = SpaceDescriptor.matrices(q, s)
    qq, ss = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    if rng.random() < 0.4 and qq >= q and ss >= s:
        cod = SpaceDescriptor.matrices(qq, ss)
        u, v = random_unitary(rng, qq), random_unitary(rng, ss)

        def fn(blocks):
            big = np.zeros((qq, ss), dtype=complex)
            big[:q, :s] = blocks[0]
            return [u @ big @ v]

        return map_from_function(dom, cod, fn)
    cod = SpaceDescriptor.matrices(qq, ss)
    a = random_matrix(rng, cod.dim, dom.dim)
    f = BlockLinearMap(dom, cod, a)
    return f.scaled(float(rng.uniform(0.3, 1.0)) / cb_norm_value(f))


def random_system(rng, max_n=3, max_q=2):
    from opramsey.opspace import SpaceDescriptor

    n = int(rng.integers(1, max_n + 1))
    return SpaceDescriptor.full([(int(q), int(q)) for q in rng.integers(1, max_q + 1, size=n)], category="Osy")


def random_unital_map(rng, X, Y, cp=True):
    """A unital map X -> Y; with ``cp=False`` a large unit-killing term usually breaks positivity."""
    from opramsey.fraisse import random_ucp_map
    from opramsey.opspace import BlockLinearMap

    f = random_ucp_map(X, Y, rng)
    if cp:
        return f
    k = random_matrix(rng, Y.dim, X.dim)
    unit = X.from_ambient(X.unit)
    state = np.zeros(X.dim, dtype=complex)
    state[np.flatnonzero(unit)[0]] = 1.0 / unit[np.flatnonzero(unit)[0]]
    kill = k - np.outer(k @ unit, state)
    return BlockLinearMap(X, Y, f.action + 3.0 * kill)


def perturb_instance(rng, q, d, eps):
    """CP maps ψ_1..ψ_{d-1}, φ_d on M_q whose units sum to within eps/2 of 1."""
    from opramsey.opspace import SpaceDescriptor, map_from_function

    sp = SpaceDescriptor.matrices(q, category="Osy")
    g = random_matrix(rng, 2 * d * q, q)
    iso, _ = np.linalg.qr(g)
    kraus = iso.reshape(2 * d, q, q)
    maps = []
    for i in range(d):
        ks = kraus[2 * i : 2 * i + 2]
        maps.append(map_from_function(sp, sp, lambda b, ks=ks: [sum(k.conj().T @ b[0] @ k for k in ks)]))
    eta = float(rng.uniform(-0.45, 0.45)) * eps
    return maps[:-1], maps[-1].scaled(1.0 - eta)
