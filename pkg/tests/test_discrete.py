import numpy as np
import pytest
from conftest import random_discrete_model, random_discrete_state
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsim.discrete import hme_rhs, integrate_discrete, kinetic_rhs
from hybridsim.errors import NonFinite, ShapeMismatch
from hybridsim.model import DiscreteModel
from hybridsim.models import build_three_site
from hybridsim.state import HybridStateDiscrete

LOWER = np.array([[0, 0], [1, 0]], dtype=complex)  # |0> (excited) -> |1> (ground)


def damping_model():
    gens = LOWER[None, None, None]
    return DiscreteModel([0], np.zeros((1, 2, 2)), gens)


def excited():
    return HybridStateDiscrete([0], np.array([np.diag([1.0, 0.0])]).astype(complex))


def test_von_neumann_only(rng):
    m = random_discrete_model(rng, 3, 3, 1)
    m = m.replace(generators=np.zeros_like(m.generators))
    s = random_discrete_state(rng, 3, 3)
    expected = np.array([-1j * (H @ b - b @ H) for H, b in zip(m.H, s.blocks)])
    np.testing.assert_allclose(hme_rhs(s, m), expected, atol=1e-14)


def test_damping_rate():
    rhs = hme_rhs(excited(), damping_model())
    np.testing.assert_allclose(rhs[0], np.diag([-1.0, 1.0]), atol=1e-15)


def test_two_point_transport():
    gens = np.zeros((1, 2, 2, 2, 2), dtype=complex)
    gens[0, 1, 0] = np.eye(2)
    m = DiscreteModel([0, 1], np.zeros((2, 2, 2)), gens)
    sigma = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    s = HybridStateDiscrete([0, 1], np.array([sigma, np.zeros((2, 2))]))
    r = hme_rhs(s, m)
    np.testing.assert_allclose(r[0], -sigma)
    np.testing.assert_allclose(r[1], sigma)
    sol = integrate_discrete(s, m, 1.0, 1e-3)
    np.testing.assert_allclose(sol.blocks[-1, 1], (1 - np.exp(-1.0)) * sigma, atol=1e-12)


def test_zero_model_constant(rng):
    m = DiscreteModel([0, 1], np.zeros((2, 2, 2)), np.zeros((0, 2, 2, 2, 2)))
    s = random_discrete_state(rng, 2, 2)
    sol = integrate_discrete(s, m, 1.0, 0.1)
    np.testing.assert_array_equal(sol.blocks[-1], s.blocks)


def test_rk4_damping_accuracy_and_order():
    m, s = damping_model(), excited()
    sol = integrate_discrete(s, m, 1.0, 1e-3)
    assert abs(sol.blocks[-1, 0, 0, 0].real - np.exp(-1.0)) <= 1e-8
    errs = []
    for dt in (0.1, 0.05):
        p = integrate_discrete(s, m, 1.0, dt).blocks[-1, 0, 0, 0].real
        errs.append(abs(p - np.exp(-1.0)))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)
    eul = integrate_discrete(s, m, 1.0, 1e-3, scheme="euler").blocks[-1, 0, 0, 0].real
    assert 1e-5 < abs(eul - np.exp(-1.0)) < 1e-3


def test_sample_times_and_shapes():
    m, s = damping_model(), excited()
    sol = integrate_discrete(s, m, 1.0, 0.01, sample_times=[0.0, 0.25, 1.0])
    np.testing.assert_allclose(sol.times, [0.0, 0.25, 1.0])
    assert sol.blocks.shape == (3, 1, 2, 2)
    with pytest.raises(ValueError):
        integrate_discrete(s, m, 1.0, 0.01, sample_times=[0.123456])
    with pytest.raises(ShapeMismatch):
        hme_rhs(HybridStateDiscrete([0], np.zeros((1, 3, 3))), m)


def test_nonfinite_detected():
    gens = (1e4 * LOWER)[None, None, None]
    m = DiscreteModel([0], np.zeros((1, 2, 2)), gens)
    with pytest.raises(NonFinite):
        integrate_discrete(excited(), m, 50.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), K=st.integers(1, 4), d=st.integers(1, 3), A=st.integers(1, 3))
def test_rhs_properties(seed, K, d, A):
    rng = np.random.default_rng(seed)
    m = random_discrete_model(rng, K, d, A)
    s1, s2 = random_discrete_state(rng, K, d), random_discrete_state(rng, K, d)
    r1, r2 = hme_rhs(s1, m), hme_rhs(s2, m)
    # trace conservation, hermiticity, linearity
    assert abs(np.trace(r1, axis1=-2, axis2=-1).sum()) < 1e-12
    np.testing.assert_allclose(r1, np.conj(np.swapaxes(r1, -1, -2)), atol=1e-12)
    a, b = rng.normal(size=2)
    mix = HybridStateDiscrete(s1.points, a * s1.blocks + b * s2.blocks)
    np.testing.assert_allclose(hme_rhs(mix, m), a * r1 + b * r2, atol=1e-12)
    # classical consistency with the kinetic equation
    np.testing.assert_allclose(np.trace(r1, axis1=-2, axis2=-1).real, kinetic_rhs(s1.blocks, m), atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_integration_conserves_and_stays_positive(seed):
    rng = np.random.default_rng(seed)
    m = random_discrete_model(rng, 3, 2, 2)
    s = random_discrete_state(rng, 3, 2)
    sol = integrate_discrete(s, m, 1.0, 1e-3, sample_times=np.linspace(0, 1, 11))
    assert sol.trace_drift() <= 1e-8
    assert sol.min_eigenvalue() >= -1e-6
    herm = np.abs(sol.blocks - np.conj(np.swapaxes(sol.blocks, -1, -2))).max()
    assert herm <= 1e-12


def test_three_site_trace_drift():
    m, init = build_three_site()
    s = HybridStateDiscrete.pure(m.points, init.x, init.psi)
    sol = integrate_discrete(s, m, 1.0, 1e-3, sample_times=np.linspace(0, 1, 11))
    assert sol.trace_drift() <= 1e-8
