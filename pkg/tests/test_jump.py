import numpy as np
import pytest
from conftest import random_complex, random_hermitian
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from hybridsim.errors import ZeroTotalRate
from hybridsim.jump import (
    JumpEnsemble,
    drift_step,
    ensemble_estimate,
    jump_rates,
    normalize_generators,
    run_jump_ensemble,
    sample_and_apply_jump,
    simulate_jump_trajectory,
)
from hybridsim.model import DiscreteModel, gauge_shift_discrete
from hybridsim.models import build_three_site
from hybridsim.state import TrajectoryState

LOWER = np.array([[0, 0], [1, 0]], dtype=complex)
EXC = np.array([1, 0], dtype=complex)
GND = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def one_point(L, H=None):
    H = np.zeros((1, 2, 2)) if H is None else np.asarray(H)[None]
    return DiscreteModel([0], H, np.asarray(L, dtype=complex)[None, None, None])


def two_point(rate=1.0, back=True):
    gens = np.zeros((2 if back else 1, 2, 2, 1, 1), dtype=complex)
    gens[0, 1, 0] = np.sqrt(rate)
    if back:
        gens[1, 0, 1] = np.sqrt(rate)
    return DiscreteModel([0, 1], np.zeros((2, 1, 1)), gens)


def test_rate_examples():
    m = one_point(LOWER)
    assert jump_rates(EXC, 0, m).total == pytest.approx(1.0)
    assert jump_rates(GND, 0, m).total == 0.0
    gens = np.zeros((1, 2, 2, 2, 2), dtype=complex)
    gens[0, 1, 0] = np.sqrt(2) * np.eye(2)
    m2 = DiscreteModel([0, 1], np.zeros((2, 2, 2)), gens)
    psi = random_complex(np.random.default_rng(0), 2)
    psi /= np.linalg.norm(psi)
    assert jump_rates(psi, 0, m2).total == pytest.approx(2.0)
    assert jump_rates(psi, 0, m2).rates[0, 1] == pytest.approx(2.0)


def test_drift_without_generators_is_unitary(rng):
    H = random_hermitian(rng, 2)
    m = DiscreteModel([0], H[None], np.zeros((0, 1, 1, 2, 2)))
    psi = PLUS.copy()
    out = drift_step(psi, 0, m, 0.01)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(out, expm(-1j * H * 0.01) @ psi, atol=1e-11)


def test_drift_matches_nonlinear_flow():
    m = one_point(LOWER)
    Gam = LOWER.conj().T @ LOWER

    def f(t, y):
        psi = y[:2] + 1j * y[2:]
        g = np.vdot(psi, Gam @ psi).real
        d = -0.5 * Gam @ psi + 0.5 * g * psi
        return np.concatenate([d.real, d.imag])

    ref = solve_ivp(f, (0, 1), np.concatenate([PLUS.real, PLUS.imag]), rtol=1e-12, atol=1e-12).y[:, -1]
    ref = ref[:2] + 1j * ref[2:]
    psi = PLUS.copy()
    for _ in range(100):
        psi = drift_step(psi, 0, m, 0.01)
    np.testing.assert_allclose(psi, ref, atol=1e-9)
    # excited amplitude shrinks relative to the ground amplitude
    assert abs(psi[0]) < abs(psi[1])


def test_drift_keeps_frictional_eigenstate():
    m = one_point(LOWER)
    for psi0 in (GND, EXC):
        out = drift_step(psi0, 0, m, 0.05)
        assert abs(abs(np.vdot(psi0, out)) - 1.0) < 1e-14


def test_single_channel_jump_is_deterministic():
    m = two_point(back=False)
    rng = np.random.default_rng(0)
    psi = np.array([1.0 + 0j])
    r = jump_rates(psi, 0, m)
    for _ in range(5):
        x, new, a = sample_and_apply_jump(psi, 0, r, m, rng)
        assert x == 1 and a == 0
    with pytest.raises(ZeroTotalRate):
        sample_and_apply_jump(psi, 1, jump_rates(psi, 1, m), m, rng)


def test_channel_frequencies():
    gens = np.zeros((2, 3, 3, 1, 1), dtype=complex)
    gens[0, 1, 0] = 1.0
    gens[1, 2, 0] = np.sqrt(3.0)
    m = DiscreteModel([0, 1, 2], np.zeros((3, 1, 1)), gens)
    psi = np.array([1.0 + 0j])
    r = jump_rates(psi, 0, m)
    rng = np.random.default_rng(7)
    n = 10_000
    hits = sum(sample_and_apply_jump(psi, 0, r, m, rng)[0] == 2 for _ in range(n))
    p = hits / n
    assert abs(p - 0.75) <= 3 * np.sqrt(0.75 * 0.25 / n)


def test_lowering_jump_lands_in_ground_state():
    m = one_point(LOWER)
    x, new, _ = sample_and_apply_jump(PLUS, 0, jump_rates(PLUS, 0, m), m, np.random.default_rng(1))
    np.testing.assert_allclose(np.abs(new), np.abs(GND), atol=1e-15)


def test_zero_generators_never_jump(rng):
    H = random_hermitian(rng, 2)
    m = DiscreteModel([0, 1], np.array([H, H]), np.zeros((0, 2, 2, 2, 2)))
    states, events = simulate_jump_trajectory(TrajectoryState(0, psi=PLUS), m, 1.0, 0.01, seed=3)
    assert len(events) == 0
    assert all(s.x == 0 for s in states)
    np.testing.assert_allclose(states[-1].psi, expm(-1j * H) @ PLUS, atol=1e-10)


def test_waiting_times_are_exponential():
    m = two_point(back=False)
    dt, t_end, M = 0.01, 15.0, 10_000
    times = np.arange(int(round(t_end / dt)) + 1) * dt
    ens = run_jump_ensemble(TrajectoryState(0, psi=np.array([1.0 + 0j])), m, t_end, dt, M, seed=11,
                            sample_times=times)
    first = np.argmax(ens.jumps > 0, axis=1)
    assert np.all(ens.jumps[:, -1] == 1)
    wait = times[first]
    se = wait.std(ddof=1) / np.sqrt(M)
    assert abs(wait.mean() - 1.0) <= 3 * se
    surv = np.mean(ens.jumps[:, 100] == 0)  # t = 1
    assert abs(surv - np.exp(-1.0)) <= 3 * np.sqrt(surv * (1 - surv) / M)


def test_ensemble_estimate_small_cases():
    pts = [0, 1]
    psi = np.array([[[1, 0]], [[0, 1]]], dtype=complex)
    ens = JumpEnsemble(pts, np.array([0.0]), np.array([[0], [1]]), psi, np.zeros((2, 1), int), 0.0)
    est = ensemble_estimate(ens)
    np.testing.assert_allclose(est.mean[0, 0], 0.5 * np.diag([1, 0]))
    np.testing.assert_allclose(est.mean[0, 1], 0.5 * np.diag([0, 1]))
    one = ensemble_estimate(ens.subset(1))
    np.testing.assert_allclose(one.mean[0, 0], np.diag([1, 0]))
    np.testing.assert_allclose(one.mean[0, 1], 0)


def test_normalize_generators_noop_on_zero_diagonal():
    m, _ = build_three_site()
    m2 = normalize_generators(m, PLUS)
    np.testing.assert_allclose(m2.generators, m.generators, atol=0)
    np.testing.assert_allclose(m2.H, m.H, atol=0)


def test_dynamic_normalization_is_gauge_invariant(rng):
    m, init = build_three_site()
    gens = m.generators.copy()
    for k in range(3):
        gens[0, k, k] = random_complex(rng, (2, 2), 0.3)
    m = DiscreteModel(m.points, m.H, gens)
    shifted = gauge_shift_discrete(m, random_complex(rng, (m.n_generators, 3)))
    t = np.linspace(0, 1, 11)
    a = run_jump_ensemble(init, m, 1.0, 1e-3, 50, seed=5, sample_times=t)
    b = run_jump_ensemble(init, shifted, 1.0, 1e-3, 50, seed=5, sample_times=t)
    np.testing.assert_array_equal(a.x, b.x)
    phase = np.einsum("msi,msi->ms", a.psi.conj(), b.psi)
    np.testing.assert_allclose(np.abs(phase), 1.0, atol=1e-9)


def test_jumps_identify_the_channel():
    m, init = build_three_site()
    seen = {}
    for seed in range(4):
        _, events = simulate_jump_trajectory(init, m, 2.0, 1e-3, seed=seed)
        for _, src, dst, alpha in np.asarray(events).reshape(-1, 4):
            assert src != dst
            assert seen.setdefault((src, dst), alpha) == alpha
    assert len(seen) >= 2


def test_psi_stays_normalized():
    m, init = build_three_site()
    ens = run_jump_ensemble(init, m, 1.0, 1e-3, 200, seed=2, sample_times=np.linspace(0, 1, 11))
    np.testing.assert_allclose(np.linalg.norm(ens.psi, axis=-1), 1.0, atol=1e-8)


def test_large_rate_warns():
    m = two_point(rate=50.0)
    with pytest.warns(UserWarning):
        run_jump_ensemble(TrajectoryState(0, psi=np.array([1.0 + 0j])), m, 0.1, 0.01, 5, seed=0)


def test_batch_size_does_not_change_results():
    m, init = build_three_site()
    t = [0.0, 0.5, 1.0]
    a = run_jump_ensemble(init, m, 1.0, 1e-3, 30, seed=9, sample_times=t, batch_size=7)
    b = run_jump_ensemble(init, m, 1.0, 1e-3, 30, seed=9, sample_times=t, batch_size=64)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.psi, b.psi)
