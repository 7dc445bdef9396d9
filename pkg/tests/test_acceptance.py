"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are also
collected into the terminal summary.
"""
import hashlib
import json
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import pytest
from conftest import (
    random_complex,
    random_diffusive_model,
    random_discrete_model,
    random_discrete_state,
    smooth_grid_state,
)

from hybridsim.cli import main
from hybridsim.discrete import hme_rhs, integrate_discrete
from hybridsim.errors import InfeasibleNoiseChoice
from hybridsim.grid import build_epsilon_model, diffusive_rhs, integrate_grid
from hybridsim.jump import ensemble_estimate, run_jump_ensemble
from hybridsim.model import (
    check_minimum_noise,
    fitted_frame,
    gauge_shift_diffusive,
    gauge_shift_discrete,
    validate_block,
)
from hybridsim.models import (
    bloch_rate_on_circle,
    build_dephasing,
    build_oscillator,
    build_three_site,
    build_two_level,
    circle_state,
    initial_discrete,
    max_bloch_rate,
)
from hybridsim.noise import NoiseSpec, build_noise_covariance, sample_increments
from hybridsim.state import PAULI, Grid, HybridStateDiscrete, TrajectoryState, bloch_field
from hybridsim.unravel import (
    ensemble_bins,
    grid_bins,
    purity_rate,
    replay_monitored,
    run_diffusive_ensemble,
    step_monitored,
    step_pure,
)

pytestmark = pytest.mark.slow

TWO_PI = 2 * np.pi
RESULTS = []


def report(tag, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {tag} {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def zscore(mean, ref, se, floor=1e-12):
    return np.abs(mean - ref) / np.maximum(se, floor)


# A1 -------------------------------------------------------------------------

def test_a1_jump_unraveling_equivalence():
    """Ensemble vs discrete HME at M = 1e4 and 4e4.

    The 1/sqrt(M) scaling is judged on the RMS entrywise deviation pooled
    over independent nested replicates (a 4M ensemble and its first M
    trajectories); a single max-entry ratio fluctuates too much to be a
    reliable witness of the expected factor 2.
    """
    t0 = time.perf_counter()
    model, init = build_three_site()
    times = [0.25, 0.5, 0.75, 1.0]
    ref = integrate_discrete(initial_discrete(init, model), model, 1.0, 1e-3, sample_times=times).blocks
    M, R = 10_000, 6

    def deviation(e):
        est = ensemble_estimate(e)
        d = est.mean - ref
        z = np.maximum(zscore(d.real, 0, est.stderr.real), zscore(d.imag, 0, est.stderr.imag))
        parts = np.concatenate([d.real.ravel(), d.imag.ravel()])
        return np.abs(parts).max(), np.mean(parts ** 2), z.max()

    sq1, sq4, zs, single = [], [], [], None
    for r in range(R):
        ens = run_jump_ensemble(init, model, 1.0, 1e-3, 4 * M, seed=20240601, sample_times=times,
                                first_index=4 * M * r)
        m1, s1, z1 = deviation(ens.subset(M))
        m4, s4, z4 = deviation(ens)
        sq1.append(s1)
        sq4.append(s4)
        if r == 0:
            zs, single = (z1, z4), m1 / m4
    ratio = np.sqrt(np.mean(sq1) / np.mean(sq4))
    elapsed = time.perf_counter() - t0
    ok = max(zs) <= 5 and ratio >= 1.8 and elapsed < 120
    report("A1", "jump unraveling reproduces the discrete HME", ok,
           f"max z(1e4)={zs[0]:.2f}, max z(4e4)={zs[1]:.2f}, RMS deviation ratio over {R} replicates={ratio:.2f} "
           f"(single-run max ratio {single:.2f}), {elapsed:.1f}s")


# A2 -------------------------------------------------------------------------

def test_a2_diffusive_unraveling_equivalence():
    t0 = time.perf_counter()
    G = 0.8
    model = build_two_level(G)
    grid = Grid.interval(128, 0.0, TWO_PI)
    init = circle_state(grid)
    h = grid.spacing[0]
    n = int(np.ceil(0.3 / (0.25 * h * h)))
    sol = integrate_grid(init, model, 0.3, 0.3 / n, sample_times=[0.0, 0.3])
    # the zero choice is infeasible for G^2 > 1/2; a real quantum noise is
    spec = NoiseSpec("custom", C=[[1.0]])
    ens = run_diffusive_ensemble(init, model, 0.3, 5e-4, 10_000, seed=7, spec=spec, sample_times=[0.0, 0.3])
    obs = np.array([np.eye(2), *PAULI])
    mean, se = ensemble_bins(ens, 1, grid, 8, obs)
    ref = grid_bins(sol.blocks[-1], grid, 8, obs)
    z = zscore(mean, ref, se)
    elapsed = time.perf_counter() - t0
    ok = z.max() <= 5 and elapsed < 300
    report("A2", "diffusive unraveling reproduces the grid HME", ok,
           f"max z over 16 bins x (marginal, 3 Bloch fields)={z.max():.2f}, {elapsed:.1f}s")


# A3 -------------------------------------------------------------------------

def max_bloch_length(G, t_end, n=128):
    grid = Grid.interval(n, 0.0, TWO_PI)
    h = grid.spacing[0]
    steps = int(np.ceil(t_end / (0.25 * h * h)))
    dt = t_end / steps
    times = dt * np.arange(0, steps + 1, 10)
    with pytest.warns(UserWarning) if G * G > 1 else nullcontext():
        sol = integrate_grid(circle_state(grid), build_two_level(G), t_end, dt, sample_times=times)
    _, s = bloch_field(sol.blocks)
    return np.linalg.norm(s, axis=-1).max(axis=-1), sol


def test_a3_positivity_boundary():
    t0 = time.perf_counter()
    errs = []
    for G in (0.0, 0.5, 1.0, 1.2, 1.5):
        c = -G / 2
        errs.append(abs(bloch_rate_on_circle(G, np.arccos(c)) - (G * G - 1)))
        errs.append(abs(max_bloch_rate(G) - (G * G - 1)))
    analytic = max(errs)
    lengths = {G: max_bloch_length(G, 0.5)[0].max() for G in (0.0, 0.5, 1.0)}
    viol, _ = max_bloch_length(1.2, 0.2)
    elapsed = time.perf_counter() - t0
    ok = analytic <= 1e-12 and all(v <= 1 + 1e-4 for v in lengths.values()) and viol.max() > 1 + 1e-3 \
        and elapsed < 60
    detail = ", ".join(f"G={G}: {v - 1:+.1e}" for G, v in lengths.items())
    report("A3", "positivity boundary G^2 <= 1", ok,
           f"analytic err={analytic:.1e}; max|s|-1 {detail}; G=1.2: {viol.max() - 1:+.1e}, {elapsed:.1f}s")


# A4 -------------------------------------------------------------------------

def threshold_model(rng):
    """Random block at the minimum-noise threshold, rank D == rank G == r."""
    A, N = rng.integers(1, 4), rng.integers(1, 4)
    r = rng.integers(1, min(A, N) + 1)
    U, _ = np.linalg.qr(rng.normal(size=(N, N)))
    Ur = U[:, :r]
    K = random_complex(rng, (r, A)) if rng.random() < 0.5 else rng.normal(size=(r, A)).astype(complex)
    B = rng.normal(size=(r, r))
    C = B @ B.T + 0.1 * np.eye(r)
    G = Ur @ K
    DC = Ur @ C @ Ur.T
    DQ = K.conj().T @ np.linalg.inv(C) @ K
    return 0.5 * (DQ + DQ.conj().T), 0.5 * (DC + DC.T), G


def test_a4_minimum_noise_tradeoff():
    rng = np.random.default_rng(44)
    worst, consistent, at_threshold = 0.0, True, True
    for _ in range(100):
        DQ, DC, G = threshold_model(rng)
        ok, info = check_minimum_noise(DQ, DC, G)
        DQf, DCf, _, r = fitted_frame(DQ, DC, G)
        worst = max(worst, np.abs(DCf[:r, :r] @ DQf[:r, :r] - np.eye(r)).max())
        at_threshold &= ok
        consistent &= info["report"].consistent
        # perturbations on either side of the boundary keep the verdicts consistent
        for s in (0.9, 1.1):
            consistent &= validate_block(s * DQ, DC, G).consistent
    osc = build_oscillator(2.0, DQ=np.eye(2), n_max=4).at(np.zeros(2))
    osc_ok = np.array_equal(osc["DC"], np.eye(2))
    ok = worst <= 1e-8 and consistent and at_threshold and osc_ok
    report("A4", "minimum-noise trade-off", ok,
           f"max |DC DQ - I| (fitted frame)={worst:.1e}, verdicts consistent={consistent}, "
           f"oscillator DC == I: {osc_ok}")


# A5 -------------------------------------------------------------------------

def test_a5_noise_engine():
    rng = np.random.default_rng(55)
    DQ, DC, G = np.array([[2.0]]), np.array([[1.5]]), np.array([[0.9 + 0.3j]])
    S = build_noise_covariance(DQ, DC, G, NoiseSpec("custom", C=[[0.5 + 0.2j]]))
    dt, n = 1e-2, 100_000
    dW, dxi = sample_increments(S, dt, rng, 1, size=n)
    v = np.column_stack([dxi.real, dxi.imag, dW])
    prods = v[:, :, None] * v[:, None, :]
    z = zscore(prods.mean(axis=0), S * dt, prods.std(axis=0, ddof=1) / np.sqrt(n), floor=1e-15)
    try:
        build_noise_covariance([[1.0]], [[1.0]], [[1.0]])
        minor = None
    except InfeasibleNoiseChoice as exc:
        minor = exc.minor
    ok = z.max() <= 5 and minor is not None and abs(minor + 0.5) <= 1e-12
    report("A5", "noise covariance fidelity", ok, f"max z over 3x3 covariance={z.max():.2f}, zero-choice minor={minor}")


# A6 -------------------------------------------------------------------------

def test_a6_purification():
    t0 = time.perf_counter()
    model = build_dephasing(1.0)
    dt, M = 1e-3, 10_000
    times = np.concatenate([[0.0, dt], np.arange(1, 6) * 1.0])
    ens = run_diffusive_ensemble(TrajectoryState(0.0, sigma=0.5 * np.eye(2)), model, 5.0, dt, M, seed=66,
                                 mode="mixed", sample_times=times)
    dp = (ens.purity(1) - ens.purity(0)) / dt
    rate, se = dp.mean(), dp.std(ddof=1) / np.sqrt(M)
    theory = purity_rate(0.5 * np.eye(2), model)
    final = ens.purity(len(times) - 1).mean()
    elapsed = time.perf_counter() - t0
    ok = abs(rate - theory) <= 3 * se and rate > 0 and abs(final - 1) <= 1e-2
    report("A6", "purification under full-noise unraveling", ok,
           f"empirical rate={rate:.4f} +- {se:.4f} vs {theory:.4f}, E[tr sigma^2](t=5)={final:.4f}, {elapsed:.1f}s")


# A7 -------------------------------------------------------------------------

def test_a7_monitoring_replay():
    model = build_two_level(1.0).replace(H=0.4 * PAULI[0])
    dt, steps = 1e-3, 500
    psi0 = np.array([0.6, 0.8j])
    times = dt * np.arange(steps + 1)
    ens = run_diffusive_ensemble(TrajectoryState(1.0, psi=psi0), model, steps * dt, dt, 20, seed=77,
                                 mode="monitored", sample_times=times)
    exact = all(np.array_equal(replay_monitored(psi0, ens.x[m], model, dt), ens.states[m]) for m in range(20))
    rng = np.random.default_rng(7)
    traj, worst = TrajectoryState(1.0, psi=psi0), 0.0
    for _ in range(steps):
        dW = np.sqrt(dt) * rng.normal(size=1)
        a = step_monitored(traj, model, dt, dW=dW)
        b = step_pure(traj, model, NoiseSpec("monitored"), dt, increments=(dW, dW.astype(complex)))
        worst = max(worst, np.abs(a.psi - b.psi).max(), np.abs(a.x - b.x).max())
        traj = TrajectoryState(a.x, psi=a.psi)
    ok = exact and worst <= 1e-10
    report("A7", "monitoring replay", ok, f"replay bit-identical={exact}, max per-step stepper gap={worst:.1e}")


# A8 -------------------------------------------------------------------------

def smooth_qubit_state(lat):
    x = lat.axis(0)
    s = np.stack([0.6 * np.cos(x), 0.3 * np.sin(2 * x), 0.5 * np.sin(x)], axis=-1)
    w = (1.0 + 0.4 * np.cos(x + 0.3)) / TWO_PI
    return 0.5 * w[:, None, None] * (np.eye(2) + np.einsum("xk,kij->xij", s, PAULI))


def eps_rhs(model, lat, blocks):
    em = build_epsilon_model(model, lat)
    return hme_rhs(HybridStateDiscrete(em.points, blocks), em)


def test_a8_continuum_limit():
    m = build_two_level(0.6).replace(H=0.3 * PAULI[0])
    errs = []
    for n in (32, 64, 128):
        lat = Grid.interval(n, 0.0, TWO_PI)
        rho = smooth_qubit_state(lat)
        errs.append(np.abs(eps_rhs(m, lat, rho) - diffusive_rhs(rho, m, lat, method="spectral")).max())
    order = np.polyfit(np.log([1, 0.5, 0.25]), np.log(errs), 1)[0]
    lat = Grid.interval(64, 0.0, TWO_PI)
    rho = smooth_qubit_state(lat)
    dg = diffusive_rhs(rho, build_two_level(0.8), lat) - diffusive_rhs(rho, build_two_level(0.0), lat)
    de = eps_rhs(build_two_level(0.8), lat, rho) - eps_rhs(build_two_level(0.0), lat, rho)
    cross = np.abs(dg - de).max()
    half = np.abs(0.5 * dg - de).max()
    ok = order >= 1.8 and cross <= 1e-12 and half > 1e-3
    report("A8", "lattice model continuum limit", ok,
           f"fitted order={order:.2f}, cross-term mismatch={cross:.1e} (half-coefficient variant {half:.1e})")


# A9 -------------------------------------------------------------------------

def test_a9_conservation_and_gauge():
    model, init = build_three_site()
    disc = integrate_discrete(initial_discrete(init, model), model, 1.0, 1e-3,
                              sample_times=np.linspace(0, 1, 11)).trace_drift()
    grid_drift = max(max_bloch_length(G, 0.3)[1].trace_drift() for G in (0.5, 0.8))
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(50):
        K, d, A = rng.integers(1, 5), rng.integers(1, 4), rng.integers(1, 4)
        m = random_discrete_model(rng, K, d, A)
        s = random_discrete_state(rng, K, d)
        r1 = hme_rhs(s, m)
        r2 = hme_rhs(s, gauge_shift_discrete(m, random_complex(rng, (A, K))))
        worst = max(worst, np.abs(r1 - r2).max() / max(1.0, np.abs(r1).max()))
    for _ in range(50):
        d, A = rng.integers(1, 4), rng.integers(1, 4)
        m = random_diffusive_model(rng, d, A, 1)
        grid = Grid.interval(16, 0.0, TWO_PI)
        s = smooth_grid_state(grid, d, int(rng.integers(1000)))
        r1 = diffusive_rhs(s, m)
        r2 = diffusive_rhs(s, gauge_shift_diffusive(m, random_complex(rng, A)))
        worst = max(worst, np.abs(r1 - r2).max() / max(1.0, np.abs(r1).max()))
    ok = disc <= 1e-8 and grid_drift <= 1e-6 and worst <= 1e-12
    report("A9", "conservation and gauge invariance", ok,
           f"trace drift discrete={disc:.1e}, grid={grid_drift:.1e}, gauge RHS change={worst:.1e}")


# A10 ------------------------------------------------------------------------

def _tree(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_a10_cli_determinism(tmp_path):
    cfg = tmp_path / "jump.json"
    cfg.write_text(json.dumps({"model": {"preset": "three-site"},
                               "numerics": {"dt": 1e-3, "t_end": 1.0, "n_trajectories": 10_000, "master_seed": 5},
                               "output": {"sample_times": [0, 0.5, 1.0], "export_trajectories": 3}}))
    codes = [main(["unravel-jump", "--config", str(cfg), "--out", str(tmp_path / k)]) for k in ("a", "b")]
    same = _tree(tmp_path / "a") == _tree(tmp_path / "b")
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"preset": "two-level:G=1.2"},
                               "numerics": {"grid": {"n": 64, "lower": 0, "upper": TWO_PI}}}))
    v_code = main(["validate", "--config", str(bad), "--out", str(tmp_path / "v")])
    psd = json.loads((tmp_path / "v" / "validation.json").read_text())["worst"]["psd_ok"]
    io_code = main(["validate", "--config", str(tmp_path / "missing.json")])
    ok = codes == [0, 0] and same and "max_deviation_vs_hme" in summary and v_code == 2 and psd is False \
        and io_code == 4
    report("A10", "CLI determinism and exit codes", ok,
           f"byte-identical={same}, validate G=1.2 exit={v_code} psd_ok={psd}, missing config exit={io_code}, "
           f"max z vs HME={summary.get('max_deviation_in_stderr', float('nan')):.2f}")
