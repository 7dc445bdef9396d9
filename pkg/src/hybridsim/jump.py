"""Jump unraveling of the discrete hybrid master equation.

A trajectory is a classical point ``x_t`` and a normalized ``psi_t``.
Between jumps ``psi`` follows the norm-restored frictional Schrodinger
flow; a jump along channel ``(alpha, x')`` happens at rate
``|L_alpha(x', x) psi|^2`` and maps ``psi`` to the normalized image.

Jumps are scheduled per step: with probability ``T(x) dt`` the step is a
jump, otherwise a drift step.  This is first order in ``dt``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .discrete import _check_sampling
from .errors import NonFinite, ShapeMismatch, ZeroTotalRate
from .kernels import resolve_backend, run_jump_batch
from .model import gauge_shift_discrete
from .rng import batches, trajectory_stream
from .state import HybridStateDiscrete, TrajectoryState, encode_complex

RATE_WARN = 0.1


def _index(model, x):
    if x in model.points:
        return model.points.index(x)
    if isinstance(x, (int, np.integer)) and 0 <= x < model.n_points:
        return int(x)
    raise KeyError(f"unknown classical point {x!r}")


def _diag_shift(psi, model, k):
    """``<L_a(x, x)>`` for every generator at point index ``k``."""
    D = model.generators[:, k, k]
    return np.einsum("i,aij,j->a", psi.conj(), D, psi)


@dataclass
class JumpRates:
    """``rates[a, i]``: rate of jumping to point index ``i`` via generator ``a``."""

    rates: np.ndarray
    source: int

    @property
    def total(self):
        return float(self.rates.sum())


def jump_rates(psi, x, model, normalize=False):
    """Rates ``T_a(x', x) = |L_a(x', x) psi|^2`` out of point ``x``.

    With ``normalize`` the diagonal generators are first shifted by minus
    their expectation in ``psi``.
    """
    k = _index(model, x)
    psi = np.asarray(psi, dtype=complex)
    v = np.einsum("aiuv,v->aiu", model.generators[:, :, k], psi)
    if normalize:
        ell = _diag_shift(psi, model, k)
        v[:, k] -= ell[:, None] * psi
    return JumpRates(np.sum(np.abs(v) ** 2, axis=-1), k)


def frictional_h(model, x):
    """``H_fr(x)`` with ``-i H_fr = -1/2 sum_{y,a} L_a(y,x)^dag L_a(y,x)``."""
    k = _index(model, x)
    return -0.5j * model.loss_operators()[k]


def drift_generator(psi, x, model, normalize=False):
    """Linear part ``M`` of the drift ``dpsi/dt = (M + c) psi``.

    The scalar ``c = T/2`` only restores the norm and is absorbed by the
    renormalization after each step.
    """
    k = _index(model, x)
    M = -1j * (model.H[k] + frictional_h(model, x))
    if normalize:
        ell = _diag_shift(psi, model, k)
        M = M + np.einsum("a,aij->ij", ell.conj(), model.generators[:, k, k])
        M = M - 0.5 * np.sum(np.abs(ell) ** 2) * np.eye(model.dim)
    return M


def drift_step(psi, x, model, dt, normalize=False):
    """One RK4 step of the frictional flow followed by renormalization."""
    psi = np.asarray(psi, dtype=complex)
    T = jump_rates(psi, x, model, normalize).total
    if T * dt > RATE_WARN:
        warnings.warn(f"T*dt = {T * dt:.3g} exceeds {RATE_WARN}; jump scheduling is inaccurate", stacklevel=2)
    M = drift_generator(psi, x, model, normalize)
    k1 = M @ psi
    k2 = M @ (psi + 0.5 * dt * k1)
    k3 = M @ (psi + 0.5 * dt * k2)
    k4 = M @ (psi + dt * k3)
    out = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite("drift step produced non-finite amplitudes")
    return out / np.linalg.norm(out)


def sample_and_apply_jump(psi, x, rates, model, rng, normalize=False):
    """Pick a channel with probability ``T_a(x', x) / T(x)`` and jump.

    Returns ``(x', psi', alpha)`` with ``x'`` a point label.
    """
    total = rates.total
    if not total > 0:
        raise ZeroTotalRate(f"no jump possible from {model.points[rates.source]!r}")
    flat = rates.rates.ravel()
    c = int(rng.choice(flat.size, p=flat / flat.sum()))
    a, i = divmod(c, rates.rates.shape[1])
    k = rates.source
    L = model.generators[a, i, k]
    new = L @ psi
    if normalize and i == k:
        new = new - _diag_shift(psi, model, k)[a] * psi
    new = new / np.sqrt(rates.rates[a, i])
    return model.points[i], new / np.linalg.norm(new), a


def normalize_generators(model, psi_ref):
    """Static normalization: shift diagonal generators to zero mean in ``psi_ref``.

    ``psi_ref`` is one vector or one per point, shape (K, d).  The
    compensating Hamiltonian keeps the master equation unchanged.
    """
    psi_ref = np.asarray(psi_ref, dtype=complex)
    if psi_ref.ndim == 1:
        psi_ref = np.broadcast_to(psi_ref, (model.n_points, model.dim))
    ell = np.stack([-_diag_shift(psi_ref[k], model, k) for k in range(model.n_points)], axis=1)
    return gauge_shift_discrete(model, ell)


# compiled/batched runs ------------------------------------------------------

def jump_tables(model, tol=0.0):
    """Per-source channel tables consumed by the trajectory kernels."""
    K, d = model.n_points, model.dim
    chans = model.channels(tol)
    C = max(1, max((len(c) for c in chans), default=0))
    ops = np.zeros((K, C, d, d), dtype=complex)
    dest = np.zeros((K, C), dtype=np.int64)
    alpha = np.zeros((K, C), dtype=np.int64)
    diag = np.zeros((K, C), dtype=np.bool_)
    nch = np.zeros(K, dtype=np.int64)
    for k, ch in enumerate(chans):
        nch[k] = len(ch)
        for c, (a, i) in enumerate(ch):
            ops[k, c] = model.generators[a, i, k]
            dest[k, c], alpha[k, c], diag[k, c] = i, a, i == k
    Gamma = model.loss_operators()
    return (np.ascontiguousarray(model.H), Gamma, ops, dest, alpha, nch, diag)


def _sample_pure(blocks, u):
    """Draw ``(x index, psi)`` from a hybrid density using two uniforms."""
    p = np.trace(blocks, axis1=-2, axis2=-1).real
    k = int(np.searchsorted(np.cumsum(p) / p.sum(), u[0], side="right"))
    k = min(k, len(p) - 1)
    w, U = np.linalg.eigh(blocks[k] / p[k])
    w = np.clip(w, 0.0, None)
    j = min(int(np.searchsorted(np.cumsum(w) / w.sum(), u[1], side="right")), len(w) - 1)
    return k, U[:, j].astype(complex)


def _initial(init, model):
    if isinstance(init, TrajectoryState):
        psi = np.asarray(init.psi, dtype=complex)
        if psi.shape != (model.dim,):
            raise ShapeMismatch(f"psi of shape {psi.shape}, model dim {model.dim}")
        return _index(model, init.x), psi / np.linalg.norm(psi)
    if isinstance(init, HybridStateDiscrete):
        return init.blocks
    if isinstance(init, tuple) and len(init) == 2:
        return _initial(TrajectoryState(init[0], psi=init[1]), model)
    raise TypeError("initial condition must be a TrajectoryState, (x, psi) or HybridStateDiscrete")


def _draw(init0, seed, index, n_steps):
    rng = trajectory_stream(seed, index)
    if isinstance(init0, tuple):
        x0, psi0 = init0
    else:
        x0, psi0 = _sample_pure(init0, rng.random(2))
    return x0, psi0, rng.random((n_steps, 2))


@dataclass
class JumpEnsemble:
    """Sampled jump trajectories: indices ``x[m, s]`` into ``points``."""

    points: list
    times: np.ndarray
    x: np.ndarray
    psi: np.ndarray
    jumps: np.ndarray
    max_rate_dt: float
    events: list = field(default_factory=list)

    @property
    def n_trajectories(self):
        return self.x.shape[0]

    def subset(self, n):
        return JumpEnsemble(self.points, self.times, self.x[:n], self.psi[:n], self.jumps[:n], self.max_rate_dt,
                            self.events[:n])

    def records(self, m):
        """JSON-lines records of trajectory ``m``."""
        out = []
        for s, t in enumerate(self.times):
            p = self.points[int(self.x[m, s])]
            out.append({
                "t": float(t),
                "x": list(p) if isinstance(p, tuple) else p,
                "psi": encode_complex(self.psi[m, s]),
                "jumps_so_far": int(self.jumps[m, s]),
            })
        return out


def run_jump_ensemble(init, model, t_end, dt, n_trajectories, seed, sample_times=None, normalize=True,
                      backend=None, batch_size=1024, log_events=False, first_index=0):
    """Simulate ``n_trajectories`` jump trajectories.

    Trajectory ``m`` uses the stream ``(seed, first_index + m)`` so results
    do not depend on ``batch_size`` or on the backend beyond rounding.
    """
    backend = resolve_backend(backend)
    n_steps, steps = _check_sampling(t_end, dt, sample_times)
    order = np.argsort(steps, kind="stable")
    sorted_steps = steps[order]
    tables = jump_tables(model)
    init0 = _initial(init, model)
    S = len(steps)
    X = np.zeros((n_trajectories, S), dtype=np.int64)
    P = np.zeros((n_trajectories, S, model.dim), dtype=complex)
    J = np.zeros((n_trajectories, S), dtype=np.int64)
    events = []
    max_rate = 0.0
    for lo, hi in batches(n_trajectories, batch_size):
        draws = [_draw(init0, seed, first_index + m, n_steps) for m in range(lo, hi)]
        x0 = np.array([d[0] for d in draws], dtype=np.int64)
        psi0 = np.array([d[1] for d in draws], dtype=complex).reshape(hi - lo, model.dim)
        u = np.array([d[2] for d in draws]).reshape(hi - lo, n_steps, 2)
        p, x, j, mr, ev = run_jump_batch(psi0, x0, tables, u, dt, sorted_steps, normalize, backend, log_events)
        P[lo:hi][:, order] = p
        X[lo:hi][:, order] = x
        J[lo:hi][:, order] = j
        events.extend(ev)
        max_rate = max(max_rate, mr)
    if max_rate > RATE_WARN:
        warnings.warn(f"max T*dt = {max_rate:.3g} exceeds {RATE_WARN}; reduce dt", stacklevel=2)
    if not np.all(np.isfinite(P)):
        raise NonFinite("non-finite amplitudes in jump ensemble")
    return JumpEnsemble(list(model.points), steps * dt, X, P, J, max_rate, events)


def simulate_jump_trajectory(init, model, t_end, dt, seed, sample_times=None, normalize=True, index=0,
                             backend=None):
    """One trajectory (stream ``(seed, index)``) with its jump log.

    Returns ``(states, events)``: a list of :class:`TrajectoryState` at the
    sample times (every step by default) and an array of
    ``(step, source index, destination index, alpha)`` rows.
    """
    if sample_times is None:
        n = int(round(t_end / dt))
        sample_times = np.arange(n + 1) * dt
    ens = run_jump_ensemble(init, model, t_end, dt, 1, seed, sample_times, normalize, backend,
                            log_events=True, first_index=index)
    states = [
        TrajectoryState(model.points[int(ens.x[0, s])], psi=ens.psi[0, s], t=float(t), jumps=int(ens.jumps[0, s]))
        for s, t in enumerate(ens.times)
    ]
    return states, ens.events[0]


@dataclass
class EnsembleEstimate:
    """Ensemble mean of ``psi psi^dag delta(z, x)`` with per-entry standard errors.

    ``stderr`` holds the standard error of the real part in its real part
    and that of the imaginary part in its imaginary part.
    """

    points: list
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n: int

    def state(self, s):
        return HybridStateDiscrete(self.points, self.mean[s])


def ensemble_estimate(ensemble, sample_index=None):
    """Empirical hybrid density from a :class:`JumpEnsemble`."""
    M = ensemble.n_trajectories
    if M < 1:
        raise ValueError("need at least one trajectory")
    K = len(ensemble.points)
    d = ensemble.psi.shape[-1]
    sel = range(len(ensemble.times)) if sample_index is None else np.atleast_1d(sample_index)
    mean = np.zeros((len(sel), K, d, d), dtype=complex)
    se = np.zeros_like(mean)
    for out, s in enumerate(sel):
        psi = ensemble.psi[:, s]
        P = np.einsum("mi,mj->mij", psi, psi.conj())
        for k in range(K):
            Pk = np.where((ensemble.x[:, s] == k)[:, None, None], P, 0.0)
            mean[out, k] = Pk.mean(axis=0)
            if M > 1:
                se[out, k] = (Pk.real.std(axis=0, ddof=1) + 1j * Pk.imag.std(axis=0, ddof=1)) / np.sqrt(M)
    return EnsembleEstimate(list(ensemble.points), ensemble.times[list(sel)], mean, se, M)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
