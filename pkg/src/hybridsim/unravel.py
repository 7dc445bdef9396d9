"""Diffusive unravelings: pure, mixed and monitored trajectory steppers.

Classical update (Euler-Maruyama):
    dx = V dt - 2 Re(conj(G) <L>) dt - dW
Quantum update for pure states:
    dpsi = -i (H + H_fr) psi dt + (L_a - <L_a>) psi conj(dxi^a)
followed by renormalization.  Mixed states are advanced with the
single-step Kraus map ``sigma -> K sigma K^dag`` (plus any deterministic
decoherence remainder), which keeps them positive and coincides with the
pure update on rank-one states.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .discrete import _check_sampling
from .errors import NonFinite, ShapeMismatch
from .noise import (
    NoiseSpec,
    build_noise_covariance,
    check_monitoring_map,
    noise_factor,
    noise_target,
    split_increments,
)
from .rng import batches, trajectory_stream
from .state import HybridStateGrid, TrajectoryState, dagger


# single-state helpers -----------------------------------------------------

def _expect(state, L):
    state = np.asarray(state)
    if state.ndim == 1:
        return np.einsum("i,aij,j->a", state.conj(), L, state)
    return np.einsum("aij,ji->a", L, state)


def frictional_h_diffusive(state, x, model):
    """The operator ``-i H_fr`` at ``x`` for a pure (vector) or mixed state.

    ``-i H_fr = -1/2 [DQ^{ba} Lc_b^dag Lc_a - (X - X^dag)]`` with
    ``Lc = L - <L>`` and ``X = DQ^{ba} conj(<L_b>) L_a``.  With this sign
    the ensemble of pure trajectories reproduces the decoherence term.
    """
    c = model.at(np.atleast_1d(np.asarray(x, dtype=float)))
    L, DQ = c["L"], c["DQ"]
    ell = _expect(state, L)
    Lc = L - ell[:, None, None] * np.eye(L.shape[-1])
    Q = np.einsum("ba,bji,ajk->ik", DQ, Lc.conj(), Lc)
    X = np.einsum("ba,b,aij->ij", DQ, ell.conj(), L)
    return -0.5 * (Q - (X - X.conj().T))


def _gkls(sigma, L, D):
    Lh = dagger(L)
    gain = np.einsum("ba,aij,jk,bkl->il", D, L, sigma, Lh)
    LL = np.einsum("ba,bij,ajk->ik", D, Lh, L)
    return gain - 0.5 * (LL @ sigma + sigma @ LL)


def purity_rate(sigma, model, x=None, spec=NoiseSpec()):
    """Mean rate of change of ``tr sigma^2`` under the mixed unraveling.

    ``2 tr(sigma GKLS(sigma)) + 2 Re T^{ab} tr(A_a^dag A_b)
    + 2 Re conj(C^{ab}) tr(A_a A_b)`` with ``A_a = (L_a - <L_a>) sigma``,
    ``T`` the noise target and ``C = E[dxi dxi^T]/dt``.
    """
    x = np.zeros(model.N) if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    c = model.at(x)
    L, DQ, DC, G = c["L"], c["DQ"], c["DC"], c["G"]
    sigma = np.asarray(sigma, dtype=complex)
    T = noise_target(DQ, DC, G, spec)
    if spec.choice == "zero":
        C = np.zeros_like(T)
    elif spec.choice == "custom":
        C = np.asarray(spec.C, dtype=complex).reshape(T.shape)
    else:
        from .noise import monitoring_map

        F = monitoring_map(DC, G)
        C = F @ DC @ F.T
    ell = _expect(sigma, L)
    Am = (L - ell[:, None, None] * np.eye(L.shape[-1])) @ sigma
    rate = 2.0 * np.trace(sigma @ _gkls(sigma, L, DQ)).real
    rate += 2.0 * np.einsum("ab,aji,bji->", T, Am.conj(), Am).real
    rate += 2.0 * np.einsum("ab,aij,bji->", C.conj(), Am, Am).real
    return float(rate)


def purity_rate_sqrt(sigma, L, DQ):
    """``2 DQ^{ba} tr[(S Lc_b S)^dag (S Lc_a S)]`` with ``S = sqrt(sigma)``.

    Equals :func:`purity_rate` for the full-noise, zero-``C`` unraveling.
    """
    sigma = np.asarray(sigma, dtype=complex)
    w, U = np.linalg.eigh(sigma)
    S = (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T
    L = np.asarray(L, dtype=complex)
    ell = _expect(sigma, L)
    Y = S @ (L - ell[:, None, None] * np.eye(L.shape[-1])) @ S
    return float(2.0 * np.einsum("ba,bji,aji->", np.asarray(DQ), Y.conj(), Y).real)


# batched coefficient evaluation ---------------------------------------------

class _Coefficients:
    """Per-trajectory coefficients; constant fields become broadcast views.

    When the noise block ``(DQ, DC, G)`` is constant the derived noise
    quantities are computed once even if ``H`` or ``V`` vary with ``x``.
    """

    NOISE = ("DQ", "DC", "G")

    def __init__(self, model, spec, M, sampling=True):
        self.model, self.spec, self.M = model, spec, M
        self.sampling = sampling
        self.constant = model.is_constant()
        self._noise = None
        if model.is_constant(self.NOISE):
            c = model.at(np.zeros((1, model.N)))
            self._noise = self._derive({k: c[k][0] for k in self.NOISE})
        if self.constant:
            c = model.at(np.zeros((1, model.N)))
            self._fixed = dict(self._noise, **{k: v[0] for k, v in c.items()})

    def _derive(self, c):
        spec = self.spec
        c = dict(c)
        if spec.choice == "monitored":
            c["F"] = check_monitoring_map(c["DQ"], c["DC"], c["G"]) if c["DQ"].ndim == 2 else np.stack(
                [check_monitoring_map(q, d, g) for q, d, g in zip(c["DQ"], c["DC"], c["G"])])
        c["T"] = noise_target(c["DQ"], c["DC"], c["G"], spec)
        if spec.choice != "monitored" and self.sampling:
            if c["DQ"].ndim == 2:
                c["factor"] = noise_factor(build_noise_covariance(c["T"], c["DC"], c["G"], spec))
            else:
                c["factor"] = np.stack([noise_factor(build_noise_covariance(t, d, g, spec))
                                        for t, d, g in zip(c["T"], c["DC"], c["G"])])
        return c

    def at(self, x):
        M = x.shape[0]
        if self.constant:
            return {k: np.broadcast_to(v, (M,) + v.shape) for k, v in self._fixed.items()}
        xw = self.model.wrap(x)
        c = {k: (np.broadcast_to(f.value, (M,) + f.shape) if f.constant else np.ascontiguousarray(f.at(xw)))
             for k, f in self.model.fields.items()}
        if self._noise is None:
            return self._derive(c)
        c.update({k: np.broadcast_to(v, (M,) + v.shape) for k, v in self._noise.items()})
        return c


def _increments(c, z, dt, A, spec):
    """Map standard normals ``z`` (M, D) to ``(dW, dxi)`` for one step."""
    if spec.choice == "monitored":
        N = c["DC"].shape[-1]
        DC = c["DC"]
        # dW ~ N(0, DC dt) from the first N normals
        w, U = np.linalg.eigh(DC)
        fac = U * np.sqrt(np.clip(w, 0.0, None))[..., None, :]
        dW = np.sqrt(dt) * np.einsum("mij,mj->mi", fac, z[:, :N])
        return dW, np.einsum("man,mn->ma", c["F"], dW)
    v = np.sqrt(dt) * np.einsum("mij,mj->mi", c["factor"], z)
    return split_increments(v, A)


def noise_width(model, spec):
    """Number of standard normals consumed per step."""
    return model.N if spec.choice == "monitored" else 2 * model.A + model.N


# steppers -------------------------------------------------------------------

def _as_batch(traj):
    x = np.atleast_1d(np.asarray(traj.x, dtype=float))[None]
    if traj.mixed:
        return x, np.asarray(traj.sigma, dtype=complex)[None]
    return x, np.asarray(traj.psi, dtype=complex)[None]


def step_pure(traj, model, spec, dt, rng=None, increments=None, backend=None):
    """One pure-state step; noise from ``rng`` or given ``(dW, dxi)``."""
    x, psi = _as_batch(traj)
    coef = _Coefficients(model, spec, 1, sampling=increments is None).at(x)
    if increments is None:
        dW, dxi = _increments(coef, rng.standard_normal((1, noise_width(model, spec))), dt, model.A, spec)
    else:
        dW = np.atleast_1d(np.asarray(increments[0], dtype=float))[None]
        dxi = np.atleast_1d(np.asarray(increments[1], dtype=complex))[None]
    new, xn = kernels.pure_step(psi, x, coef["H"], coef["L"], coef["DQ"], coef["G"], coef["V"], dxi, dW, dt,
                                backend=backend)
    if not np.all(np.isfinite(new)):
        raise NonFinite("pure step produced non-finite amplitudes")
    return TrajectoryState(xn[0], psi=new[0], t=traj.t + dt, extra={"dW": dW[0], "dxi": dxi[0]})


def step_mixed(traj, model, spec, dt, rng=None, increments=None, backend=None):
    """One mixed-state step with decoherence remainder ``DQ - target``."""
    x, sigma = _as_batch(traj)
    if sigma.ndim == 2:
        sigma = np.einsum("mi,mj->mij", sigma, sigma.conj())
    coef = _Coefficients(model, spec, 1, sampling=increments is None).at(x)
    if increments is None:
        dW, dxi = _increments(coef, rng.standard_normal((1, noise_width(model, spec))), dt, model.A, spec)
    else:
        dW = np.atleast_1d(np.asarray(increments[0], dtype=float))[None]
        dxi = np.atleast_1d(np.asarray(increments[1], dtype=complex))[None]
    new, xn = kernels.mixed_step(sigma, x, coef["H"], coef["L"], coef["DQ"], coef["T"], coef["G"], coef["V"],
                                 dxi, dW, dt, backend=backend)
    if not np.all(np.isfinite(new)):
        raise NonFinite("mixed step produced a non-finite state")
    return TrajectoryState(xn[0], sigma=new[0], t=traj.t + dt, extra={"dW": dW[0], "dxi": dxi[0]})


def monitored_xi(dW, model, x=None):
    """Quantum noise ``F dW`` implied by the classical noise under monitoring."""
    x = np.zeros(model.N) if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    c = model.at(x)
    F = check_monitoring_map(c["DQ"], c["DC"], c["G"])
    return F @ np.atleast_1d(np.asarray(dW, dtype=float))


def _monitored_core(psi, x, x_next, coef, dt, backend):
    drift = kernels.diffusive_drift(psi, coef["L"], coef["G"], coef["V"])
    dW_eff = -(x_next - x - drift * dt)
    dxi = np.einsum("man,mn->ma", coef["F"], dW_eff)
    new, _ = kernels.pure_step(psi, x, coef["H"], coef["L"], coef["DQ"], coef["G"], coef["V"], dxi, dW_eff, dt,
                               backend=backend)
    return new, dW_eff


def _monitored_batch(psi, x, dW, coef, dt, backend):
    drift = kernels.diffusive_drift(psi, coef["L"], coef["G"], coef["V"])
    x_next = x + drift * dt - dW
    new, _ = _monitored_core(psi, x, x_next, coef, dt, backend)
    return new, x_next


def step_monitored(traj, model, dt, rng=None, dW=None, backend=None):
    """One monitored step: a single classical noise drives ``x`` and ``psi``.

    The quantum noise is recomputed from the recorded ``x`` increment, so
    :func:`replay_monitored` reproduces ``psi`` bit for bit.
    """
    spec = NoiseSpec("monitored")
    x, psi = _as_batch(traj)
    coef = _Coefficients(model, spec, 1).at(x)
    if dW is None:
        dW, _ = _increments(coef, rng.standard_normal((1, model.N)), dt, model.A, spec)
    else:
        dW = np.atleast_1d(np.asarray(dW, dtype=float))[None]
    new, xn = _monitored_batch(psi, x, dW, coef, dt, backend)
    return TrajectoryState(xn[0], psi=new[0], t=traj.t + dt, extra={"dW": dW[0]})


def replay_monitored(psi0, x_record, model, dt, backend=None):
    """Reconstruct ``psi_t`` from the classical record ``x_0, x_1, ...``.

    ``x_record`` has shape (n+1, N) and must be the unwrapped record.
    Returns the (n+1, d) array of states.
    """
    spec = NoiseSpec("monitored")
    xr = np.asarray(x_record, dtype=float).reshape(len(x_record), model.N)
    coefs = _Coefficients(model, spec, 1)
    out = np.empty((len(xr), model.d), dtype=complex)
    psi = np.asarray(psi0, dtype=complex)[None]
    out[0] = psi[0]
    for k in range(len(xr) - 1):
        x = xr[k:k + 1]
        psi, _ = _monitored_core(psi, x, xr[k + 1:k + 2], coefs.at(x), dt, backend)
        out[k + 1] = psi[0]
    return out


# ensembles ------------------------------------------------------------------

def _sample_initial(init, model, rng, mixed):
    """Initial ``(x, state)`` for one trajectory."""
    if isinstance(init, TrajectoryState):
        x = np.atleast_1d(np.asarray(init.x, dtype=float))
        if init.mixed:
            st = np.asarray(init.sigma, dtype=complex)
        else:
            st = np.asarray(init.psi, dtype=complex)
            st = st / np.linalg.norm(st)
            if mixed:
                st = np.outer(st, st.conj())
        return x, st
    if isinstance(init, HybridStateGrid):
        g = init.grid
        u = rng.random(2 + g.ndim)
        p = np.trace(init.blocks, axis1=-2, axis2=-1).real * g.weights()
        cdf = np.cumsum(p.ravel()) / p.sum()
        k = min(int(np.searchsorted(cdf, u[0], side="right")), cdf.size - 1)
        idx = np.unravel_index(k, g.shape)
        x = np.array([g.origin[i] + g.spacing[i] * (idx[i] + u[2 + i] - 0.5) for i in range(g.ndim)])
        cond = init.blocks[idx] / np.trace(init.blocks[idx]).real
        if mixed:
            return x, 0.5 * (cond + cond.conj().T)
        w, U = np.linalg.eigh(cond)
        w = np.clip(w, 0.0, None)
        j = min(int(np.searchsorted(np.cumsum(w) / w.sum(), u[1], side="right")), len(w) - 1)
        return x, U[:, j].astype(complex)
    raise TypeError("initial condition must be a TrajectoryState or HybridStateGrid")


@dataclass
class DiffusiveEnsemble:
    """Trajectories sampled at ``times``; ``x`` is the unwrapped record."""

    times: np.ndarray
    x: np.ndarray  # (M, S, N)
    states: np.ndarray  # (M, S, d) pure or (M, S, d, d) mixed
    mixed: bool
    noise: dict = field(default_factory=dict)

    @property
    def n_trajectories(self):
        return self.x.shape[0]

    def densities(self, s):
        """``psi psi^dag`` (or ``sigma``) at sample ``s``, shape (M, d, d)."""
        st = self.states[:, s]
        if self.mixed:
            return st
        return np.einsum("mi,mj->mij", st, st.conj())

    def purity(self, s):
        rho = self.densities(s)
        return np.einsum("mij,mji->m", rho, rho).real

    def subset(self, n):
        return DiffusiveEnsemble(self.times, self.x[:n], self.states[:n], self.mixed,
                                 {k: v[:n] for k, v in self.noise.items()})


def run_diffusive_ensemble(init, model, t_end, dt, n_trajectories, seed, spec=NoiseSpec(), mode="pure",
                           sample_times=None, backend=None, batch_size=2048, record_noise=False, first_index=0):
    """Simulate an ensemble of diffusive trajectories.

    ``mode`` is ``"pure"``, ``"mixed"`` or ``"monitored"``.  Trajectory
    ``m`` draws its initial condition and all standard normals from the
    stream ``(seed, first_index + m)``.
    """
    if mode not in ("pure", "mixed", "monitored"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "monitored":
        spec = NoiseSpec("monitored")
    backend = kernels.resolve_backend(backend)
    n_steps, steps = _check_sampling(t_end, dt, sample_times)
    S, N, d, A = len(steps), model.N, model.d, model.A
    mixed = mode == "mixed"
    D = noise_width(model, spec)
    X = np.zeros((n_trajectories, S, N))
    st_shape = (d, d) if mixed else (d,)
    ST = np.zeros((n_trajectories, S) + st_shape, dtype=complex)
    rec_W = np.zeros((n_trajectories, n_steps, N)) if record_noise else None
    rec_xi = np.zeros((n_trajectories, n_steps, A), dtype=complex) if record_noise and mode != "monitored" else None
    coefs = _Coefficients(model, spec, batch_size)
    for lo, hi in batches(n_trajectories, batch_size):
        B = hi - lo
        xs = np.zeros((B, N))
        sts = np.zeros((B,) + st_shape, dtype=complex)
        Z = np.zeros((B, n_steps, D))
        for i, m in enumerate(range(lo, hi)):
            rng = trajectory_stream(seed, first_index + m)
            xs[i], sts[i] = _sample_initial(init, model, rng, mixed)
            Z[i] = rng.standard_normal((n_steps, D))
        for step in range(n_steps + 1):
            hit = np.nonzero(steps == step)[0]
            for s in hit:
                X[lo:hi, s] = xs
                ST[lo:hi, s] = sts
            if step == n_steps:
                break
            c = coefs.at(xs)
            dW, dxi = _increments(c, Z[:, step], dt, A, spec)
            if record_noise:
                rec_W[lo:hi, step] = dW
                if rec_xi is not None:
                    rec_xi[lo:hi, step] = dxi
            if mode == "monitored":
                sts, xs = _monitored_batch(sts, xs, dW, c, dt, backend)
            elif mixed:
                sts, xs = kernels.mixed_step(sts, xs, c["H"], c["L"], c["DQ"], c["T"], c["G"], c["V"], dxi, dW, dt,
                                             backend=backend)
            else:
                sts, xs = kernels.pure_step(sts, xs, c["H"], c["L"], c["DQ"], c["G"], c["V"], dxi, dW, dt,
                                            backend=backend)
        if not np.all(np.isfinite(sts)):
            raise NonFinite("non-finite state in diffusive ensemble")
    noise = {}
    if record_noise:
        noise["dW"] = rec_W
        if rec_xi is not None:
            noise["dxi"] = rec_xi
    return DiffusiveEnsemble(steps * dt, X, ST, mixed, noise)


# comparison helpers ---------------------------------------------------------

def bin_edges(grid, nodes_per_bin):
    """Bin edges on cell boundaries of a periodic 1-D grid."""
    n = grid.shape[0]
    if n % nodes_per_bin:
        raise ShapeMismatch("nodes_per_bin must divide the number of nodes")
    h = grid.spacing[0]
    return grid.origin[0] - 0.5 * h + h * np.arange(0, n + 1, nodes_per_bin)


def ensemble_bins(ensemble, s, grid, nodes_per_bin, observables, domain=None):
    """Bin integrals of ``tr(O rho)`` estimated from an ensemble.

    Returns ``(mean, stderr)`` of shape (n_obs, n_bins).  Positions are
    wrapped into ``domain`` (default: the grid's periodic extent).
    """
    edges = bin_edges(grid, nodes_per_bin)
    lo, span = edges[0], edges[-1] - edges[0]
    x = lo + np.mod(ensemble.x[:, s, 0] - lo, span)
    which = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
    rho = ensemble.densities(s)
    vals = np.einsum("oij,mji->mo", np.asarray(observables), rho).real  # (M, n_obs)
    M = len(x)
    nb = len(edges) - 1
    onehot = np.zeros((M, nb))
    onehot[np.arange(M), which] = 1.0
    samples = vals[:, :, None] * onehot[:, None, :]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(M)
    return mean, se


def grid_bins(blocks, grid, nodes_per_bin, observables):
    """Bin integrals of ``tr(O rho)`` for grid blocks, shape (n_obs, n_bins)."""
    vals = np.einsum("oij,xji->ox", np.asarray(observables), blocks).real * grid.spacing[0]
    return vals.reshape(len(observables), -1, nodes_per_bin).sum(axis=-1)
