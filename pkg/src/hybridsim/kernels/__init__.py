"""Trajectory kernels with a compiled (numba) and a pure-numpy backend.

The backend is chosen once from ``HYBRIDSIM_NUMBA`` (default on when numba
imports); every public runner also accepts ``backend="numpy"|"numba"``.
"""
import numpy as np

from .. import _config
from . import _numpy_impl


def resolve_backend(backend=None):
    if backend is None:
        return "numba" if _config.USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not _config.numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def _numba():
    from . import _numba_impl

    return _numba_impl


def run_jump_batch(psi0, x0, tables, u, dt, sample_steps, dynamic, backend=None, log_events=False):
    """Run a batch of jump trajectories from pre-drawn uniforms.

    Returns ``(psi (B,S,d), x (B,S), jumps (B,S), max_rate_dt, events)``
    where ``events`` is a list of (n_i, 4) arrays when logging is on.
    """
    backend = resolve_backend(backend)
    B, d = psi0.shape
    S = len(sample_steps)
    out_psi = np.zeros((B, S, d), dtype=complex)
    out_x = np.zeros((B, S), dtype=np.int64)
    out_j = np.zeros((B, S), dtype=np.int64)
    H, Gamma, ops, dest, alpha, nch, diag = tables
    steps = np.ascontiguousarray(sample_steps, dtype=np.int64)
    events = []
    if backend == "numba":
        kern = _numba().jump_trajectory
        max_rate = 0.0
        for b in range(B):
            ev = np.zeros((u.shape[1] if log_events else 0, 4), dtype=np.int64)
            n_ev, mr = kern(np.ascontiguousarray(psi0[b]), int(x0[b]), H, Gamma, ops, dest, alpha, nch,
                            diag, np.ascontiguousarray(u[b]), dt, steps, bool(dynamic),
                            out_psi[b], out_x[b], out_j[b], ev)
            max_rate = max(max_rate, mr)
            if log_events:
                events.append(ev[:n_ev].copy())
        return out_psi, out_x, out_j, max_rate, events
    log = [] if log_events else None
    max_rate = _numpy_impl.jump_batch(psi0, np.asarray(x0, dtype=np.int64), H, Gamma, ops, dest, alpha, nch,
                                      diag, u, dt, steps, bool(dynamic), out_psi, out_x, out_j, log)
    if log_events:
        rec = np.array(log, dtype=np.int64).reshape(-1, 5)
        events = [rec[rec[:, 0] == b, 1:] for b in range(B)]
    return out_psi, out_x, out_j, max_rate, events


def pure_step(psi, x, H, L, DQ, G, V, dxi, dW, dt, backend=None):
    if resolve_backend(backend) == "numba":
        return _numba().pure_step(psi, x, H, L, DQ, G, V, dxi, dW, dt)
    return _numpy_impl.pure_step(psi, x, H, L, DQ, G, V, dxi, dW, dt)


def mixed_step(sigma, x, H, L, DQ, T, G, V, dxi, dW, dt, backend=None):
    if resolve_backend(backend) == "numba":
        return _numba().mixed_step(sigma, x, H, L, DQ, T, G, V, dxi, dW, dt)
    return _numpy_impl.mixed_step(sigma, x, H, L, DQ, T, G, V, dxi, dW, dt)


diffusive_drift = _numpy_impl.diffusive_drift
