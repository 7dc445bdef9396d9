"""Right-hand side and fixed-step integration of the discrete hybrid master equation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._config import TOL_ZERO
from .errors import NonFinite, ShapeMismatch
from .state import HybridStateDiscrete, dagger


class HmeRhsWorkspace:
    """Cached per-model quantities: the loss operators and nonzero channels."""

    def __init__(self, model):
        self.model = model
        self.loss = model.loss_operators()
        L = model.generators
        # keep only (alpha, x, y) triples that carry a nonzero operator
        nz = np.argwhere(np.any(L != 0, axis=(-1, -2)))
        self.alpha, self.dest, self.src = nz.T if nz.size else (np.zeros(0, int),) * 3
        self.ops = L[self.alpha, self.dest, self.src]
        self.H_eff = model.H - 0.5j * self.loss  # rho -> -i H_eff rho + h.c.


def workspace(model):
    ws = getattr(model, "_hme_workspace", None)
    if ws is None:
        ws = HmeRhsWorkspace(model)
        model._hme_workspace = ws
    return ws


def _rhs_blocks(blocks, ws):
    # -i H rho - 1/2 {Gamma, rho}, grouped as X + X^dag with X = -i H_eff rho
    X = -1j * ws.H_eff @ blocks
    out = X + dagger(X)
    if ws.ops.shape[0]:
        gain = ws.ops @ blocks[ws.src] @ dagger(ws.ops)
        np.add.at(out, ws.dest, gain)
    return out


def hme_rhs(state, model, ws=None):
    """Time derivative of every block of a discrete hybrid density.

    ``state`` is a :class:`HybridStateDiscrete` or a raw ``(K, d, d)`` array.
    Gain: ``sum_{y,a} L_a(x,y) rho(y) L_a(x,y)^dag``; loss: the Hermitian
    part of ``L_a(y,x)^dag L_a(y,x) rho(x)`` summed over ``y, a``.
    """
    blocks = state.blocks if isinstance(state, HybridStateDiscrete) else np.asarray(state)
    if blocks.shape != model.H.shape:
        raise ShapeMismatch(f"state blocks {blocks.shape} do not match model {model.H.shape}")
    return _rhs_blocks(blocks, ws if ws is not None else workspace(model))


def transition_rates(blocks, model, tol_zero=TOL_ZERO):
    """``T[a, x', x] = tr(L_a(x', x) rho_c(x) L_a(x', x)^dag)`` on conditional states.

    Rates out of points with vanishing probability are set to zero.
    """
    p = np.trace(blocks, axis1=-2, axis2=-1).real
    cond = np.zeros_like(blocks)
    ok = p > tol_zero
    cond[ok] = blocks[ok] / p[ok, None, None]
    L = model.generators
    return np.einsum("axyij,yjk,axyik->axy", L, cond, L.conj()).real


def kinetic_rhs(blocks, model, tol_zero=TOL_ZERO):
    """Classical rate equation ``dp(x)/dt = sum T(x,y) p(y) - T(y,x) p(x)``."""
    p = np.trace(blocks, axis1=-2, axis2=-1).real
    T = transition_rates(blocks, model, tol_zero).sum(axis=0)
    return T @ p - T.sum(axis=0) * p


def _check_sampling(t_end, dt, sample_times):
    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end non-negative")
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    if sample_times is None:
        sample_steps = np.array([0, n_steps])
    else:
        st = np.atleast_1d(np.asarray(sample_times, dtype=float))
        sample_steps = np.rint(st / dt).astype(int)
        if np.any(np.abs(sample_steps * dt - st) > 1e-9 * np.maximum(1.0, st)):
            raise ValueError("sample times must lie on the dt lattice")
        if np.any(sample_steps < 0) or np.any(sample_steps > n_steps):
            raise ValueError("sample times must lie within [0, t_end]")
    return n_steps, sample_steps


def fixed_step(rhs, y0, t_end, dt, scheme="rk4", sample_times=None, post=None):
    """Fixed-step RK4 or Euler integration of ``dy/dt = rhs(y)``.

    Returns ``(times, samples)`` with ``samples[k]`` the state at
    ``times[k]``.  ``post`` is applied after every step (e.g. trace
    renormalization).
    """
    n_steps, sample_steps = _check_sampling(t_end, dt, sample_times)
    order = np.argsort(sample_steps, kind="stable")
    out = np.empty((len(sample_steps),) + np.shape(y0), dtype=np.result_type(y0, complex))
    y = np.array(y0, dtype=out.dtype)
    k = 0
    for step in range(n_steps + 1):
        while k < len(order) and sample_steps[order[k]] == step:
            out[order[k]] = y
            k += 1
        if step == n_steps:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            if scheme == "rk4":
                k1 = rhs(y)
                k2 = rhs(y + 0.5 * dt * k1)
                k3 = rhs(y + 0.5 * dt * k2)
                k4 = rhs(y + dt * k3)
                y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            elif scheme == "euler":
                y = y + dt * rhs(y)
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
        if post is not None:
            y = post(y)
        if not np.all(np.isfinite(y)):
            raise NonFinite(f"non-finite state at t={(step + 1) * dt:g}")
    return sample_steps * dt, out


@dataclass
class DiscreteSolution:
    points: list
    times: np.ndarray
    blocks: np.ndarray  # (T, K, d, d)

    def state(self, k):
        return HybridStateDiscrete(self.points, self.blocks[k])

    @property
    def states(self):
        return [self.state(k) for k in range(len(self.times))]

    def trace_drift(self):
        tr = np.trace(self.blocks, axis1=-2, axis2=-1).real.sum(axis=-1)
        return float(np.max(np.abs(tr - tr[0])))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(0.5 * (self.blocks + dagger(self.blocks))).min())


def integrate_discrete(state, model, t_end, dt, scheme="rk4", sample_times=None, renormalize=False):
    """Integrate the discrete hybrid master equation with a fixed step.

    Trace renormalization is off by default so that trace drift stays
    visible as a diagnostic.
    """
    ws = workspace(model)
    blocks0 = state.blocks if isinstance(state, HybridStateDiscrete) else np.asarray(state)
    if blocks0.shape != model.H.shape:
        raise ShapeMismatch(f"state blocks {blocks0.shape} do not match model {model.H.shape}")

    def post(y):
        y = 0.5 * (y + dagger(y))
        if renormalize:
            y = y / np.trace(y, axis1=-2, axis2=-1).real.sum()
        return y

    times, samples = fixed_step(lambda y: _rhs_blocks(y, ws), blocks0, t_end, dt, scheme, sample_times, post)
    return DiscreteSolution(list(model.points), times, samples)
