"""Correlated classical/quantum noise for diffusive unravelings.

The complex quantum noise ``dxi = a + i b`` (A components) and the real
classical noise ``dW`` (N components) are sampled jointly as one real
Gaussian vector ``(a, b, W)`` with covariance ``Sigma * dt``:

    E[dxi dxi^dag] = T dt      (T: noise target, DQ or a reduced one)
    E[dxi dxi^T]   = C dt      (free; zero by default)
    E[dW dW^T]     = DC dt
    E[dW dxi^T]    = G dt
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._config import TOL_RANK
from .errors import InfeasibleNoiseChoice, MonitoringInfeasible, ShapeMismatch
from .model import pseudo_inverse

CHOICES = ("zero", "monitored", "custom")


@dataclass(frozen=True)
class NoiseSpec:
    """How the free correlations of the unraveling noise are fixed.

    ``choice``: ``"zero"`` (``E[dxi dxi^T] = 0``), ``"monitored"``
    (``dxi = F dW`` with ``F = G^dag DC^+``) or ``"custom"`` (``C`` given).
    ``target``: ``"full"`` (``E[dxi dxi^dag] = DQ dt``) or ``"reduced"``
    (``eta * G^dag DC^+ G``); the remainder ``DQ - target`` is applied as
    deterministic decoherence by the mixed-state stepper.
    """

    choice: str = "zero"
    C: object = None
    target: str = "full"
    eta: float = 1.0
    tol: float = 1e-9

    def __post_init__(self):
        if self.choice not in CHOICES:
            raise ValueError(f"noise choice must be one of {CHOICES}, got {self.choice!r}")
        if self.target not in ("full", "reduced"):
            raise ValueError(f"noise target must be 'full' or 'reduced', got {self.target!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.choice == "custom" and self.C is None:
            raise ValueError("custom noise choice needs C")


def monitoring_map(DC, G, tol_rank=TOL_RANK):
    """``F = G^dag DC^+``, mapping classical noise to quantum noise."""
    DC = np.asarray(DC)
    G = np.asarray(G, dtype=complex)
    if DC.ndim == 2:
        return G.conj().T @ pseudo_inverse(DC, tol_rank)
    return np.stack([monitoring_map(a, b, tol_rank) for a, b in zip(DC.reshape((-1,) + DC.shape[-2:]),
                                                                   G.reshape((-1,) + G.shape[-2:]))]).reshape(
        G.shape[:-2] + (G.shape[-1], DC.shape[-1]))


def noise_target(DQ, DC, G, spec):
    """``E[dxi dxi^dag] / dt`` for the given spec."""
    if spec.target == "full" and spec.choice != "monitored":
        return np.asarray(DQ, dtype=complex)
    F = monitoring_map(DC, G)
    DQmin = F @ np.asarray(G, dtype=complex) if F.ndim == 2 else np.einsum("...an,...nb->...ab", F, G)
    if spec.choice == "monitored":
        return DQmin
    return spec.eta * DQmin


def check_monitoring_map(DQ, DC, G, tol=1e-9):
    """Raise :class:`MonitoringInfeasible` unless ``DQ == G^dag DC^+ G``."""
    F = monitoring_map(DC, G)
    res = np.max(np.abs(np.asarray(DQ) - F @ np.asarray(G, dtype=complex)), initial=0.0)
    scale = max(1.0, np.max(np.abs(DQ), initial=0.0))
    if res > tol * scale:
        raise MonitoringInfeasible(f"DQ differs from G^dag DC^+ G by {res:.3g}; the signal cannot carry the state")
    return F


def _min_principal_minor(S):
    best, where = np.inf, None
    for i, j in combinations(range(S.shape[0]), 2):
        det = S[i, i] * S[j, j] - S[i, j] * S[j, i]
        if det < best:
            best, where = det, (i, j)
    return best, where


def build_noise_covariance(DQ_target, DC, G, spec=NoiseSpec()):
    """Real covariance (per unit time) of ``(Re dxi, Im dxi, dW)``.

    Raises :class:`InfeasibleNoiseChoice` if the requested correlations
    are not jointly realizable (covariance not positive semidefinite); the
    error carries the smallest eigenvalue and the most negative 2x2
    principal minor.
    """
    T = np.atleast_2d(np.asarray(DQ_target, dtype=complex))
    DC = np.atleast_2d(np.asarray(DC, dtype=float))
    G = np.asarray(G, dtype=complex).reshape(DC.shape[0], T.shape[0])
    A, N = T.shape[0], DC.shape[0]
    if spec.choice == "zero":
        C = np.zeros((A, A), dtype=complex)
    elif spec.choice == "custom":
        C = np.asarray(spec.C, dtype=complex).reshape(A, A)
        if np.max(np.abs(C - C.T), initial=0.0) > 1e-12 * max(1.0, np.abs(C).max()):
            raise ShapeMismatch("E[dxi dxi^T] must be a symmetric matrix")
    else:
        F = monitoring_map(DC, G)
        C = F @ DC @ F.T
    S = np.zeros((2 * A + N, 2 * A + N))
    a, b, w = slice(0, A), slice(A, 2 * A), slice(2 * A, 2 * A + N)
    S[a, a] = 0.5 * (T + C).real
    S[b, b] = 0.5 * (T - C).real
    S[a, b] = 0.5 * (C.imag - T.imag)
    S[b, a] = S[a, b].T
    S[w, a] = G.real
    S[a, w] = G.real.T
    S[w, b] = G.imag
    S[b, w] = G.imag.T
    S[w, w] = DC
    S = 0.5 * (S + S.T)
    ev = np.linalg.eigvalsh(S)
    scale = max(1.0, float(np.max(np.abs(ev))))
    if ev[0] < -spec.tol * scale:
        minor, where = _min_principal_minor(S)
        raise InfeasibleNoiseChoice(
            f"noise covariance has eigenvalue {ev[0]:.3g} (2x2 minor {minor:.3g} at rows {where})",
            min_eig=float(ev[0]),
            minor=float(minor),
        )
    return S


def noise_factor(S):
    """``F`` with ``F F^T = S``; tiny negative eigenvalues are clamped to zero."""
    w, U = np.linalg.eigh(S)
    return U * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def split_increments(v, A):
    """``(dW, dxi)`` from real vectors ordered ``(a, b, W)``."""
    return v[..., 2 * A:], v[..., :A] + 1j * v[..., A:2 * A]


def sample_increments(S, dt, rng, A, size=None):
    """Draw ``(dW, dxi)`` with covariance ``S * dt``.

    ``size`` prepends sample axes (e.g. ``size=100000`` for a moment test).
    """
    S = np.asarray(S, dtype=float)
    F = noise_factor(S)
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (S.shape[0],)
    z = rng.standard_normal(shape)
    v = np.sqrt(dt) * z @ F.T
    return split_increments(v, A)
