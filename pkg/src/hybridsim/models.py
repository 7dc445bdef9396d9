"""Ready-made models: a two-level system on a circle, canonical
classical-quantum couplings (the coupled oscillator pair), a three-site jump
model and named presets for the command line.
"""
from __future__ import annotations

import numpy as np

from .errors import NonHermitianInput, RankDeficiency, ValidationError
from .model import DiffusiveModel, DiscreteModel, canonical_backaction, pseudo_inverse, symplectic_matrix
from .state import PAULI, HybridStateDiscrete, HybridStateGrid, TrajectoryState, bloch_assemble

TWO_PI = 2.0 * np.pi


# two-level model on a circle --------------------------------------------------

def build_two_level(G):
    """Qubit coupled to a periodic coordinate ``x`` in ``[0, 2 pi)``.

    ``L = sigma_3``, ``DQ = DC = 1``, scalar backaction ``G``, no Hamiltonian
    and no drift.  Admissible iff ``G**2 <= 1``; the builder does not
    enforce it so that violations can be studied.
    """
    return DiffusiveModel(
        1, 2, 1,
        H=np.zeros((2, 2)),
        L=PAULI[2][None],
        DQ=[[1.0]],
        DC=[[1.0]],
        G=[[float(G)]],
        V=[0.0],
        domain=[(0.0, TWO_PI)],
        name=f"two-level:G={G:g}",
    )


def circle_state(grid, marginal=None):
    """Hybrid density with Bloch vector ``(cos x, 0, sin x)`` (unit length).

    ``marginal`` defaults to the uniform density ``1 / (2 pi)``.
    """
    x = grid.axis(0)
    w = np.full_like(x, 1.0 / TWO_PI) if marginal is None else np.asarray(marginal, dtype=float)
    s = np.stack([np.cos(x), np.zeros_like(x), np.sin(x)], axis=-1)
    return HybridStateGrid(grid, bloch_assemble(w, s))


def bloch_rate_on_circle(G, x):
    """``d|s|^2/dt`` at ``x`` for the unit-circle state of the two-level model."""
    c = np.cos(x)
    return -4.0 * c * c - 4.0 * G * c - 1.0


def max_bloch_rate(G):
    """Maximum of :func:`bloch_rate_on_circle` over ``x``.

    The quadratic ``-4c^2 - 4Gc - 1`` peaks at ``c = -G/2``; when that lies
    outside ``[-1, 1]`` the nearer endpoint wins.
    """
    c = np.clip(-G / 2.0, -1.0, 1.0)
    return float(-4.0 * c * c - 4.0 * G * c - 1.0)


# canonical couplings --------------------------------------------------------

def truncate_oscillator(n_max=20):
    """Position and momentum on the lowest ``n_max`` Fock states.

    ``[Q, P] = i`` holds except on the highest level.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    a = np.diag(np.sqrt(np.arange(1, n_max)), 1).astype(complex)
    Q = (a + a.conj().T) / np.sqrt(2.0)
    P = (a - a.conj().T) / (1j * np.sqrt(2.0))
    return Q, P


def top_level_population(state, levels=2, mixed=False):
    """Weight on the highest ``levels`` Fock states (truncation leakage).

    ``state`` is a vector (or density matrix with ``mixed``), or a stack.
    """
    st = np.asarray(state)
    if mixed:
        return np.einsum("...ii->...", st[..., -levels:, -levels:]).real
    return np.sum(np.abs(st[..., -levels:]) ** 2, axis=-1)


def minimum_diffusion(DQ, G, tol=1e-9):
    """``DC = G DQ^+ G^dag``, the least diffusion compatible with ``DQ`` and ``G``.

    Raises :class:`RankDeficiency` if no such minimum-noise partner exists,
    i.e. ``DQ`` does not have exactly the range of ``G^dag G``.  A zero
    ``G`` is the decoupled limit and returns a zero ``DC``.
    """
    DQ = np.asarray(DQ, dtype=complex)
    G = np.asarray(G, dtype=complex)
    if not np.any(G):
        # decoupled limit: the trade-off mandates no classical noise
        return np.zeros((G.shape[0], G.shape[0]))
    DQp = pseudo_inverse(DQ)
    Gh = G.conj().T
    scale = max(1.0, np.abs(G).max(initial=0.0) ** 2)
    if np.max(np.abs(G @ DQp @ DQ @ Gh - G @ Gh), initial=0.0) > tol * scale:
        raise RankDeficiency("range of DQ does not contain the range of G^dag G")
    if np.linalg.matrix_rank(DQ, tol=1e-10 * max(1.0, np.abs(DQ).max())) > np.linalg.matrix_rank(
            G, tol=1e-10 * max(1.0, np.abs(G).max(initial=0.0))):
        raise RankDeficiency("DQ has directions not reached by G; no minimum-noise DC exists")
    DC = G @ DQp @ Gh
    if np.max(np.abs(DC.imag), initial=0.0) > tol * scale:
        raise ValidationError("minimum-noise diffusion is not real")
    return 0.5 * (DC.real + DC.real.T)


def build_canonical(H_Q, L, h, grad_h, DQ, H_Cl=None, grad_H_Cl=None, noise_mode="minimum", DC=None,
                    name=None):
    """Hamiltonian hybrid dynamics in canonical coordinates ``x = (q, p)``.

    ``H(x) = H_Q + H_Cl(x) + h^a(x) L_a`` with Hermitian ``L_a``.  The
    backaction follows from ``grad_h`` (shape ``(N, A)`` or a function of
    ``x``), the drift is the Hamiltonian flow ``eps grad H_Cl``.  With
    ``noise_mode="minimum"`` the diffusion is the minimum-noise partner
    of ``DQ``; with ``"custom"`` the given ``DC`` is used.
    """
    H_Q = np.asarray(H_Q, dtype=complex)
    L = np.asarray(L, dtype=complex)
    if L.ndim == 2:
        L = L[None]
    A, d = L.shape[0], L.shape[1]
    if np.max(np.abs(L - np.conj(np.swapaxes(L, 1, 2)))) > 1e-12:
        raise NonHermitianInput("canonical coupling operators must be Hermitian")
    if callable(grad_h):
        probe = np.asarray(grad_h(np.zeros(2)))
        N = probe.shape[-2]
    else:
        N = np.asarray(grad_h).shape[0]
    eps = symplectic_matrix(N)
    G = canonical_backaction(grad_h)
    if callable(G):
        if noise_mode == "minimum":
            raise ValueError("minimum-noise mode needs an x-independent backaction")
    else:
        G = np.asarray(G, dtype=float)

    def H(x):
        x = np.asarray(x, dtype=float)
        hv = np.asarray(h(x), dtype=float) if callable(h) else np.broadcast_to(h, x.shape[:-1] + (A,))
        out = H_Q + np.einsum("...a,aij->...ij", hv, L)
        if H_Cl is not None:
            out = out + np.asarray(H_Cl(x), dtype=float)[..., None, None] * np.eye(d)
        return out

    if grad_H_Cl is None:
        V = np.zeros(N)
    else:
        def V(x):
            return np.einsum("nm,...m->...n", eps, np.asarray(grad_H_Cl(np.asarray(x, dtype=float)), dtype=float))

    if noise_mode == "minimum":
        DC = minimum_diffusion(DQ, G)
    elif noise_mode == "custom":
        if DC is None:
            raise ValueError("custom noise mode needs DC")
    else:
        raise ValueError(f"unknown noise mode {noise_mode!r}")
    return DiffusiveModel(N, d, A, H=H, L=L, DQ=DQ, DC=DC, G=G, V=V, domain=None, periodic=False, name=name)


def build_oscillator(g, DQ=None, n_max=20, noise_mode="minimum", DC=None):
    """Classical oscillator ``(q, p)`` coupled to a quantum oscillator ``(Q, P)``.

    ``H = (q^2 + p^2)/2 + (Q^2 + P^2)/2 + g (q Q + p P)``.  ``DQ`` is
    free (default identity); ``DC`` follows from the minimum-noise relation.
    """
    Q, P = truncate_oscillator(n_max)
    L = np.stack([Q, P])
    DQ = np.eye(2) if DQ is None else np.asarray(DQ, dtype=float)
    grad_h = g * np.eye(2)  # d_m h^a for h = (g q, g p)

    def h(x):
        return g * np.asarray(x, dtype=float)

    def H_Cl(x):
        return 0.5 * np.sum(np.asarray(x) ** 2, axis=-1)

    def grad_H_Cl(x):
        return np.asarray(x, dtype=float)

    H_Q = 0.5 * (Q @ Q + P @ P)
    return build_canonical(H_Q, L, h, grad_h, DQ, H_Cl, grad_H_Cl, noise_mode, DC,
                           name=f"oscillator:g={g:g}")


def oscillator_means_rhs(g):
    """Linear system for the means ``(q, p, <Q>, <P>)`` of the oscillator pair."""
    return np.array([
        [0.0, 1.0, 0.0, g],
        [-1.0, 0.0, -g, 0.0],
        [0.0, g, 0.0, 1.0],
        [-g, 0.0, -1.0, 0.0],
    ])


# discrete example -----------------------------------------------------------

def build_three_site():
    """Qubit hopping on three classical points ``0, 1, 2``.

    Each neighbouring pair is linked by one generator per direction, so
    every jump identifies its generator.  Returns ``(model, initial)``.
    """
    s1, _, s3 = PAULI
    eye = np.eye(2)
    lower = np.array([[0, 0], [1, 0]], dtype=complex)
    raise_ = lower.T.copy()
    pts = [0, 1, 2]
    H = np.array([0.5 * (1 + 0.5 * x) * s1 + 0.3 * x * s3 for x in pts])
    gens = np.zeros((4, 3, 3, 2, 2), dtype=complex)
    gens[0, 1, 0] = 0.8 * lower + 0.4 * eye
    gens[1, 0, 1] = 0.6 * raise_ + 0.3 * eye
    gens[2, 2, 1] = 0.5 * (eye + s1)
    gens[3, 1, 2] = 0.5 * eye + 0.5 * lower
    model = DiscreteModel(pts, H, gens, name="three-site")
    init = TrajectoryState(0, psi=np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0))
    return model, init


def build_dephasing(dq=1.0):
    """Qubit dephasing through ``L = sigma_3`` with no classical coupling."""
    return DiffusiveModel(1, 2, 1, L=PAULI[2][None], DQ=[[float(dq)]], DC=[[0.0]], G=[[0.0]],
                          domain=[(0.0, TWO_PI)], name=f"dephasing:dq={dq:g}")


def initial_discrete(init, model):
    """Pure hybrid density from a trajectory state."""
    return HybridStateDiscrete.pure(model.points, init.x, init.psi)


# presets --------------------------------------------------------------------

def parse_preset(text):
    """Split ``"name:key=value,key=value"`` into ``(name, {key: float})``."""
    name, _, rest = text.partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"malformed preset parameter {item!r}")
        params[key.strip()] = float(val)
    return name.strip(), params


def build_preset(text):
    """Model for a preset string.

    ``two-level:G=<v>``, ``oscillator:g=<v>,dq=<v>[,nmax=<n>]``,
    ``three-site`` and ``dephasing:dq=<v>``.
    """
    name, p = parse_preset(text)
    if name == "two-level":
        return build_two_level(p.get("G", 0.0))
    if name == "oscillator":
        dq = p.get("dq", 1.0)
        return build_oscillator(p.get("g", 1.0), dq * np.eye(2), int(p.get("nmax", 20)))
    if name == "three-site":
        return build_three_site()[0]
    if name == "dephasing":
        return build_dephasing(p.get("dq", 1.0))
    raise ValueError(f"unknown preset {name!r}")
