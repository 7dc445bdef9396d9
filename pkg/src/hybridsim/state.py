"""Hybrid densities, trajectory states and their diagnostics.

A hybrid density maps every classical point ``x`` to an *unnormalized*
density matrix ``rho(x)``; its trace is the classical probability (or
probability density on a grid) and ``rho(x) / tr rho(x)`` the conditional
quantum state.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._config import TOL_NORM, TOL_PSD, TOL_ZERO
from .errors import ShapeMismatch, ZeroProbability

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
"""Pauli matrices; sigma_3 is diagonal with |0> as its +1 eigenvector."""


def hermitian_part(m):
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def min_eigenvalue(blocks):
    """Smallest eigenvalue of each Hermitian block (Hermitian part is used)."""
    return np.linalg.eigvalsh(hermitian_part(np.asarray(blocks)))[..., 0]


def is_density_matrix(m, tol_psd=TOL_PSD, tol_herm=1e-12):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    if np.max(np.abs(m - dagger(m)), initial=0.0) > tol_herm * max(1.0, np.max(np.abs(m))):
        return False
    return bool(np.all(np.isfinite(m))) and min_eigenvalue(m) >= -tol_psd


@dataclass(frozen=True)
class Grid:
    """Regular lattice with per-axis spacing; nodes at ``origin + i * spacing``."""

    shape: tuple
    spacing: tuple
    origin: tuple
    periodic: bool = True

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        spacing = tuple(float(h) for h in np.atleast_1d(self.spacing))
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        if not (len(shape) == len(spacing) == len(origin)):
            raise ShapeMismatch("shape, spacing and origin must have equal length")
        if any(n < 3 for n in shape) or any(h <= 0 for h in spacing):
            raise ValueError("grid needs >= 3 nodes per axis and positive spacing")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def interval(cls, n, lower, upper, periodic=True):
        """1-D grid on [lower, upper) if periodic, else on [lower, upper]."""
        if periodic:
            h = (upper - lower) / n
        else:
            h = (upper - lower) / (n - 1)
        return cls((n,), (h,), (lower,), periodic)

    @classmethod
    def box(cls, ns, lowers, uppers, periodic=True):
        hs = []
        for n, lo, up in zip(ns, lowers, uppers):
            hs.append((up - lo) / n if periodic else (up - lo) / (n - 1))
        return cls(tuple(ns), tuple(hs), tuple(lowers), periodic)

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def extent(self):
        return tuple(n * h for n, h in zip(self.shape, self.spacing))

    def axis(self, i):
        return self.origin[i] + self.spacing[i] * np.arange(self.shape[i])

    def nodes(self):
        """Node coordinates, shape ``(*shape, ndim)``."""
        axes = np.meshgrid(*[self.axis(i) for i in range(self.ndim)], indexing="ij")
        return np.stack(axes, axis=-1)

    def weights(self):
        """Trapezoidal quadrature weights (rectangle rule when periodic)."""
        w = np.ones(self.shape)
        if not self.periodic:
            for ax in range(self.ndim):
                sl = [slice(None)] * self.ndim
                sl[ax] = 0
                w[tuple(sl)] *= 0.5
                sl[ax] = -1
                w[tuple(sl)] *= 0.5
        return w * self.cell_volume

    def integrate(self, values):
        """Quadrature over the leading grid axes of ``values``."""
        values = np.asarray(values)
        w = self.weights().reshape(self.shape + (1,) * (values.ndim - self.ndim))
        return np.sum(values * w, axis=tuple(range(self.ndim)))

    def wrap(self, x):
        """Map points into the fundamental domain (no-op if not periodic)."""
        if not self.periodic:
            return x
        lo = np.asarray(self.origin)
        ext = np.asarray(self.extent)
        return lo + np.mod(np.asarray(x) - lo, ext)

    def to_dict(self):
        return {
            "shape": list(self.shape),
            "spacing": list(self.spacing),
            "origin": list(self.origin),
            "periodic": self.periodic,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["shape"]), tuple(d["spacing"]), tuple(d["origin"]), bool(d.get("periodic", True)))


def _check_blocks(blocks, lead_shape=None):
    blocks = np.asarray(blocks, dtype=complex)
    if blocks.ndim < 3 or blocks.shape[-1] != blocks.shape[-2]:
        raise ShapeMismatch(f"blocks must have shape (..., d, d), got {blocks.shape}")
    if lead_shape is not None and blocks.shape[:-2] != tuple(lead_shape):
        raise ShapeMismatch(f"expected leading shape {tuple(lead_shape)}, got {blocks.shape[:-2]}")
    return blocks


@dataclass
class HybridStateDiscrete:
    """Hybrid density on a finite set of classical points.

    ``blocks[k]`` is the unnormalized density matrix at ``points[k]``.
    Points may be any hashable labels (ints, strings or tuples for the
    vector-valued case).
    """

    points: list
    blocks: np.ndarray

    def __post_init__(self):
        self.points = list(self.points)
        self.blocks = _check_blocks(self.blocks, (len(self.points),))

    @property
    def dim(self):
        return self.blocks.shape[-1]

    def index(self, x):
        try:
            return self.points.index(x)
        except ValueError:
            raise KeyError(f"unknown classical point {x!r}") from None

    def total_trace(self):
        return float(np.trace(self.blocks, axis1=-2, axis2=-1).real.sum())

    def check(self, tol_norm=TOL_NORM, tol_psd=TOL_PSD):
        """Raise ``ValueError`` if the state violates its invariants."""
        if abs(self.total_trace() - 1.0) > tol_norm:
            raise ValueError(f"total trace {self.total_trace()!r} != 1")
        if np.max(np.abs(self.blocks - dagger(self.blocks))) > 1e-12:
            raise ValueError("blocks are not Hermitian")
        if np.min(min_eigenvalue(self.blocks)) < -tol_psd:
            raise ValueError("a block has a negative eigenvalue")

    def copy(self):
        return HybridStateDiscrete(list(self.points), self.blocks.copy())

    @classmethod
    def pure(cls, points, x0, psi):
        """All weight at ``x0`` in the pure state ``psi``."""
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        blocks = np.zeros((len(points), psi.size, psi.size), dtype=complex)
        blocks[list(points).index(x0)] = np.outer(psi, psi.conj())
        return cls(points, blocks)


@dataclass
class HybridStateGrid:
    """Hybrid density sampled at the nodes of a :class:`Grid`.

    Values are densities in ``x``, so ``grid.integrate(trace)`` is 1.
    """

    grid: Grid
    blocks: np.ndarray

    def __post_init__(self):
        self.blocks = _check_blocks(self.blocks, self.grid.shape)

    @property
    def dim(self):
        return self.blocks.shape[-1]

    def total_trace(self):
        return float(self.grid.integrate(np.trace(self.blocks, axis1=-2, axis2=-1).real))

    def check(self, tol_norm=TOL_NORM, tol_psd=TOL_PSD):
        if abs(self.total_trace() - 1.0) > tol_norm:
            raise ValueError(f"total trace {self.total_trace()!r} != 1")
        if np.max(np.abs(self.blocks - dagger(self.blocks))) > 1e-12 * max(1.0, np.max(np.abs(self.blocks))):
            raise ValueError("blocks are not Hermitian")
        if np.min(min_eigenvalue(self.blocks)) < -tol_psd:
            raise ValueError("a block has a negative eigenvalue")

    def copy(self):
        return HybridStateGrid(self.grid, self.blocks.copy())


@dataclass
class TrajectoryState:
    """One unraveling sample: classical point plus a pure or mixed state.

    Exactly one of ``psi`` and ``sigma`` is set.
    """

    x: object
    psi: np.ndarray | None = None
    sigma: np.ndarray | None = None
    t: float = 0.0
    jumps: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.psi is None) == (self.sigma is None):
            raise ValueError("give exactly one of psi and sigma")
        if self.psi is not None:
            self.psi = np.asarray(self.psi, dtype=complex)
        else:
            self.sigma = np.asarray(self.sigma, dtype=complex)

    @property
    def mixed(self):
        return self.sigma is not None

    def density(self):
        if self.mixed:
            return self.sigma
        return np.outer(self.psi, self.psi.conj())

    def check(self, tol_norm=TOL_NORM, tol_psd=TOL_PSD):
        if self.mixed:
            if abs(np.trace(self.sigma).real - 1.0) > tol_norm:
                raise ValueError("sigma does not have unit trace")
            if min_eigenvalue(self.sigma) < -tol_psd:
                raise ValueError("sigma has a negative eigenvalue")
        elif abs(np.vdot(self.psi, self.psi).real - 1.0) > tol_norm:
            raise ValueError("psi is not normalized")


def classical_marginal(state, tol_psd=TOL_PSD, tol_norm=TOL_NORM):
    """Classical probabilities (discrete) or density field (grid), ``tr rho(x)``."""
    rho = np.trace(state.blocks, axis1=-2, axis2=-1).real.copy()
    if np.min(rho, initial=0.0) < -tol_psd:
        warnings.warn(f"classical marginal has negative values (min {rho.min():.3e})", RuntimeWarning, stacklevel=2)
    total = state.total_trace()
    if abs(total - 1.0) > tol_norm:
        warnings.warn(f"classical marginal is not normalized (total {total:.12g})", RuntimeWarning, stacklevel=2)
    return rho


def conditional_state(state, x, tol_zero=TOL_ZERO):
    """Normalized quantum state at ``x``.

    ``x`` is a point label for discrete states and a node index (int or
    tuple) for grid states.
    """
    if isinstance(state, HybridStateDiscrete):
        block = state.blocks[state.index(x)]
    else:
        block = state.blocks[x]
    w = np.trace(block).real
    if w <= tol_zero:
        raise ZeroProbability(f"tr rho(x) = {w:.3e} at x = {x!r}")
    return block / w


def bloch_decompose(rho2, tol_zero=TOL_ZERO):
    """Split a 2x2 block into its weight and Bloch vector.

    ``rho2 = weight * (I + s . sigma) / 2``; the block is positive iff
    ``|s| <= 1``.
    """
    rho2 = np.asarray(rho2, dtype=complex)
    if rho2.shape != (2, 2):
        raise ShapeMismatch(f"expected a 2x2 matrix, got {rho2.shape}")
    weight = float(np.trace(rho2).real)
    if weight <= tol_zero:
        raise ZeroProbability(f"weight {weight:.3e} too small for a Bloch vector")
    s = np.einsum("kij,ji->k", PAULI, rho2).real / weight
    return weight, s


def bloch_assemble(weight, s):
    """Inverse of :func:`bloch_decompose`; broadcasts over leading axes."""
    s = np.asarray(s, dtype=float)
    w = np.asarray(weight, dtype=float)[..., None, None]
    return 0.5 * w * (np.eye(2) + np.einsum("...k,kij->...ij", s, PAULI))


def bloch_field(blocks, tol_zero=TOL_ZERO):
    """Vectorized Bloch vectors for stacked 2x2 blocks; zero where weight vanishes."""
    w = np.trace(blocks, axis1=-2, axis2=-1).real
    num = np.einsum("kij,...ji->...k", PAULI, blocks).real
    safe = np.where(w > tol_zero, w, 1.0)
    s = num / safe[..., None]
    s[w <= tol_zero] = 0.0
    return w, s


def concentrate(grid, x0, sigma0, width=None):
    """Narrow Gaussian stand-in for ``delta(x - x0) * sigma0`` on ``grid``.

    Default width is three grid spacings; the result integrates to
    ``tr sigma0``.
    """
    sigma0 = np.asarray(sigma0, dtype=complex)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if width is None:
        width = 3.0 * max(grid.spacing)
    d = grid.nodes() - x0
    if grid.periodic:
        ext = np.asarray(grid.extent)
        d = (d + 0.5 * ext) % ext - 0.5 * ext
    prof = np.exp(-0.5 * np.sum(d * d, axis=-1) / width**2)
    prof /= grid.integrate(prof)
    return HybridStateGrid(grid, prof[..., None, None] * sigma0)


# serialization ------------------------------------------------------------

def encode_complex(a):
    """Nested lists with complex entries stored as [re, im] pairs."""
    a = np.asarray(a, dtype=complex)
    pairs = np.stack([a.real, a.imag], axis=-1)
    return pairs.tolist()


def decode_complex(obj):
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1] != 2:
        raise ShapeMismatch("complex data must be stored as [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _encode_point(p):
    if isinstance(p, tuple):
        return list(p)
    if isinstance(p, np.generic):
        return p.item()
    return p


def _decode_point(p):
    return tuple(p) if isinstance(p, list) else p


def state_to_dict(state):
    if isinstance(state, HybridStateDiscrete):
        head = {"points": [_encode_point(p) for p in state.points]}
    else:
        head = {"grid": state.grid.to_dict()}
    head["hilbert_dim"] = state.dim
    head["blocks"] = encode_complex(state.blocks.reshape(-1, state.dim, state.dim))
    return head


def state_from_dict(d):
    blocks = decode_complex(d["blocks"])
    if "points" in d:
        return HybridStateDiscrete([_decode_point(p) for p in d["points"]], blocks)
    grid = Grid.from_dict(d["grid"])
    return HybridStateGrid(grid, blocks.reshape(grid.shape + blocks.shape[-2:]))


def dumps_state(state):
    return json.dumps(state_to_dict(state), sort_keys=True)


def loads_state(text):
    return state_from_dict(json.loads(text))
