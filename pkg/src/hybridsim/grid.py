"""Grid solver for the diffusive hybrid master equation.

Blocks live on a regular grid, ``rho[..., i, j]`` with the leading axes
the grid axes.  Derivatives are central second-order differences
(periodic by default) or, on periodic grids, spectral.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._config import TOL_ZERO
from .discrete import fixed_step
from .errors import (
    BoundaryUnderflow,
    CflViolation,
    InadmissibleModel,
    ShapeMismatch,
    UnsupportedXDependence,
)
from .model import DiscreteModel, validate_model
from .state import HybridStateGrid, dagger


# finite differences -------------------------------------------------------

def _shift(f, axis, s, periodic):
    """``f`` evaluated at ``x + s*h`` along ``axis`` (zero outside if not periodic)."""
    if periodic:
        return np.roll(f, -s, axis=axis)
    out = np.zeros_like(f)
    n = f.shape[axis]
    src = [slice(None)] * f.ndim
    dst = [slice(None)] * f.ndim
    if s > 0:
        src[axis], dst[axis] = slice(s, n), slice(0, n - s)
    else:
        src[axis], dst[axis] = slice(0, n + s), slice(-s, n)
    out[tuple(dst)] = f[tuple(src)]
    return out


def _spectral_factor(n, h, order):
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    if order == 1 and n % 2 == 0:
        k[n // 2] = 0.0  # drop the unpaired Nyquist mode for odd derivatives
    return (1j * k) ** order


def _spectral(f, axis, h, order):
    n = f.shape[axis]
    fac = _spectral_factor(n, h, order)
    shape = [1] * f.ndim
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(f, axis=axis) * fac.reshape(shape), axis=axis)


def d1(f, axis, h, periodic=True, method="central"):
    if method == "spectral":
        return _spectral(f, axis, h, 1)
    return (_shift(f, axis, 1, periodic) - _shift(f, axis, -1, periodic)) / (2.0 * h)


def d2(f, axis, h, periodic=True, method="central"):
    if method == "spectral":
        return _spectral(f, axis, h, 2)
    return (_shift(f, axis, 1, periodic) - 2.0 * f + _shift(f, axis, -1, periodic)) / (h * h)


def d11(f, ax1, ax2, h1, h2, periodic=True, method="central"):
    """Mixed derivative; the central version is the 4-point stencil."""
    if method == "spectral":
        return _spectral(_spectral(f, ax1, h1, 1), ax2, h2, 1)
    pp = _shift(_shift(f, ax1, 1, periodic), ax2, 1, periodic)
    pm = _shift(_shift(f, ax1, 1, periodic), ax2, -1, periodic)
    mp = _shift(_shift(f, ax1, -1, periodic), ax2, 1, periodic)
    mm = _shift(_shift(f, ax1, -1, periodic), ax2, -1, periodic)
    return (pp - pm - mp + mm) / (4.0 * h1 * h2)


# right-hand sides -----------------------------------------------------------

def _blocks(state, grid):
    if isinstance(state, HybridStateGrid):
        return state.blocks, state.grid
    if grid is None:
        raise ValueError("raw block arrays need an explicit grid")
    return np.asarray(state), grid


def _local_part(rho, c):
    L, DQ, H = c["L"], c["DQ"], c["H"]
    # B_a = sum_b DQ[a, b] L_b : gain = sum_a L_a rho B_a^dag, loss = sum_b L_b^dag B_b
    B = np.einsum("...ab,...bij->...aij", DQ, L)
    gain = np.einsum("...aij,...jk,...alk->...il", L, rho, B.conj())
    Gam = np.einsum("...bji,...bjk->...ik", L.conj(), B)
    X = -1j * H @ rho - 0.5 * Gam @ rho
    return X + dagger(X) + gain


def diffusive_rhs(state, model, grid=None, method="central"):
    """Time derivative of a grid hybrid density under the diffusive HME.

    Local part ``-i[H, rho] + DQ^{ba}(L_a rho L_b^dag - Herm L_b^dag L_a rho)``;
    transport part ``1/2 d_n d_m (DC^{nm} rho) + d_n(conj(G^{na}) L_a rho + h.c.)
    - d_n(V^n rho)``.
    """
    rho, grid = _blocks(state, grid)
    N = grid.ndim
    if rho.shape[:N] != grid.shape or rho.shape[N] != model.d:
        raise ShapeMismatch(f"blocks {rho.shape} do not fit grid {grid.shape} and dim {model.d}")
    c = model.on_grid(grid)
    per = grid.periodic
    h = grid.spacing
    out = _local_part(rho, c)
    DC, G, V, L = c["DC"], c["G"], c["V"], c["L"]
    for n in range(N):
        for m in range(N):
            dnm = DC[..., n, m]
            if not np.any(dnm):
                continue
            f = dnm[..., None, None] * rho
            if n == m:
                out = out + 0.5 * d2(f, n, h[n], per, method)
            else:
                out = out + 0.5 * d11(f, n, m, h[n], h[m], per, method)
    LR = np.einsum("...aij,...jk->...aik", L, rho)
    for n in range(N):
        g = G[..., n, :]
        flux = -V[..., n, None, None] * rho
        if np.any(g):
            J = np.einsum("...a,...aik->...ik", g.conj(), LR)
            flux = flux + J + dagger(J)
        if np.any(flux):
            out = out + d1(flux, n, h[n], per, method)
    return out


def fokker_planck_rhs(state, model, grid=None, method="central", tol_zero=TOL_ZERO):
    """Classical marginal derivative from the Fokker-Planck equation.

    ``dp/dt = 1/2 d_n d_m(DC p) - d_n(V p - 2 Re conj(G^{na}) <L_a> p)``; the
    conditional expectation is taken as zero where ``p <= tol_zero``.
    """
    rho, grid = _blocks(state, grid)
    N = grid.ndim
    c = model.on_grid(grid)
    per, h = grid.periodic, grid.spacing
    p = np.trace(rho, axis1=-2, axis2=-1).real
    trL = np.einsum("...aij,...ji->...a", c["L"], rho)
    trL = np.where((p > tol_zero)[..., None], trL, 0.0)
    out = np.zeros_like(p)
    DC, G, V = c["DC"], c["G"], c["V"]
    for n in range(N):
        for m in range(N):
            f = DC[..., n, m] * p
            if n == m:
                out = out + 0.5 * d2(f, n, h[n], per, method).real
            else:
                out = out + 0.5 * d11(f, n, m, h[n], h[m], per, method).real
        flux = V[..., n] * p - 2.0 * np.einsum("...a,...a->...", G[..., n, :].conj(), trL).real
        out = out - d1(flux, n, h[n], per, method).real
    return out


def cfl_limit(model, grid, c=0.25):
    """Largest stable step ``c * min h^2 / max eig DC`` (inf without diffusion)."""
    DC = model.on_grid(grid)["DC"]
    top = float(np.max(np.linalg.eigvalsh(DC.reshape(-1, grid.ndim, grid.ndim))))
    if top <= 0:
        return np.inf
    return c * min(grid.spacing) ** 2 / top


@dataclass
class GridSolution:
    grid: object
    times: np.ndarray
    blocks: np.ndarray  # (T, *grid.shape, d, d)

    def state(self, k):
        return HybridStateGrid(self.grid, self.blocks[k])

    def marginals(self):
        return np.trace(self.blocks, axis1=-2, axis2=-1).real

    def total_trace(self):
        return np.array([self.grid.integrate(m) for m in self.marginals()])

    def trace_drift(self):
        tr = self.total_trace()
        return float(np.max(np.abs(tr - tr[0])))


def integrate_grid(state, model, t_end, dt, sample_times=None, scheme="rk4", cfl=0.25, method="central",
                   boundary_tol=1e-8, strict=False):
    """Fixed-step RK4 integration of the diffusive HME on a grid.

    Raises :class:`CflViolation` when ``dt`` exceeds :func:`cfl_limit`.
    Inadmissible models are integrated with a warning unless ``strict``.
    On non-periodic grids the mass in the two outermost layers is
    monitored and :class:`BoundaryUnderflow` raised above ``boundary_tol``.
    """
    grid = state.grid
    lim = cfl_limit(model, grid, cfl)
    if dt > lim * (1 + 1e-12):
        raise CflViolation(f"dt={dt:g} exceeds the stability limit {lim:g}")
    ok, _ = validate_model(model, grid=grid)
    if not ok:
        if strict:
            raise InadmissibleModel("block matrix [[DQ, G^dag], [G, DC]] is not positive semidefinite")
        warnings.warn("integrating an inadmissible model", stacklevel=2)

    post = None
    if not grid.periodic:
        edge = np.zeros(grid.shape, dtype=bool)
        for ax in range(grid.ndim):
            sl = [slice(None)] * grid.ndim
            sl[ax] = [0, 1, grid.shape[ax] - 2, grid.shape[ax] - 1]
            edge[tuple(sl)] = True
        w = grid.weights()

        def post(y):
            mass = float(np.sum(np.trace(y, axis1=-2, axis2=-1).real * w * edge))
            if abs(mass) > boundary_tol:
                raise BoundaryUnderflow(f"probability {mass:.3g} reached the absorbing boundary")
            return y

    times, samples = fixed_step(lambda y: diffusive_rhs(y, model, grid, method), state.blocks, t_end, dt, scheme,
                                sample_times, post)
    return GridSolution(grid, times, samples)


# epsilon lattice model ------------------------------------------------------

def build_epsilon_model(model, lattice, tol=1e-12):
    """Discrete jump model whose small-spacing limit is the diffusive HME.

    ``lattice`` is a periodic 1-D :class:`~hybridsim.state.Grid` whose
    spacing plays the role of ``eps``.  Generators hop to ``y +- eps``:
    quantum ones carry ``L_a(y)/sqrt 2``, the classical one ``-+1/(sqrt 2 eps)``.
    The joint matrix ``[[DQ, G^T], [conj G, DC]]`` at each source is
    diagonalized and every nonzero eigenvector becomes one generator.
    The drift ``V`` enters through upwind hops (first order in ``eps``).
    """
    if model.N != 1 or lattice.ndim != 1:
        raise UnsupportedXDependence("the lattice construction is implemented for one classical dimension")
    if not lattice.periodic:
        raise ValueError("the lattice must be periodic")
    if not model.G.constant:
        Gt = model.G.on_grid(lattice)
        if np.max(np.abs(Gt - Gt[0])) > 0:
            raise UnsupportedXDependence("backaction G must be constant over the lattice")
    K = lattice.shape[0]
    eps = lattice.spacing[0]
    d, A = model.d, model.A
    c = model.on_grid(lattice)
    up = (np.arange(K) + 1) % K
    down = (np.arange(K) - 1) % K
    # base generators J_i, i < A quantum, i = A classical: (A+1, K, K, d, d)
    J = np.zeros((A + 1, K, K, d, d), dtype=complex)
    eye = np.eye(d)
    for y in range(K):
        for a in range(A):
            J[a, up[y], y] = c["L"][y, a] / np.sqrt(2.0)
            J[a, down[y], y] = c["L"][y, a] / np.sqrt(2.0)
        J[A, down[y], y] = eye / (np.sqrt(2.0) * eps)
        J[A, up[y], y] = -eye / (np.sqrt(2.0) * eps)
    gens = []
    per_source = []
    for y in range(K):
        Km = np.zeros((A + 1, A + 1), dtype=complex)
        Km[:A, :A] = c["DQ"][y]
        Km[:A, A] = c["G"][y, 0]
        Km[A, :A] = np.conj(c["G"][y, 0])
        Km[A, A] = c["DC"][y, 0, 0]
        w, U = np.linalg.eigh(Km)
        scale = max(1.0, np.max(np.abs(w)))
        if w[0] < -1e-9 * scale:
            raise InadmissibleModel(f"joint noise matrix has eigenvalue {w[0]:.3g} at lattice node {y}")
        per_source.append((np.clip(w, 0.0, None), U))
    for k in range(A + 1):
        Kk = np.zeros((K, K, d, d), dtype=complex)
        for y in range(K):
            w, U = per_source[y]
            if w[k] <= tol * max(1.0, w[-1]):
                continue
            coef = np.sqrt(w[k]) * np.conj(U[:, k])
            Kk[:, y] = np.einsum("i,ixuv->xuv", coef, J[:, :, y])
        if np.any(Kk):
            gens.append(Kk)
    V = c["V"][:, 0]
    if np.any(V):
        Kv = np.zeros((K, K, d, d), dtype=complex)
        for y in range(K):
            r = np.sqrt(abs(V[y]) / eps)
            Kv[up[y] if V[y] > 0 else down[y], y] = r * eye
        gens.append(Kv)
    H = np.array(c["H"])
    points = list(lattice.axis(0))
    return DiscreteModel(points, H, np.array(gens) if gens else np.zeros((0, K, K, d, d)), check=False,
                         name="epsilon-lattice")
