"""Model definitions and admissibility checks.

Discrete models carry generators ``L[alpha, x, y]`` (the operator moving
weight from ``y`` to ``x``).  Diffusive models carry coefficient fields over
``x``: Hamiltonian, generators, decoherence ``DQ``, diffusion ``DC``,
backaction ``G`` (N x A) and drift ``V``.  Complete positivity of the
diffusive equation is ``[[DQ, G^dag], [G, DC]] >= 0`` at every point.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ._config import TOL_RANK
from .errors import NonHermitianInput, OddDimension, ShapeMismatch, ValidationError
from .state import Grid, dagger, decode_complex, encode_complex


# coefficient fields ---------------------------------------------------------

class Field:
    """Constant array or function of ``x`` with a fixed value shape.

    Functions receive points of shape ``(..., N)`` and return
    ``(..., *shape)`` (anything broadcastable to it).
    """

    def __init__(self, spec, shape, dtype=complex):
        self.shape = tuple(shape)
        self.dtype = dtype
        self.grid = None
        self.table = None
        if isinstance(spec, Field):
            self.value, self.func = spec.value, spec.func
            self.grid, self.table = spec.grid, spec.table
            if spec.shape != self.shape:
                raise ShapeMismatch(f"field shape {spec.shape} != expected {self.shape}")
        elif callable(spec):
            self.value, self.func = None, spec
        else:
            arr = np.asarray(spec, dtype=dtype)
            if arr.shape != self.shape:
                raise ShapeMismatch(f"constant of shape {arr.shape}, expected {self.shape}")
            self.value, self.func = arr, None

    @property
    def constant(self):
        return self.value is not None

    def at(self, x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        if self.value is not None:
            return np.broadcast_to(self.value, lead + self.shape)
        out = np.asarray(self.func(x), dtype=self.dtype)
        try:
            return np.broadcast_to(out, lead + self.shape)
        except ValueError:
            raise ShapeMismatch(f"field function returned {out.shape}, expected {lead + self.shape}") from None

    def on_grid(self, grid):
        if self.table is not None and self.grid == grid:
            return self.table
        return self.at(grid.nodes())

    @classmethod
    def from_table(cls, grid, table, shape, dtype=complex):
        """Per-node table, linearly interpolated between nodes."""
        table = np.asarray(table, dtype=dtype).reshape(grid.shape + tuple(shape))
        interp = _grid_interpolator(grid, table)
        f = cls(interp, shape, dtype)
        f.grid, f.table = grid, table
        return f


def _grid_interpolator(grid, table):
    from scipy.interpolate import RegularGridInterpolator

    axes = [grid.axis(i) for i in range(grid.ndim)]
    data = table
    if grid.periodic:
        for i in range(grid.ndim):
            axes[i] = np.append(axes[i], axes[i][-1] + grid.spacing[i])
            first = np.take(data, [0], axis=i)
            data = np.concatenate([data, first], axis=i)
    vshape = table.shape[grid.ndim:]
    flat = data.reshape(data.shape[: grid.ndim] + (-1,))
    rgi = RegularGridInterpolator(axes, flat, bounds_error=False, fill_value=None)

    def f(x):
        x = np.asarray(x, dtype=float)
        xw = grid.wrap(x)
        out = rgi(xw.reshape(-1, grid.ndim))
        return out.reshape(x.shape[:-1] + vshape)

    return f


def _combine(fields, fn, shape, dtype=complex):
    """Field whose value is ``fn(*values)`` pointwise."""
    if all(f.constant for f in fields):
        return Field(fn(*[f.value for f in fields]), shape, dtype)
    return Field(lambda x: fn(*[f.at(x) for f in fields]), shape, dtype)


# models ---------------------------------------------------------------------

def _gram_rank(vectors, tol=1e-10):
    v = np.asarray(vectors)
    if v.shape[0] == 0:
        return 0
    gram = v.conj() @ v.T
    ev = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
    if ev[-1] <= 0:
        return 0
    return int(np.sum(ev > tol * ev[-1]))


class DiscreteModel:
    """Canonical discrete hybrid master equation.

    Parameters
    ----------
    points : list
        Classical labels; optionally tuples for the vector-valued case.
    H : array (K, d, d)
        Hermitian Hamiltonian per point.
    generators : array (A, K, K, d, d)
        ``generators[a, i, j]`` is L_a(points[i], points[j]).
    check : bool
        Enforce Hermiticity and linear independence of the generator
        family (and of ``I * delta(x, y)``).
    """

    def __init__(self, points, H, generators, check=True, name=None):
        self.points = list(points)
        K = len(self.points)
        self.H = np.asarray(H, dtype=complex)
        if self.H.ndim != 3 or self.H.shape[0] != K or self.H.shape[1] != self.H.shape[2]:
            raise ShapeMismatch(f"H must be (K, d, d) with K={K}, got {self.H.shape}")
        d = self.H.shape[-1]
        gens = np.asarray(generators, dtype=complex)
        if gens.size == 0:
            gens = np.zeros((0, K, K, d, d), dtype=complex)
        if gens.ndim != 5 or gens.shape[1:] != (K, K, d, d):
            raise ShapeMismatch(f"generators must be (A, K, K, d, d), got {gens.shape}")
        self.generators = gens
        self.name = name
        if np.max(np.abs(self.H - dagger(self.H)), initial=0.0) > 1e-12 * max(1.0, np.abs(self.H).max()):
            raise NonHermitianInput("Hamiltonian blocks must be Hermitian")
        if check:
            self.check_independence()

    @property
    def n_points(self):
        return len(self.points)

    @property
    def dim(self):
        return self.H.shape[-1]

    @property
    def n_generators(self):
        return self.generators.shape[0]

    def index(self, x):
        return self.points.index(x)

    def check_independence(self, tol=1e-10):
        A = self.n_generators
        vecs = [self.generators[a].ravel() for a in range(A)]
        ident = np.zeros((self.n_points, self.n_points, self.dim, self.dim), dtype=complex)
        for k in range(self.n_points):
            ident[k, k] = np.eye(self.dim)
        vecs.append(ident.ravel())
        if _gram_rank(np.array(vecs), tol) != A + 1:
            raise ValidationError("generators are not linearly independent (with I*delta(x,y))")

    def loss_operators(self):
        """``sum_{y, a} L_a(y, x)^dag L_a(y, x)`` for every x, shape (K, d, d)."""
        L = self.generators
        return np.einsum("ayxji,ayxjk->xik", L.conj(), L)

    def replace(self, H=None, generators=None, check=False):
        return DiscreteModel(
            self.points,
            self.H if H is None else H,
            self.generators if generators is None else generators,
            check=check,
            name=self.name,
        )

    def channels(self, tol=0.0):
        """Nonzero (alpha, destination index) pairs leaving each source index."""
        out = []
        for j in range(self.n_points):
            ch = []
            for a in range(self.n_generators):
                for i in range(self.n_points):
                    if np.max(np.abs(self.generators[a, i, j])) > tol:
                        ch.append((a, i))
            out.append(ch)
        return out


class DiffusiveModel:
    """Diffusive (covariant) hybrid master equation in N classical dimensions.

    All coefficient arguments accept a constant array, a function of ``x``
    or a :class:`Field`.  ``domain`` optionally fixes the periodic box
    ``[(lower, upper), ...]`` that trajectories are wrapped into.
    """

    def __init__(self, N, hilbert_dim, n_generators, H=None, L=None, DQ=None, DC=None, G=None, V=None,
                 domain=None, periodic=True, name=None):
        self.N, self.d, self.A = int(N), int(hilbert_dim), int(n_generators)
        N, d, A = self.N, self.d, self.A
        self.H = Field(np.zeros((d, d)) if H is None else H, (d, d))
        self.L = Field(np.zeros((A, d, d)) if L is None else L, (A, d, d))
        self.DQ = Field(np.zeros((A, A)) if DQ is None else DQ, (A, A))
        self.DC = Field(np.zeros((N, N)) if DC is None else DC, (N, N), float)
        self.G = Field(np.zeros((N, A)) if G is None else G, (N, A))
        self.V = Field(np.zeros(N) if V is None else V, (N,), float)
        self.domain = None if domain is None else [tuple(map(float, b)) for b in domain]
        self.periodic = bool(periodic)
        self.name = name
        self._grid_cache = {}

    @property
    def fields(self):
        return {"H": self.H, "L": self.L, "DQ": self.DQ, "DC": self.DC, "G": self.G, "V": self.V}

    def replace(self, **kw):
        args = dict(self.fields)
        args.update(kw)
        return DiffusiveModel(self.N, self.d, self.A, domain=self.domain, periodic=self.periodic,
                              name=self.name, **args)

    def at(self, x):
        """Coefficients at points ``x`` of shape (..., N)."""
        return {k: f.at(x) for k, f in self.fields.items()}

    def on_grid(self, grid):
        key = grid
        if key not in self._grid_cache:
            if grid.ndim != self.N:
                raise ShapeMismatch(f"grid has {grid.ndim} axes, model has N={self.N}")
            self._grid_cache[key] = {k: f.on_grid(grid) for k, f in self.fields.items()}
        return self._grid_cache[key]

    def is_constant(self, names=("H", "L", "DQ", "DC", "G", "V")):
        return all(self.fields[n].constant for n in names)

    def wrap(self, x):
        if self.domain is None or not self.periodic:
            return x
        lo = np.array([b[0] for b in self.domain])
        ext = np.array([b[1] - b[0] for b in self.domain])
        return lo + np.mod(x - lo, ext)


# validation -----------------------------------------------------------------

def numerical_rank(M, tol_rank=TOL_RANK):
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol_rank * s[0]))


def _require_hermitian(M, name, tol=1e-10):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got {M.shape}")
    scale = max(1.0, np.max(np.abs(M), initial=0.0))
    if np.max(np.abs(M - M.conj().T), initial=0.0) > tol * scale:
        raise NonHermitianInput(f"{name} is not Hermitian")


def pseudo_inverse(M, tol_rank=TOL_RANK):
    """Moore-Penrose inverse of a Hermitian matrix via its eigenbasis.

    Eigenvalues below ``tol_rank * max|eig|`` are treated as zero.
    """
    M = np.asarray(M)
    _require_hermitian(M, "matrix")
    if M.size == 0:
        return M.copy()
    w, U = np.linalg.eigh(0.5 * (M + M.conj().T))
    top = np.max(np.abs(w))
    if top == 0:
        return np.zeros_like(M)
    keep = np.abs(w) > tol_rank * top
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    out = (U * inv) @ U.conj().T
    return out.real.copy() if np.isrealobj(M) else out


def block_matrix(DQ, DC, G):
    DQ, DC, G = np.asarray(DQ, complex), np.asarray(DC, complex), np.asarray(G, complex)
    return np.block([[DQ, G.conj().T], [G, DC]])


def _check_block_inputs(DQ, DC, G):
    DQ = np.atleast_2d(np.asarray(DQ, dtype=complex))
    DC = np.asarray(DC)
    if np.iscomplexobj(DC):
        if np.max(np.abs(DC.imag), initial=0.0) > 1e-12 * max(1.0, np.abs(DC).max()):
            raise NonHermitianInput("DC must be real")
        DC = DC.real
    DC = np.atleast_2d(np.asarray(DC, dtype=float))
    G = np.asarray(G, dtype=complex)
    if G.ndim == 0:
        G = G.reshape(1, 1)
    A, N = DQ.shape[0], DC.shape[0]
    if G.shape != (N, A):
        raise ShapeMismatch(f"G must be (N, A) = ({N}, {A}), got {G.shape}")
    _require_hermitian(DQ, "DQ")
    _require_hermitian(DC, "DC")
    return DQ, DC, G


@dataclass
class ValidationReport:
    psd_ok: bool
    min_eig: float
    tol: float
    rank_D: int
    rank_G: int
    rank_DQ: int
    rank_DC: int
    tol_rank: float
    minimum_noise: bool
    monitoring_ok: bool
    residual_dc_bound: float
    residual_dq_range: float
    residual_dq_bound: float
    residual_dc_range: float
    monitoring_residual: float
    verdict_dq_schur: bool
    verdict_dc_schur: bool

    @property
    def consistent(self):
        return self.psd_ok == self.verdict_dq_schur == self.verdict_dc_schur

    def to_dict(self):
        d = asdict(self)
        d["consistent"] = self.consistent
        return d


def _max_eig(M):
    if M.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[-1])


def _min_eig(M):
    if M.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


def validate_block(DQ, DC, G, tol_rank=TOL_RANK, tol=1e-9):
    """Positivity of the decoherence/backaction/diffusion block matrix.

    The direct eigenvalue verdict is cross-checked against the two
    generalized-inverse characterizations:
    ``G DQ^+ G^dag <= DC`` with ``G DQ^+ DQ G^dag = G G^dag``, and
    ``G^dag DC^+ G <= DQ`` with ``G^dag DC^+ DC G = G^dag G``.
    Tolerances are relative to the largest eigenvalue of the block matrix.
    """
    DQ, DC, G = _check_block_inputs(DQ, DC, G)
    D = block_matrix(DQ, DC, G)
    ev = np.linalg.eigvalsh(D) if D.size else np.zeros(1)
    scale = max(1.0, float(np.max(np.abs(ev))))
    atol = tol * scale
    min_eig = float(ev[0])
    psd_ok = min_eig >= -atol

    DQp = pseudo_inverse(DQ, tol_rank)
    DCp = pseudo_inverse(DC, tol_rank)
    Gh = G.conj().T
    r_dc_bound = max(0.0, _max_eig(G @ DQp @ Gh - DC))
    r_dq_range = float(np.max(np.abs(G @ DQp @ DQ @ Gh - G @ Gh), initial=0.0))
    r_dq_bound = max(0.0, _max_eig(Gh @ DCp @ G - DQ))
    r_dc_range = float(np.max(np.abs(Gh @ DCp @ DC @ G - Gh @ G), initial=0.0))
    v_dq = _min_eig(DQ) >= -atol and r_dc_bound <= atol and r_dq_range <= atol
    v_dc = _min_eig(DC) >= -atol and r_dq_bound <= atol and r_dc_range <= atol

    rank_D = int(np.sum(ev > tol_rank * scale)) if D.size else 0
    rank_G = numerical_rank(G, tol_rank)
    mon_res = float(np.max(np.abs(DQ - Gh @ DCp @ G), initial=0.0))
    return ValidationReport(
        psd_ok=bool(psd_ok),
        min_eig=min_eig,
        tol=atol,
        rank_D=rank_D,
        rank_G=rank_G,
        rank_DQ=numerical_rank(DQ, tol_rank),
        rank_DC=numerical_rank(DC, tol_rank),
        tol_rank=tol_rank,
        minimum_noise=bool(psd_ok and rank_D == rank_G),
        monitoring_ok=bool(psd_ok and mon_res <= atol),
        residual_dc_bound=r_dc_bound,
        residual_dq_range=r_dq_range,
        residual_dq_bound=r_dq_bound,
        residual_dc_range=r_dc_range,
        monitoring_residual=mon_res,
        verdict_dq_schur=bool(v_dq),
        verdict_dc_schur=bool(v_dc),
    )


def fitted_frame(DQ, DC, G, tol_rank=TOL_RANK):
    """Transform to the frame where G is ``[[I_r, 0], [0, 0]]``.

    Uses the SVD ``G = U S V^dag``: classical side ``Lam = U^dag``,
    operator side ``M = V diag(1/s, 1)``.  Returns ``(DQf, DCf, Gf, r)``
    with ``DQf = M^dag DQ M``, ``DCf = Lam DC Lam^dag``, ``Gf = Lam G M``.
    """
    DQ, DC, G = _check_block_inputs(DQ, DC, G)
    N, A = G.shape
    U, s, Vh = np.linalg.svd(G)
    r = int(np.sum(s > tol_rank * s[0])) if s.size and s[0] > 0 else 0
    scale = np.ones(A)
    scale[:r] = 1.0 / s[:r]
    M = Vh.conj().T * scale
    Lam = U.conj().T
    return M.conj().T @ DQ @ M, Lam @ DC @ Lam.conj().T, Lam @ G @ M, r


def check_minimum_noise(DQ, DC, G, tol_rank=TOL_RANK, tol=1e-8):
    """Minimum-noise threshold test: ``rank D == rank G``.

    Returns ``(ok, info)``.  ``info`` holds the ranks, the fitted-frame
    residual ``|DC_r DQ_r - I|`` on the active corner and the saturation
    residuals ``|G DQ^+ G^dag - DC|`` and ``|G^dag DC^+ G - DQ|``.
    """
    rep = validate_block(DQ, DC, G, tol_rank)
    DQ, DC, G = _check_block_inputs(DQ, DC, G)
    DQf, DCf, _, r = fitted_frame(DQ, DC, G, tol_rank)
    if r:
        frame_res = float(np.max(np.abs(DCf[:r, :r] @ DQf[:r, :r] - np.eye(r))))
    else:
        frame_res = 0.0
    Gh = G.conj().T
    sat_dc = float(np.max(np.abs(G @ pseudo_inverse(DQ, tol_rank) @ Gh - DC), initial=0.0))
    sat_dq = float(np.max(np.abs(Gh @ pseudo_inverse(DC, tol_rank) @ G - DQ), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(block_matrix(DQ, DC, G)))))
    rank_ok = rep.psd_ok and rep.rank_D == rep.rank_G
    ok = bool(rank_ok and frame_res <= tol * scale and sat_dc <= tol * scale and sat_dq <= tol * scale)
    info = {
        "rank_D": rep.rank_D,
        "rank_G": rep.rank_G,
        "psd_ok": rep.psd_ok,
        "frame_residual": frame_res,
        "saturation_dc": sat_dc,
        "saturation_dq": sat_dq,
        "report": rep,
    }
    return ok, info


def check_monitoring(DQ, DC, G, tol=1e-9, tol_rank=TOL_RANK):
    """True iff ``DQ == G^dag DC^+ G`` (to ``tol`` relative)."""
    rep = validate_block(DQ, DC, G, tol_rank, tol)
    return rep.monitoring_ok


def validate_model(model, grid=None, points=None, tol_rank=TOL_RANK, tol=1e-9):
    """Per-node block validation of a diffusive model.

    Returns ``(admissible, reports)`` where ``reports`` is a list over the
    evaluated points.  Constant models are checked once.
    """
    if model.is_constant(("DQ", "DC", "G")):
        xs = np.zeros((1, model.N))
    elif grid is not None:
        xs = grid.nodes().reshape(-1, model.N)
    elif points is not None:
        xs = np.atleast_2d(np.asarray(points, dtype=float))
    else:
        raise ValueError("x-dependent model needs a grid or points to validate on")
    DQ, DC, G = model.DQ.at(xs), model.DC.at(xs), model.G.at(xs)
    reports = [validate_block(DQ[k], DC[k], G[k], tol_rank, tol) for k in range(xs.shape[0])]
    return all(r.psd_ok for r in reports), reports


def summarize_reports(reports):
    """Worst-case summary over per-node reports (JSON friendly)."""
    worst = min(range(len(reports)), key=lambda k: reports[k].min_eig)
    return {
        "admissible": all(r.psd_ok for r in reports),
        "minimum_noise": all(r.minimum_noise for r in reports),
        "monitoring_ok": all(r.monitoring_ok for r in reports),
        "consistent": all(r.consistent for r in reports),
        "n_nodes": len(reports),
        "worst_node": worst,
        "worst": reports[worst].to_dict(),
    }


# gauge shifts -------------------------------------------------------------

def gauge_shift_discrete(model, ell):
    """Shift diagonal generators by ``ell[a, k] * I`` and compensate in H.

    ``H(x) -= (i/2) sum_a (conj(ell_a) L_a(x,x) - h.c.)`` with the original
    generators, which leaves the master equation unchanged.
    """
    ell = np.asarray(ell, dtype=complex)
    A, K, d = model.n_generators, model.n_points, model.dim
    if ell.shape != (A, K):
        raise ShapeMismatch(f"ell must be (A, K) = ({A}, {K}), got {ell.shape}")
    gens = model.generators.copy()
    H = model.H.copy()
    eye = np.eye(d)
    for k in range(K):
        for a in range(A):
            Ld = model.generators[a, k, k]
            X = np.conj(ell[a, k]) * Ld
            H[k] -= 0.5j * (X - X.conj().T)
            gens[a, k, k] = Ld + ell[a, k] * eye
    return model.replace(H=H, generators=gens)


def gauge_shift_diffusive(model, ell):
    """Diffusive counterpart of the generator shift.

    ``L_a -> L_a + ell_a``,
    ``H -> H - (i/2) DQ^{ba} (conj(ell_b) L_a - ell_a L_b^dag)``,
    ``V^n -> V^n + 2 Re(conj(G^{na}) ell_a)``.
    ``ell`` is a constant (A,) vector, a function of x or a Field.
    """
    A, d = model.A, model.d
    ellf = Field(ell, (A,))
    eye = np.eye(d)

    def new_L(L, e):
        return L + e[..., :, None, None] * eye

    def new_H(H, L, DQ, e):
        # X = sum_{a,b} DQ[b, a] conj(e_b) L_a
        X = np.einsum("...ba,...b,...aij->...ij", DQ, np.conj(e), L)
        return H - 0.5j * (X - dagger(X))

    def new_V(V, G, e):
        return V + 2.0 * np.einsum("...na,...a->...n", np.conj(G), e).real

    return model.replace(
        H=_combine([model.H, model.L, model.DQ, ellf], new_H, (d, d)),
        L=_combine([model.L, ellf], new_L, (A, d, d)),
        V=_combine([model.V, model.G, ellf], new_V, (model.N,), float),
    )


# canonical backaction -------------------------------------------------------

def symplectic_matrix(n):
    """``[[0, I], [-I, 0]]`` for n = 2k canonical variables (q first, p second)."""
    if n % 2:
        raise OddDimension(f"canonical phase space needs an even dimension, got {n}")
    k = n // 2
    eps = np.zeros((n, n))
    eps[:k, k:] = np.eye(k)
    eps[k:, :k] = -np.eye(k)
    return eps


def canonical_backaction(grad_h):
    """Backaction ``G^{n a} = -1/2 eps^{nm} d_m h^a`` from coupling gradients.

    ``grad_h[..., m, a]`` is the derivative of coupling function ``h^a``
    with respect to ``x^m``.  Accepts an array or a function of ``x``.
    """
    if callable(grad_h):
        def G(x):
            g = np.asarray(grad_h(x), dtype=float)
            eps = symplectic_matrix(g.shape[-2])
            return -0.5 * np.einsum("nm,...ma->...na", eps, g)
        return G
    g = np.asarray(grad_h, dtype=float)
    eps = symplectic_matrix(g.shape[-2])
    return -0.5 * np.einsum("nm,...ma->...na", eps, g)


# model files ----------------------------------------------------------------

def _field_to_json(f, grid):
    if f.constant:
        return encode_complex(f.value)
    if grid is None:
        raise ValueError("x-dependent fields need a classical grid to be tabulated")
    return {"table": encode_complex(f.on_grid(grid).reshape((-1,) + f.shape))}


def _field_from_json(obj, grid, shape, dtype):
    if isinstance(obj, dict) and "table" in obj:
        if grid is None:
            raise ShapeMismatch("tabulated fields need a classical grid")
        table = decode_complex(obj["table"])
        if dtype is float:
            table = table.real
        return Field.from_table(grid, table, shape, dtype)
    val = decode_complex(obj)
    if dtype is float:
        val = val.real
    return Field(val.reshape(shape), shape, dtype)


def model_to_dict(model, grid=None):
    if isinstance(model, DiscreteModel):
        gens = []
        for a in range(model.n_generators):
            entries = []
            for i in range(model.n_points):
                for j in range(model.n_points):
                    m = model.generators[a, i, j]
                    if np.any(m != 0):
                        entries.append({"to": i, "from": j, "matrix": encode_complex(m)})
            gens.append(entries)
        pts = [list(p) if isinstance(p, tuple) else p for p in model.points]
        return {
            "kind": "discrete",
            "hilbert_dim": model.dim,
            "classical": {"points": pts},
            "H": encode_complex(model.H),
            "generators": gens,
        }
    classical = {"N": model.N}
    if grid is not None:
        classical["grid"] = grid.to_dict()
    if model.domain is not None:
        classical["domain"] = [list(b) for b in model.domain]
        classical["periodic"] = model.periodic
    d = {"kind": "diffusive", "hilbert_dim": model.d, "n_generators": model.A, "classical": classical}
    for key, f in model.fields.items():
        d["generators" if key == "L" else key] = _field_to_json(f, grid)
    return d


def model_from_dict(d):
    kind = d.get("kind", "diffusive" if "DQ" in d else "discrete")
    dim = int(d["hilbert_dim"])
    classical = d["classical"]
    if kind == "discrete":
        pts = [tuple(p) if isinstance(p, list) else p for p in classical["points"]]
        K = len(pts)
        H = decode_complex(d["H"]).reshape(K, dim, dim)
        gens = np.zeros((len(d["generators"]), K, K, dim, dim), dtype=complex)
        for a, entries in enumerate(d["generators"]):
            for e in entries:
                gens[a, int(e["to"]), int(e["from"])] = decode_complex(e["matrix"])
        return DiscreteModel(pts, H, gens, check=d.get("check", True), name=d.get("name"))
    grid = Grid.from_dict(classical["grid"]) if "grid" in classical else None
    N = int(classical.get("N", grid.ndim if grid is not None else 1))
    A = int(d.get("n_generators", len(decode_complex(d["generators"])) if not isinstance(d["generators"], dict) else 0))
    shapes = {"H": ((dim, dim), complex), "generators": ((A, dim, dim), complex), "DQ": ((A, A), complex),
              "DC": ((N, N), float), "G": ((N, A), complex), "V": ((N,), float)}
    kw = {}
    for key, (shape, dtype) in shapes.items():
        if key in d:
            kw["L" if key == "generators" else key] = _field_from_json(d[key], grid, shape, dtype)
    domain = classical.get("domain")
    if domain is None and grid is not None and grid.periodic:
        domain = [(o, o + e) for o, e in zip(grid.origin, grid.extent)]
    return DiffusiveModel(N, dim, A, domain=domain, periodic=classical.get("periodic", True),
                          name=d.get("name"), **kw)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
