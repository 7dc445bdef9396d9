import numpy as np
import pytest

from hybridsim.model import DiffusiveModel, DiscreteModel
from hybridsim.state import Grid, HybridStateDiscrete, HybridStateGrid


def random_hermitian(rng, d, scale=1.0):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (m + m.conj().T)


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))


def random_density(rng, d, rank=None):
    r = d if rank is None else rank
    a = random_complex(rng, (d, r))
    rho = a @ a.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_discrete_model(rng, K=3, d=2, A=2, sparsity=0.5):
    H = np.array([random_hermitian(rng, d) for _ in range(K)])
    gens = random_complex(rng, (A, K, K, d, d), 0.5)
    mask = rng.random((A, K, K)) < sparsity
    gens[mask] = 0.0
    return DiscreteModel(list(range(K)), H, gens, check=False)


def random_discrete_state(rng, K=3, d=2):
    blocks = np.array([random_density(rng, d) * w for w in rng.dirichlet(np.ones(K))])
    return HybridStateDiscrete(list(range(K)), blocks)


def random_block(rng, A, N, complex_g=True):
    """Admissible (DQ, DC, G) from a random PSD block matrix."""
    n = A + N
    m = random_complex(rng, (n, n)) if complex_g else rng.normal(size=(n, n))
    D = m @ m.conj().T
    DQ = D[:A, :A]
    G = D[A:, :A]
    DC = D[A:, A:].real
    if complex_g:
        # the classical block must be real; rebuild a real DC that dominates
        DC = DC + np.abs(D[A:, A:].imag).sum() * np.eye(N)
    return DQ, DC, G


def random_diffusive_model(rng, d=2, A=2, N=1, with_v=True):
    DQ, DC, G = random_block(rng, A, N)
    L = random_complex(rng, (A, d, d), 0.5)
    H = random_hermitian(rng, d)
    V = rng.normal(size=N) if with_v else np.zeros(N)
    return DiffusiveModel(N, d, A, H=H, L=L, DQ=DQ, DC=DC, G=G, V=V, domain=[(0.0, 2 * np.pi)] * N)


def smooth_grid_state(grid, d=2, seed=0):
    """Smooth positive hybrid density on a periodic grid."""
    rng = np.random.default_rng(seed)
    x = grid.nodes()
    blocks = np.zeros(grid.shape + (d, d), dtype=complex)
    for _ in range(3):
        k = rng.integers(0, 3, size=grid.ndim)
        ph = rng.uniform(0, 2 * np.pi)
        prof = 1.2 + np.cos(np.sum(k * x, axis=-1) + ph)
        blocks += prof[..., None, None] * random_density(rng, d)
    return HybridStateGrid(grid, blocks / grid.integrate(np.trace(blocks, axis1=-2, axis2=-1).real))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def circle_grid():
    return Grid.interval(64, 0.0, 2 * np.pi)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
