import os
import subprocess
import sys

import numpy as np
import pytest
from conftest import random_block, random_complex, random_hermitian

from hybridsim import kernels
from hybridsim.jump import run_jump_ensemble
from hybridsim.model import DiffusiveModel
from hybridsim.models import build_three_site, build_two_level
from hybridsim.noise import NoiseSpec
from hybridsim.state import TrajectoryState
from hybridsim.unravel import run_diffusive_ensemble

pytest.importorskip("numba")


def test_jump_backends_agree():
    m, init = build_three_site()
    t = np.linspace(0, 2, 11)
    a = run_jump_ensemble(init, m, 2.0, 1e-3, 64, seed=4, sample_times=t, backend="numba")
    b = run_jump_ensemble(init, m, 2.0, 1e-3, 64, seed=4, sample_times=t, backend="numpy")
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.jumps, b.jumps)
    np.testing.assert_allclose(a.psi, b.psi, atol=1e-12)


@pytest.mark.parametrize("mode", ["pure", "mixed"])
def test_diffusive_backends_agree(mode):
    rng = np.random.default_rng(0)
    DQ, DC, G = random_block(rng, 2, 1)
    # extra classical diffusion makes the zero choice realizable
    m = DiffusiveModel(1, 3, 2, H=random_hermitian(rng, 3), L=random_complex(rng, (2, 3, 3), 0.5), DQ=DQ,
                       DC=10 * DC, G=G, V=[0.4], domain=[(0.0, 2 * np.pi)])
    spec = NoiseSpec()
    psi = np.ones(3, dtype=complex) / np.sqrt(3)
    kw = dict(seed=1, spec=spec, mode=mode, sample_times=[0.0, 0.05, 0.1])
    a = run_diffusive_ensemble(TrajectoryState(0.3, psi=psi), m, 0.1, 1e-3, 16, backend="numba", **kw)
    b = run_diffusive_ensemble(TrajectoryState(0.3, psi=psi), m, 0.1, 1e-3, 16, backend="numpy", **kw)
    np.testing.assert_allclose(a.states, b.states, atol=1e-10)
    np.testing.assert_allclose(a.x, b.x, atol=1e-12)


def test_monitored_backends_agree():
    psi = np.array([1, 1], dtype=complex) / np.sqrt(2)
    kw = dict(seed=2, mode="monitored", sample_times=[0.0, 0.1])
    a = run_diffusive_ensemble(TrajectoryState(0.0, psi=psi), build_two_level(1.0), 0.1, 1e-3, 8, backend="numba", **kw)
    b = run_diffusive_ensemble(TrajectoryState(0.0, psi=psi), build_two_level(1.0), 0.1, 1e-3, 8, backend="numpy", **kw)
    np.testing.assert_allclose(a.states, b.states, atol=1e-12)


def test_backend_resolution():
    assert kernels.resolve_backend("numpy") == "numpy"
    with pytest.raises(ValueError):
        kernels.resolve_backend("fortran")


@pytest.mark.parametrize("flag,expected", [("0", "numpy"), ("1", "numba")])
def test_env_flag_selects_backend(flag, expected):
    code = "from hybridsim import kernels; print(kernels.resolve_backend())"
    env = dict(os.environ, HYBRIDSIM_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
