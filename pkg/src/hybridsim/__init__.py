"""Simulation of hybrid classical-quantum master equations and their unravelings."""
__version__ = "0.1.0"

from .discrete import hme_rhs, integrate_discrete, kinetic_rhs, transition_rates
from .errors import *  # noqa: F401,F403
from .grid import build_epsilon_model, cfl_limit, diffusive_rhs, fokker_planck_rhs, integrate_grid
from .jump import ensemble_estimate, jump_rates, run_jump_ensemble, simulate_jump_trajectory
from .model import (
    DiffusiveModel,
    DiscreteModel,
    Field,
    ValidationReport,
    canonical_backaction,
    gauge_shift_diffusive,
    gauge_shift_discrete,
    load_model,
    symplectic_matrix,
    validate_block,
    validate_model,
)
from .noise import NoiseSpec, build_noise_covariance, monitoring_map, sample_increments
from .state import (
    Grid,
    HybridStateDiscrete,
    HybridStateGrid,
    TrajectoryState,
    bloch_decompose,
    classical_marginal,
    conditional_state,
)
from .unravel import (
    purity_rate,
    replay_monitored,
    run_diffusive_ensemble,
    step_mixed,
    step_monitored,
    step_pure,
)
