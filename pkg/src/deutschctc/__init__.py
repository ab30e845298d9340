"""Simulation of CR quantum systems interacting with Deutsch-model CTCs."""

from . import deutsch, protocols, qmath, runner
from .deutsch import (
    DeutschMap,
    EpsilonModel,
    FixedPointSet,
    apply_deutsch_map,
    approx_teleport_condition,
    cr_output,
    epsilon_close,
    epsilon_final_state,
    evolve,
    fixed_point_set,
    liouville_matrix,
    max_entropy_fixed_point,
    nonlinearity_witness,
)
from .errors import (
    ConfigurationError,
    ConsistencyError,
    ContractError,
    CTCError,
    DimensionError,
    InvalidStateError,
    SolverError,
)

__version__ = "0.1.0"
