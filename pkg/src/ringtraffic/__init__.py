"""Reproducible thread-parallel Nagel-Schreckenberg traffic on a ring road."""

from .model import (
    AgentState,
    GridState,
    InvalidParametersError,
    Observables,
    OutputMode,
    SimParams,
    agent_to_grid,
    gap_ahead,
    grid_to_agent,
    init_state,
    measure,
    step_grid_serial,
    step_serial,
)
from .parallel import Partition, RunResult, checksum_trajectory, make_partition, run, step_parallel
from .prng import LcgState, jump_coefficients, lcg_jump, lcg_next, seed_lcg, uniform01

__version__ = "0.1.0"
