"""Antenna-domain formation for cloud-RAN deployments.

Assign remote radio-heads to antenna domains so that inter-domain
interference coupling is small, then beamform inside each domain and measure
the resulting sum-rate.
"""

from .adf import (Assignment, FractionalAssignment, LoadingSpec, SolveTrace, objective,
                  project_to_feasible, random_assignment, residual, residual_assignment,
                  solve_bcd, solve_bcd_restarts, solve_block, solve_exhaustive,
                  solve_relaxed_bcd)
from .coupling import (CouplingMatrix, coupling_instantaneous, coupling_precoder_aware,
                       coupling_statistical)
from .errors import ConfigError, DimensionError, EvaluationError, InfeasibleError

__version__ = "0.1.0"
