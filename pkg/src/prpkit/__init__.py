"""Solvers for the pod repositioning problem in robotic mobile fulfilment warehouses.

The package offers an adaptive large neighbourhood search with
repositioning-specific destroy and repair operators, reference placement
policies with an exact oracle for tiny instances, and a variant in which a
learned policy picks the operators at every iteration.
"""

from .alns import SAParams, SearchStats, initial_solution, run_alns
from .baselines import (
    cheapest_place,
    exact_oracle,
    fixed_place,
    fixed_place_approx,
    random_place,
    tetris_baseline,
)
from .estimators import ALNSSolver, BaselineSolver, DRALNSSolver
from .exceptions import (
    CheckpointError,
    IncompleteSolutionError,
    InfeasibleInstanceError,
    InstanceFormatError,
    NotFittedError,
    PRPError,
    StreamError,
)
from .feasibility import feasible_locations, validate_solution
from .generators import build_medium_analog, build_medium_instance, build_small_instance, build_tiny_instance
from .io import load_instance, load_solution, save_instance, save_solution
from .model import Instance, Layout, Pod, Solution, solution_cost

__version__ = "0.1.0"

__all__ = [
    "SAParams", "SearchStats", "initial_solution", "run_alns", "cheapest_place", "exact_oracle",
    "fixed_place", "fixed_place_approx", "random_place", "tetris_baseline", "ALNSSolver",
    "BaselineSolver", "DRALNSSolver", "CheckpointError", "IncompleteSolutionError",
    "InfeasibleInstanceError", "InstanceFormatError", "NotFittedError", "PRPError", "StreamError",
    "feasible_locations", "validate_solution", "build_medium_analog", "build_medium_instance",
    "build_small_instance", "build_tiny_instance", "load_instance", "load_solution", "save_instance",
    "save_solution", "Instance", "Layout", "Pod", "Solution", "solution_cost",
]
