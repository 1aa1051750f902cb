"""Projection congruent subset (PCS) outlyingness, estimators and breakdown lab."""

from pcs.dataset import (
    Dataset,
    Tolerances,
    breakdown_bound,
    check_general_position,
    default_h,
    load_csv,
)
from pcs.geometry import Direction, DirectionSet, enumerate_directions, sample_directions, solve_direction
from pcs.incongruence import h_neighborhood, incongruence_along, incongruence_index
from pcs.solver import PcsFit, SolverConfig, estimate, fit, robust_distances, solve_exact, solve_randomized

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Direction",
    "DirectionSet",
    "PcsFit",
    "SolverConfig",
    "Tolerances",
    "breakdown_bound",
    "check_general_position",
    "default_h",
    "enumerate_directions",
    "estimate",
    "fit",
    "h_neighborhood",
    "incongruence_along",
    "incongruence_index",
    "load_csv",
    "robust_distances",
    "sample_directions",
    "solve_direction",
    "solve_exact",
    "solve_randomized",
]
