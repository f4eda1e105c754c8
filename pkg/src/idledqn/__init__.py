"""Distributed quasi-Newton (DQN) optimization with randomized node idling."""

from .objective import PenaltyModel, QuadraticProblem, generate_quadratics
from .schedule import ActivationSchedule, tuned_sigma
from .solver import RunTrace, SolverConfig, run
from .splitting import compute_constants, limiting_error_bound
from .topology import WeightedGraph, generate_rgg, metropolis_weights

__all__ = [
    "ActivationSchedule", "PenaltyModel", "QuadraticProblem", "RunTrace", "SolverConfig",
    "WeightedGraph", "compute_constants", "generate_quadratics", "generate_rgg",
    "limiting_error_bound", "metropolis_weights", "run", "tuned_sigma",
]
