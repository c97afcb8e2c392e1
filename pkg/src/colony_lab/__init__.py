"""Ant-colony TSP simulation with an evolving population of heuristic styles."""

from .engine import (
    AntParams,
    AntsDecay,
    ColonyConfig,
    PheromoneField,
    RunTrace,
    ant_walk,
    deposit_pheromone,
    evaporate,
    p_schedule,
    run_colony,
    select_winners,
    transition_probabilities,
)
from .errors import DegenerateRegionError, InvalidTourError, SizeExceededError
from .experiments import (
    ErrorCurve,
    TrainingConfig,
    TrainResult,
    error_curve,
    improvement_vs_stage,
    scale_sweep,
    stage_analysis,
    survival_scenarios,
    train_population,
)
from .localsearch import ReferenceCache, reference_optimum, two_opt
from .population import (
    ContributorSet,
    GridSummary,
    ParamGrid,
    StageBuckets,
    empirical_distribution,
    evolve,
    evolve_staged,
    load_grid,
    sample_params,
    save_grid,
    summarize,
    tv_distance,
    uniform_grid,
)
from .tsp import (
    Instance,
    RegionSpec,
    Tour,
    exact_optimum,
    generate_instance,
    nearest_neighbor_tour,
    tour_length,
)

__version__ = "0.1.0"
