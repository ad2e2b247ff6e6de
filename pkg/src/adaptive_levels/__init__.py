"""Agent-based adaptive level generation for a projectile physics puzzle.

Parameter sets for a stochastic level generator are evolved with a genetic
algorithm. Fitness comes from simulated playthroughs by scripted agents, so
that generated levels either hit a target solve-rate for one agent or are
especially hard for one agent relative to the others.
"""

from adaptive_levels.level import (
    Level,
    ParameterSet,
    PlacementError,
    generate_level,
    random_parameter_set,
    sample_weighted,
)
from adaptive_levels.sim import ScoreRules, Shot, SimOutcome, max_score, simulate, trajectory_hit
from adaptive_levels.difficulty import (
    FitnessConfig,
    PlayRecord,
    d_score,
    d_solve,
    fitness_m,
    fitness_p,
)
from adaptive_levels.agents import AgentProfile, CalibrationReport, hyper_select, match_player, play_level
from adaptive_levels.evolution import GAConfig, run_evolution
from adaptive_levels.experiment import (
    ExperimentConfig,
    ResultsTable,
    assemble_benchmark,
    calibrate,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AgentProfile",
    "CalibrationReport",
    "ExperimentConfig",
    "FitnessConfig",
    "GAConfig",
    "Level",
    "ParameterSet",
    "PlacementError",
    "PlayRecord",
    "ResultsTable",
    "ScoreRules",
    "Shot",
    "SimOutcome",
    "assemble_benchmark",
    "calibrate",
    "d_score",
    "d_solve",
    "fitness_m",
    "fitness_p",
    "generate_level",
    "hyper_select",
    "match_player",
    "max_score",
    "play_level",
    "random_parameter_set",
    "run_evolution",
    "run_experiment",
    "sample_weighted",
    "simulate",
    "trajectory_hit",
]
