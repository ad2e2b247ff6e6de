"""Genetic algorithm over generator parameter sets.

Each generation: evaluate every new individual by generating level(s) and
letting the agents play them, copy the top ``elitism_rate`` fraction
unchanged, and fill the rest with stochastic universal sampling, uniform
crossover and bounded mutation.

All randomness hangs off ``GAConfig.root_seed`` through :func:`derive`, so a
run is reproducible and does not depend on whether evaluation is serial or
spread over a process pool.
"""

from __future__ import annotations

import json
import logging
import math
import re
from concurrent.futures import Executor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from adaptive_levels.agents import AgentProfile, play_level
from adaptive_levels.difficulty import FitnessConfig, PlayRecord, level_fitness
from adaptive_levels.level import (
    GENOME_LENGTH,
    GENOME_SCHEMA_VERSION,
    ParameterSet,
    PlacementError,
    gene_bounds,
    generate_level,
    is_integer_gene,
    random_parameter_set,
)
from adaptive_levels.seeding import SeedLike, int_seed, make_rng
from adaptive_levels.sim import DEFAULT_RULES, ScoreRules

logger = logging.getLogger(__name__)

CROSSOVER_MODES = ("pair", "per-gene")


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 50
    generations: int = 30
    elitism_rate: float = 0.08
    crossover_prob: float = 0.25
    mutation_prob: float = 0.15
    levels_per_individual: int = 1
    attempts_per_level: int = 10
    root_seed: int = 0
    crossover_mode: str = "pair"
    mutation_sigma: float = 0.1

    def __post_init__(self):
        for name in ("elitism_rate", "crossover_prob", "mutation_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if self.levels_per_individual < 1 or self.attempts_per_level < 1:
            raise ValueError("levels_per_individual and attempts_per_level must be at least 1")
        if self.crossover_mode not in CROSSOVER_MODES:
            raise ValueError(f"crossover_mode must be one of {CROSSOVER_MODES}")
        if self.mutation_sigma < 0:
            raise ValueError("mutation_sigma must be non-negative")

    @property
    def elite_count(self) -> int:
        # round half up: 0.08 * 50 = 4 exactly, but avoid banker's rounding surprises
        return min(int(math.floor(self.elitism_rate * self.population_size + 0.5)), self.population_size)


@dataclass(frozen=True)
class LevelResult:
    seed: int
    level_id: str | None  # None when generation failed
    fitness: float
    records: Mapping[str, PlayRecord] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "level_id": self.level_id,
            "fitness": self.fitness,
            "records": {k: r.to_dict() for k, r in self.records.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LevelResult":
        return cls(
            seed=int(data["seed"]),
            level_id=data["level_id"],
            fitness=float(data["fitness"]),
            records={k: PlayRecord.from_dict(r) for k, r in data["records"].items()},
        )


@dataclass(frozen=True)
class EvaluatedIndividual:
    params: ParameterSet
    fitness: float
    levels: tuple[LevelResult, ...]

    @property
    def level_ids(self) -> tuple[str | None, ...]:
        return tuple(r.level_id for r in self.levels)

    @property
    def play_records(self) -> tuple[Mapping[str, PlayRecord], ...]:
        return tuple(r.records for r in self.levels)

    def to_dict(self) -> dict:
        return {
            "genome": self.params.to_genome(),
            "fitness": self.fitness,
            "levels": [r.to_dict() for r in self.levels],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluatedIndividual":
        return cls(
            params=ParameterSet.from_genome(data["genome"]),
            fitness=float(data["fitness"]),
            levels=tuple(LevelResult.from_dict(r) for r in data["levels"]),
        )


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    mean: float
    std: float
    best: float
    best_params: ParameterSet

    @classmethod
    def of(cls, generation: int, population: Sequence[EvaluatedIndividual]) -> "GenerationStats":
        values = np.array([ind.fitness for ind in population], dtype=float)
        best = int(np.argmax(values))
        return cls(
            generation=generation,
            mean=float(values.mean()),
            std=float(values.std()),
            best=float(values[best]),
            best_params=population[best].params,
        )

    def to_dict(self) -> dict:
        return {
            "generation": self.generation,
            "mean": self.mean,
            "std": self.std,
            "best": self.best,
            "best_genome": self.best_params.to_genome(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationStats":
        return cls(
            generation=int(data["generation"]),
            mean=float(data["mean"]),
            std=float(data["std"]),
            best=float(data["best"]),
            best_params=ParameterSet.from_genome(data["best_genome"]),
        )


@dataclass(frozen=True)
class EvalContext:
    """Everything a worker needs to score one individual."""

    fitness: FitnessConfig
    ga: GAConfig
    agents: Mapping[str, AgentProfile]
    rules: ScoreRules = DEFAULT_RULES

    def __post_init__(self):
        missing = [a for a in self.fitness.agents_needed if a not in self.agents]
        if missing:
            raise ValueError(f"no agent profile for {missing}")


@dataclass
class EvolutionRun:
    seed: int
    stats: list[GenerationStats] = field(default_factory=list)
    populations: list[list[EvaluatedIndividual]] = field(default_factory=list)

    @property
    def final_population(self) -> list[EvaluatedIndividual]:
        return self.populations[-1]


# -- evaluation --------------------------------------------------------------


def evaluate_individual(
    params: ParameterSet,
    fitness_config: FitnessConfig,
    ga_config: GAConfig,
    seed: SeedLike,
    agents: Mapping[str, AgentProfile],
    rules: ScoreRules = DEFAULT_RULES,
) -> EvaluatedIndividual:
    """Generate ``levels_per_individual`` levels, let the agents play, average the fitness.

    A level that cannot be generated scores the mode's failure fitness.
    """
    results = []
    for j in range(ga_config.levels_per_individual):
        level_seed = int_seed(seed, "level", j)
        try:
            level = generate_level(params, level_seed)
        except PlacementError as exc:
            logger.debug("placement failure (seed %d): %s", level_seed, exc)
            results.append(LevelResult(level_seed, None, fitness_config.failure_fitness))
            continue
        records = {
            agent_id: play_level(agents[agent_id], level, ga_config.attempts_per_level, level_seed, rules)
            for agent_id in fitness_config.agents_needed
        }
        results.append(LevelResult(level_seed, level.level_id, level_fitness(records, fitness_config), records))
    fitness = sum(r.fitness for r in results) / len(results)
    return EvaluatedIndividual(params, fitness, tuple(results))


def _evaluate_job(job: tuple[ParameterSet, EvalContext, SeedLike]) -> EvaluatedIndividual:
    params, ctx, seed = job
    return evaluate_individual(params, ctx.fitness, ctx.ga, seed, ctx.agents, ctx.rules)


def evaluate_population(
    params: Sequence[ParameterSet],
    ctx: EvalContext,
    seeds: Sequence[SeedLike],
    executor: Executor | None = None,
) -> list[EvaluatedIndividual]:
    jobs = [(p, ctx, s) for p, s in zip(params, seeds)]
    if executor is None:
        return [_evaluate_job(job) for job in jobs]
    return list(executor.map(_evaluate_job, jobs))


# -- operators ---------------------------------------------------------------


def sus_indices(fitnesses: Sequence[float], n: int, rng: np.random.Generator) -> list[int]:
    """Stochastic universal sampling: n evenly spaced pointers, one random offset.

    Falls back to uniform draws when the fitness total is not positive.
    """
    if len(fitnesses) == 0:
        raise ValueError("cannot select from an empty population")
    if n < 1:
        raise ValueError("n must be at least 1")
    if any(f < 0 for f in fitnesses):
        raise ValueError("SUS needs non-negative fitness values")
    weights = np.asarray(fitnesses, dtype=float)
    total = float(weights.sum())
    if total <= 0.0:
        return [int(i) for i in rng.integers(len(weights), size=n)]
    # work in units of one pointer spacing: individual i owns [C[i-1], C[i])
    # where C is the running sum of expected copy counts n * f / total
    expected = np.cumsum(weights / total * n)
    pointers = rng.uniform(0.0, 1.0) + np.arange(n)
    chosen = np.searchsorted(expected, pointers, side="right")
    return [int(i) for i in np.minimum(chosen, len(weights) - 1)]


def sus_select(
    population: Sequence[EvaluatedIndividual], n: int, rng: np.random.Generator
) -> list[EvaluatedIndividual]:
    return [population[i] for i in sus_indices([ind.fitness for ind in population], n, rng)]


def uniform_crossover(
    a: ParameterSet,
    b: ParameterSet,
    rng: np.random.Generator,
    prob: float = 0.25,
    mode: str = "pair",
) -> tuple[ParameterSet, ParameterSet]:
    """Uniform crossover.

    ``pair``: with probability ``prob`` the pair is crossed, and then every
    gene swaps with probability 0.5. ``per-gene``: every gene swaps with
    probability ``prob``.
    """
    ga, gb = a.to_genome(), b.to_genome()
    if mode == "pair":
        if rng.random() >= prob:
            return a, b
        swap = rng.random(GENOME_LENGTH) < 0.5
    elif mode == "per-gene":
        swap = rng.random(GENOME_LENGTH) < prob
    else:
        raise ValueError(f"unknown crossover mode {mode!r}")
    c1 = [y if s else x for x, y, s in zip(ga, gb, swap)]
    c2 = [x if s else y for x, y, s in zip(ga, gb, swap)]
    return ParameterSet.from_genome(c1), ParameterSet.from_genome(c2)


def mutate(
    params: ParameterSet, rng: np.random.Generator, prob: float = 0.15, sigma: float = 0.1
) -> ParameterSet:
    """Each gene mutates with probability ``prob``.

    Integer genes are redrawn uniformly from their range; weights get a
    Gaussian nudge clamped to [0, 1].
    """
    genome = params.to_genome()
    hits = rng.random(GENOME_LENGTH) < prob
    if not hits.any():
        return params
    for g in np.flatnonzero(hits):
        lo, hi = gene_bounds(int(g))
        if is_integer_gene(int(g)):
            genome[g] = int(rng.integers(lo, hi + 1))
        else:
            genome[g] = min(max(genome[g] + float(rng.normal(0.0, sigma)), 0.0), 1.0)
    return ParameterSet.from_genome(genome)


def elite_indices(population: Sequence[EvaluatedIndividual], count: int) -> list[int]:
    order = sorted(range(len(population)), key=lambda i: (-population[i].fitness, i))
    return order[:count]


def selection_weights(population: Sequence[EvaluatedIndividual]) -> list[float]:
    """Fitness values shifted to be non-negative (only the inverse mode goes negative)."""
    values = [ind.fitness for ind in population]
    low = min(values)
    return [v - low for v in values] if low < 0 else values


def step_generation(
    population: Sequence[EvaluatedIndividual],
    ga_config: GAConfig,
    rng: np.random.Generator,
    generation: int = 0,
) -> tuple[list[EvaluatedIndividual], list[ParameterSet], GenerationStats]:
    """Breed the next generation.

    Returns the elites (kept with their stored fitness), the offspring genomes
    still to be evaluated, and statistics of ``population``.
    """
    stats = GenerationStats.of(generation, population)
    elites = [population[i] for i in elite_indices(population, ga_config.elite_count)]
    n_offspring = len(population) - len(elites)
    offspring: list[ParameterSet] = []
    if n_offspring:
        n_parents = n_offspring + (n_offspring % 2)
        picks = sus_indices(selection_weights(population), n_parents, rng)
        picks = [picks[int(j)] for j in rng.permutation(len(picks))]
        for k in range(0, n_parents, 2):
            a, b = population[picks[k]].params, population[picks[k + 1]].params
            c1, c2 = uniform_crossover(a, b, rng, ga_config.crossover_prob, ga_config.crossover_mode)
            offspring.append(mutate(c1, rng, ga_config.mutation_prob, ga_config.mutation_sigma))
            offspring.append(mutate(c2, rng, ga_config.mutation_prob, ga_config.mutation_sigma))
        offspring = offspring[:n_offspring]
    return elites, offspring, stats


# -- checkpoints -------------------------------------------------------------

_CHECKPOINT = re.compile(r"gen_(\d{3,})\.json$")


def write_checkpoint(
    directory: Path, generation: int, seed: int, population: Sequence[EvaluatedIndividual], stats: GenerationStats
) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"gen_{generation:03d}.json"
    payload = {
        "schema_version": GENOME_SCHEMA_VERSION,
        "generation": generation,
        "root_seed": seed,
        "stats": stats.to_dict(),
        "population": [ind.to_dict() for ind in population],
    }
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload))
    tmp.replace(path)
    return path


def read_checkpoint(path: Path) -> tuple[int, int, list[EvaluatedIndividual], GenerationStats]:
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != GENOME_SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint schema {data.get('schema_version')!r}")
    population = [EvaluatedIndividual.from_dict(d) for d in data["population"]]
    return int(data["generation"]), int(data["root_seed"]), population, GenerationStats.from_dict(data["stats"])


def list_checkpoints(directory: Path) -> list[Path]:
    if not directory.is_dir():
        return []
    found = [p for p in directory.iterdir() if _CHECKPOINT.search(p.name)]
    return sorted(found, key=lambda p: int(_CHECKPOINT.search(p.name).group(1)))


# -- driver ------------------------------------------------------------------


def run_evolution(
    ctx: EvalContext,
    seed: int | None = None,
    executor: Executor | None = None,
    checkpoint_dir: Path | None = None,
    resume: bool = False,
    on_generation: Callable[[GenerationStats], None] | None = None,
) -> EvolutionRun:
    """Evolve ``ga.generations`` generations (0 .. generations-1)."""
    ga = ctx.ga
    root = ga.root_seed if seed is None else seed
    run = EvolutionRun(seed=root)
    population: list[EvaluatedIndividual] = []
    start = 0

    if resume and checkpoint_dir is not None:
        for path in list_checkpoints(Path(checkpoint_dir)):
            generation, stored_seed, pop, stats = read_checkpoint(path)
            if stored_seed != root:
                raise ValueError(f"{path}: checkpoint seed {stored_seed} != run seed {root}")
            run.stats.append(stats)
            run.populations.append(pop)
            population, start = pop, generation + 1
        if start:
            logger.info("resuming from generation %d", start)

    for generation in range(start, ga.generations):
        if generation == 0:
            init = make_rng(root, "init")
            params = [random_parameter_set(init) for _ in range(ga.population_size)]
            seeds = [_individual_seed(root, 0, i) for i in range(ga.population_size)]
            population = evaluate_population(params, ctx, seeds, executor)
        else:
            rng = make_rng(root, "step", generation)
            elites, offspring, _ = step_generation(population, ga, rng, generation - 1)
            seeds = [_individual_seed(root, generation, len(elites) + i) for i in range(len(offspring))]
            population = list(elites) + evaluate_population(offspring, ctx, seeds, executor)
        stats = GenerationStats.of(generation, population)
        run.stats.append(stats)
        run.populations.append(population)
        if checkpoint_dir is not None:
            write_checkpoint(Path(checkpoint_dir), generation, root, population, stats)
        if on_generation is not None:
            on_generation(stats)
        logger.debug("gen %d mean %.4f best %.4f", generation, stats.mean, stats.best)
    return run


def _individual_seed(root: int, generation: int, index: int) -> int:
    return int_seed(root, "eval", generation, index)
