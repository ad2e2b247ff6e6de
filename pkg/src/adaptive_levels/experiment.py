"""Experiment orchestration: repeated evolution runs, calibration and benchmark assembly.

An experiment directory produced by :func:`run_experiment` looks like::

    experiment.json          resolved config plus the repeat seeds
    run_00.csv ...           per-repeat curves
    aggregate.csv            mean and spread of the per-repeat means
    individuals_00.jsonl     every evaluated individual (for benchmark assembly)
    fitness.png              averaged fitness curve
    trace_00.jsonl           per-shot playthrough trace (only with ``trace``)
    checkpoints/run_00/      per-generation checkpoints (only with ``checkpoint``)
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from adaptive_levels.agents import AgentProfile, CalibrationReport, check_roster, match_player, play_level
from adaptive_levels.difficulty import FitnessConfig
from adaptive_levels.evolution import EvalContext, EvolutionRun, GAConfig, GenerationStats, run_evolution
from adaptive_levels.level import (
    Level,
    ParameterSet,
    PlacementError,
    generate_level,
    random_parameter_set,
)
from adaptive_levels.seeding import int_seed, make_rng
from adaptive_levels.sim import DEFAULT_RULES, ScoreRules

logger = logging.getLogger(__name__)

RUN_COLUMNS = ("generation", "mean_fitness", "std_fitness", "best_fitness")
AGGREGATE_COLUMNS = ("generation", "mean_of_means", "std_of_means")
CALIBRATION_RETRIES = 100


class ExperimentError(RuntimeError):
    """A run, calibration or benchmark step could not complete."""


def _fmt(value: float) -> str:
    # repr round-trips exactly and is stable across platforms
    return repr(float(value))


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    fitness: FitnessConfig
    roster: tuple[AgentProfile, ...]
    ga: GAConfig = field(default_factory=GAConfig)
    repeats: int = 10
    calibration_levels: int = 20
    calibration_player: str = "naive"
    output_dir: str = "results"
    workers: int = 1
    checkpoint: bool = False
    rules: ScoreRules = DEFAULT_RULES

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.calibration_levels < 1:
            raise ValueError("calibration_levels must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        check_roster(self.roster)
        ids = {a.id for a in self.roster}
        missing = [a for a in self.fitness.roster if a not in ids]
        if missing:
            raise ValueError(f"fitness roster names agents missing from the roster: {missing}")

    @property
    def agents(self) -> dict[str, AgentProfile]:
        return {a.id: a for a in self.roster}

    def context(self, seed: int | None = None) -> EvalContext:
        ga = self.ga if seed is None else replace(self.ga, root_seed=seed)
        return EvalContext(self.fitness, ga, self.agents, self.rules)

    def to_dict(self) -> dict:
        return {
            "fitness": {
                "mode": self.fitness.mode,
                "focal_agent": self.fitness.focal_agent_id,
                "d_target": self.fitness.d_target,
                "roster": list(self.fitness.roster),
                "score_average": self.fitness.score_average,
            },
            "roster": [
                {"id": a.id, "strategy": a.strategy, "rng_seed": a.rng_seed, "aim_noise": a.aim_noise}
                for a in self.roster
            ],
            "ga": asdict(self.ga),
            "repeats": self.repeats,
            "calibration": {"levels": self.calibration_levels, "player": self.calibration_player},
            "output_dir": self.output_dir,
            "workers": self.workers,
            "checkpoint": self.checkpoint,
            "score_rules": {**asdict(self.rules), "points_per_block_by_material": list(self.rules.points_per_block_by_material)},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        data = dict(data or {})
        known = {"fitness", "roster", "ga", "repeats", "calibration", "output_dir", "workers", "checkpoint", "score_rules", "seed"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")

        roster = tuple(_agent_from(entry) for entry in data.get("roster") or _default_roster_entries())
        fit = dict(data.get("fitness") or {})
        mode = fit.pop("mode", "percentage")
        focal = fit.pop("focal_agent", "naive")
        d_target = fit.pop("d_target", 0.5 if mode == "percentage" else None)
        fit_roster = fit.pop("roster", None)
        if fit_roster is None:
            fit_roster = [a.id for a in roster] if mode != "percentage" else []
        score_average = fit.pop("score_average", "all")
        if fit:
            raise ValueError(f"unknown fitness keys: {sorted(fit)}")
        fitness = FitnessConfig(mode, focal, tuple(fit_roster), d_target, score_average)

        ga = _build(GAConfig, data.get("ga") or {}, "ga")
        if "seed" in data:
            ga = replace(ga, root_seed=int(data["seed"]))
        calibration = dict(data.get("calibration") or {})
        cal_levels = int(calibration.pop("levels", 20))
        cal_player = str(calibration.pop("player", focal))
        if calibration:
            raise ValueError(f"unknown calibration keys: {sorted(calibration)}")
        rules_data = dict(data.get("score_rules") or {})
        if "points_per_block_by_material" in rules_data:
            rules_data["points_per_block_by_material"] = tuple(rules_data["points_per_block_by_material"])
        rules = _build(ScoreRules, rules_data, "score_rules") if rules_data else DEFAULT_RULES
        return cls(
            fitness=fitness,
            roster=roster,
            ga=ga,
            repeats=int(data.get("repeats", 10)),
            calibration_levels=cal_levels,
            calibration_player=cal_player,
            output_dir=str(data.get("output_dir", "results")),
            workers=int(data.get("workers", 1)),
            checkpoint=bool(data.get("checkpoint", False)),
            rules=rules,
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ExperimentError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            return cls.from_dict(yaml.safe_load(text))
        except (ValueError, TypeError, yaml.YAMLError) as exc:
            raise ExperimentError(f"invalid config {path}: {exc}") from exc


def _default_roster_entries() -> list[dict]:
    return [
        {"id": "naive", "strategy": "naive"},
        {"id": "tnt-hunter", "strategy": "tnt-hunter"},
        {"id": "shot-simulator", "strategy": "shot-simulator"},
        {"id": "structure-breaker", "strategy": "structure-breaker"},
    ]


def _agent_from(entry: Any) -> AgentProfile:
    if isinstance(entry, str):
        return AgentProfile(entry, entry)
    entry = dict(entry)
    allowed = {"id", "strategy", "rng_seed", "aim_noise"}
    if set(entry) - allowed:
        raise ValueError(f"unknown agent keys: {sorted(set(entry) - allowed)}")
    return AgentProfile(
        id=str(entry["id"]),
        strategy=str(entry.get("strategy", entry["id"])),
        rng_seed=entry.get("rng_seed"),
        aim_noise=entry.get("aim_noise"),
    )


def _build(cls, values: Mapping[str, Any], section: str):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ValueError(f"unknown {section} keys: {unknown}")
    return cls(**values)


# -- results -----------------------------------------------------------------


@dataclass
class ResultsTable:
    """Per-repeat curves and their across-repeat aggregate."""

    runs: list[list[GenerationStats]]
    seeds: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.runs:
            raise ValueError("no runs")
        lengths = {len(r) for r in self.runs}
        if len(lengths) != 1:
            raise ValueError(f"runs have different lengths: {sorted(lengths)}")

    @property
    def generations(self) -> int:
        return len(self.runs[0])

    def means(self) -> np.ndarray:
        """Array of shape (repeats, generations) with each run's mean fitness."""
        return np.array([[s.mean for s in run] for run in self.runs], dtype=float)

    def aggregate(self) -> list[tuple[int, float, float]]:
        m = self.means()
        return [(g, float(m[:, g].mean()), float(m[:, g].std())) for g in range(self.generations)]

    def mean_curve(self) -> np.ndarray:
        return self.means().mean(axis=0)

    def run_csv(self, index: int) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RUN_COLUMNS)
        for s in self.runs[index]:
            writer.writerow([s.generation, _fmt(s.mean), _fmt(s.std), _fmt(s.best)])
        return buf.getvalue()

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(AGGREGATE_COLUMNS)
        for g, mean, std in self.aggregate():
            writer.writerow([g, _fmt(mean), _fmt(std)])
        return buf.getvalue()

    def write(self, out: Path) -> None:
        for i in range(len(self.runs)):
            _write_text(out / f"run_{i:02d}.csv", self.run_csv(i))
        _write_text(out / "aggregate.csv", self.aggregate_csv())

    @classmethod
    def read(cls, out: str | os.PathLike) -> "ResultsTable":
        out = Path(out)
        runs = []
        for path in sorted(out.glob("run_*.csv")):
            with path.open(newline="") as fh:
                rows = list(csv.DictReader(fh))
            runs.append(
                [
                    GenerationStats(
                        int(r["generation"]),
                        float(r["mean_fitness"]),
                        float(r["std_fitness"]),
                        float(r["best_fitness"]),
                        None,  # type: ignore[arg-type]
                    )
                    for r in rows
                ]
            )
        if not runs:
            raise ExperimentError(f"no run_*.csv files in {out}")
        return cls(runs)


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ExperimentError(f"cannot write {path}: {exc.strerror or exc}") from exc


# -- running -----------------------------------------------------------------


def repeat_seeds(root_seed: int, repeats: int) -> list[int]:
    return [int_seed(root_seed, "repeat", r) for r in range(repeats)]


@dataclass(frozen=True)
class _RepeatJob:
    index: int
    seed: int
    config: ExperimentConfig
    out: str | None
    trace: bool


@dataclass(frozen=True)
class _RepeatResult:
    index: int
    stats: list[GenerationStats]
    initial_tnt: float
    final_tnt: float


def _run_repeat(job: _RepeatJob) -> _RepeatResult:
    cfg = job.config
    ctx = cfg.context(job.seed)
    out = Path(job.out) if job.out is not None else None
    checkpoint_dir = out / "checkpoints" / f"run_{job.index:02d}" if out is not None and cfg.checkpoint else None
    run = run_evolution(ctx, checkpoint_dir=checkpoint_dir, resume=checkpoint_dir is not None)
    if out is not None:
        _write_text(out / f"individuals_{job.index:02d}.jsonl", _individuals_jsonl(run))
        if job.trace:
            _write_text(out / f"trace_{job.index:02d}.jsonl", _trace_jsonl(run, ctx))
    return _RepeatResult(
        job.index,
        run.stats,
        float(np.mean([ind.params.max_tnt for ind in run.populations[0]])),
        float(np.mean([ind.params.max_tnt for ind in run.final_population])),
    )


def _individuals_jsonl(run: EvolutionRun) -> str:
    lines = []
    for generation, population in enumerate(run.populations):
        for index, ind in enumerate(population):
            lines.append(
                json.dumps(
                    {
                        "generation": generation,
                        "index": index,
                        "genome": ind.params.to_genome(),
                        "fitness": ind.fitness,
                        "levels": [
                            {"seed": r.seed, "level_id": r.level_id, "fitness": r.fitness} for r in ind.levels
                        ],
                    },
                    sort_keys=True,
                )
            )
    return "\n".join(lines) + "\n"


def _trace_jsonl(run: EvolutionRun, ctx: EvalContext) -> str:
    """Replay the final population's playthroughs shot by shot.

    Play is a pure function of (agent, level, seed), so the replay reproduces
    exactly the attempts that produced the stored records.
    """
    lines: list[str] = []
    generation = len(run.populations) - 1
    for index, ind in enumerate(run.final_population):
        for result in ind.levels:
            if result.level_id is None:
                continue
            level = generate_level(ind.params, result.seed)
            header = {"generation": generation, "individual": index, "level_id": result.level_id}
            for agent_id in ctx.fitness.agents_needed:
                play_level(
                    ctx.agents[agent_id],
                    level,
                    ctx.ga.attempts_per_level,
                    result.seed,
                    ctx.rules,
                    trace=lambda rec: lines.append(json.dumps({**header, **rec}, sort_keys=True)),
                )
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class ExperimentResult:
    table: ResultsTable
    initial_tnt: list[float]
    final_tnt: list[float]
    out: Path | None = None


def run_experiment(
    config: ExperimentConfig,
    seed: int | None = None,
    out: str | os.PathLike | None = None,
    workers: int | None = None,
    trace: bool = False,
    plot: bool = True,
) -> ExperimentResult:
    """Run ``config.repeats`` evolution runs and aggregate their curves.

    Repeat seeds derive from ``seed`` (default: the GA root seed), so results
    are the same whether repeats run serially or in a process pool. When
    ``out`` is given, CSVs, individuals, the config and a figure are written
    there; nothing is written if any repeat fails.
    """
    root = config.ga.root_seed if seed is None else int(seed)
    seeds = repeat_seeds(root, config.repeats)
    out_path = Path(out) if out is not None else None
    staging = str(out_path) if out_path is not None else None
    jobs = [_RepeatJob(i, s, config, staging, trace) for i, s in enumerate(seeds)]
    workers = config.workers if workers is None else workers
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                results = list(pool.map(_run_repeat, jobs))
        else:
            results = [_run_repeat(job) for job in jobs]
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(f"evolution run failed: {exc}") from exc
    results.sort(key=lambda r: r.index)
    table = ResultsTable([r.stats for r in results], seeds)
    result = ExperimentResult(table, [r.initial_tnt for r in results], [r.final_tnt for r in results], out_path)
    if out_path is not None:
        table.write(out_path)
        meta = {"config": config.to_dict(), "root_seed": root, "repeat_seeds": seeds}
        _write_text(out_path / "experiment.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
        if plot:
            from adaptive_levels.plotting import plot_fitness

            label = config.fitness.mode
            if config.fitness.d_target is not None:
                label += f" d_target={config.fitness.d_target:g}"
            plot_fitness(table, out_path / "fitness.png", title=f"{config.fitness.focal_agent_id}: {label}")
    return result


# -- calibration -------------------------------------------------------------


def calibration_levels(count: int, seed: int) -> list[Level]:
    """``count`` playable levels from random parameter sets; failed layouts are redrawn."""
    levels = []
    for i in range(count):
        rng = make_rng(seed, "calibration", i)
        for attempt in range(CALIBRATION_RETRIES):
            params = random_parameter_set(rng)
            try:
                levels.append(generate_level(params, int_seed(seed, "calibration-level", i, attempt)))
                break
            except PlacementError:
                continue
        else:
            raise ExperimentError(f"could not generate calibration level {i} in {CALIBRATION_RETRIES} tries")
    return levels


def calibrate(
    config: ExperimentConfig,
    seed: int | None = None,
    player: AgentProfile | str | None = None,
) -> CalibrationReport:
    """Match a player to the roster agent with the closest per-level solve difficulty.

    ``player`` is a roster id (that agent stands in for the player) or any
    profile. Each level is played with the same seed by everybody, so an agent
    posing as the player reproduces its own records exactly.
    """
    player = config.calibration_player if player is None else player
    return calibrate_players(config, [player], seed)[0]


def calibrate_players(
    config: ExperimentConfig,
    players: Sequence[AgentProfile | str],
    seed: int | None = None,
) -> list[CalibrationReport]:
    """:func:`calibrate` for several players sharing one calibration set and roster pass."""
    root = config.ga.root_seed if seed is None else int(seed)
    agents = config.agents
    profiles = []
    for p in players:
        if isinstance(p, str):
            if p not in agents:
                raise ExperimentError(f"player {p!r} is not in the roster {sorted(agents)}")
            p = agents[p]
        profiles.append(p)
    levels = calibration_levels(config.calibration_levels, root)
    attempts = config.ga.attempts_per_level
    play_seeds = [int_seed(root, "calibration-play", i) for i in range(len(levels))]

    def records(agent: AgentProfile):
        return [play_level(agent, level, attempts, s, config.rules) for level, s in zip(levels, play_seeds)]

    agent_records = {a.id: records(a) for a in config.roster}
    return [match_player(records(p), agent_records) for p in profiles]


# -- benchmark ---------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkEntry:
    focal_agent: str
    level_id: str
    fitness: float
    genome: tuple
    seed: int

    def level(self) -> Level:
        level = generate_level(ParameterSet.from_genome(list(self.genome)), self.seed)
        if level.level_id != self.level_id:
            raise ExperimentError(f"level {self.level_id} did not regenerate identically")
        return level


def _load_candidates(run_dir: Path) -> tuple[str, list[BenchmarkEntry]]:
    meta_path = run_dir / "experiment.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ExperimentError(f"cannot read {meta_path}: {exc.strerror or exc}") from exc
    fitness = meta["config"]["fitness"]
    if fitness["mode"] == "percentage":
        raise ExperimentError(f"{run_dir} is a percentage-mode run; benchmarks need relative-mode runs")
    focal = fitness["focal_agent"]
    entries = []
    for path in sorted(run_dir.glob("individuals_*.jsonl")):
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                row = json.loads(line)
                for lv in row["levels"]:
                    if lv["level_id"] is not None:
                        entries.append(BenchmarkEntry(focal, lv["level_id"], lv["fitness"], tuple(row["genome"]), lv["seed"]))
    return focal, entries


def top_levels(entries: Iterable[BenchmarkEntry], k: int) -> list[BenchmarkEntry]:
    """The ``k`` distinct levels with the highest fitness (ties by level id)."""
    best: dict[str, BenchmarkEntry] = {}
    for e in entries:
        if e.level_id not in best or e.fitness > best[e.level_id].fitness:
            best[e.level_id] = e
    ranked = sorted(best.values(), key=lambda e: (-e.fitness, e.level_id))
    if k > len(ranked):
        logger.warning("asked for %d levels but only %d are available", k, len(ranked))
    return ranked[: max(k, 0)]


def assemble_benchmark(
    run_dirs: Sequence[str | os.PathLike],
    k: int,
    out: str | os.PathLike | None = None,
) -> list[BenchmarkEntry]:
    """Union of the top-``k`` levels per focal agent, deduplicated by level id."""
    if k < 0:
        raise ValueError("k must be non-negative")
    by_agent: dict[str, list[BenchmarkEntry]] = {}
    for d in run_dirs:
        focal, entries = _load_candidates(Path(d))
        by_agent.setdefault(focal, []).extend(entries)
    chosen: dict[str, BenchmarkEntry] = {}
    for focal in sorted(by_agent):
        for e in top_levels(by_agent[focal], k):
            chosen.setdefault(e.level_id, e)
    selected = list(chosen.values())
    if out is not None:
        out = Path(out)
        manifest = []
        for e in selected:
            level = e.level()
            _write_text(out / "levels" / f"{e.level_id}.json", level.dumps() + "\n")
            manifest.append(
                {"focal_agent": e.focal_agent, "level_id": e.level_id, "fitness": e.fitness, "file": f"levels/{e.level_id}.json"}
            )
        _write_text(out / "benchmark.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        if selected:
            from adaptive_levels.plotting import plot_levels

            plot_levels([e.level() for e in selected], out / "benchmark.png", [e.focal_agent for e in selected])
    return selected
