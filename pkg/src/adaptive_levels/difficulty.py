"""Difficulty measures and the two fitness functions built on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

FITNESS_MODES = ("percentage", "relative", "relative-inverse")
SCORE_AVERAGES = ("all", "solved")


@dataclass(frozen=True)
class PlayRecord:
    """One agent's aggregate results on one level.

    ``scores`` holds one entry per attempt; unsolved attempts score 0.
    ``solved_mask`` marks which attempts solved the level.
    """

    agent_id: str
    level_id: str
    attempts: int
    solves: int
    scores: tuple[int, ...]
    max_score: int
    solved_mask: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        scores = tuple(int(s) for s in self.scores)
        object.__setattr__(self, "scores", scores)
        if not self.solved_mask:
            object.__setattr__(self, "solved_mask", tuple(s > 0 for s in scores))
        if not 0 <= self.solves <= self.attempts:
            raise ValueError(f"solves={self.solves} outside [0, attempts={self.attempts}]")
        if len(scores) != self.attempts or len(self.solved_mask) != self.attempts:
            raise ValueError(f"expected {self.attempts} scores, got {len(scores)}")
        if any(s < 0 or s > self.max_score for s in scores):
            raise ValueError(f"scores must lie in [0, max_score={self.max_score}]")

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "level_id": self.level_id,
            "attempts": self.attempts,
            "solves": self.solves,
            "scores": list(self.scores),
            "max_score": self.max_score,
            "solved_mask": list(self.solved_mask),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlayRecord":
        return cls(
            agent_id=data["agent_id"],
            level_id=data["level_id"],
            attempts=data["attempts"],
            solves=data["solves"],
            scores=tuple(data["scores"]),
            max_score=data["max_score"],
            solved_mask=tuple(data.get("solved_mask", ())),
        )


@dataclass(frozen=True)
class FitnessConfig:
    """Which fitness function to evolve against.

    ``roster`` is the set of agent ids the relative modes compare against;
    the focal agent is always treated as a member.
    """

    mode: str
    focal_agent_id: str
    roster: tuple[str, ...] = ()
    d_target: float | None = None
    score_average: str = "all"

    def __post_init__(self):
        if self.mode not in FITNESS_MODES:
            raise ValueError(f"unknown fitness mode {self.mode!r}; expected one of {FITNESS_MODES}")
        if self.score_average not in SCORE_AVERAGES:
            raise ValueError(f"score_average must be one of {SCORE_AVERAGES}")
        if self.mode == "percentage":
            if self.d_target is None or not 0.0 <= self.d_target <= 1.0:
                raise ValueError("percentage mode needs d_target in [0, 1]")
        elif self.d_target is not None:
            raise ValueError(f"d_target is only used in percentage mode, not {self.mode!r}")
        roster = tuple(self.roster)
        if self.focal_agent_id not in roster:
            roster = (self.focal_agent_id,) + roster
        object.__setattr__(self, "roster", roster)

    @property
    def agents_needed(self) -> tuple[str, ...]:
        if self.mode == "percentage":
            return (self.focal_agent_id,)
        return self.roster

    @property
    def failure_fitness(self) -> float:
        """Fitness assigned to a genome whose level could not be generated."""
        return -1.0 if self.mode == "relative-inverse" else 0.0


def d_solve(record: PlayRecord) -> float:
    if record.attempts < 1:
        raise ValueError("d_solve needs at least one attempt")
    return 1.0 - record.solves / record.attempts


def average_score(record: PlayRecord, score_average: str = "all") -> float:
    if score_average == "all":
        return sum(record.scores) / record.attempts
    if score_average == "solved":
        solved = [s for s, ok in zip(record.scores, record.solved_mask) if ok]
        return sum(solved) / len(solved) if solved else 0.0
    raise ValueError(f"unknown score_average {score_average!r}")


def d_score(record: PlayRecord, score_average: str = "all") -> float:
    if record.attempts < 1:
        raise ValueError("d_score needs at least one attempt")
    if record.max_score <= 0:
        raise ValueError(f"degenerate level {record.level_id!r}: max_score must be positive")
    return 1.0 - average_score(record, score_average) / record.max_score


def fitness_p(record: PlayRecord, d_target: float) -> float:
    """Closeness of the observed solve difficulty to the target."""
    if not 0.0 <= d_target <= 1.0:
        raise ValueError(f"d_target must lie in [0, 1], got {d_target}")
    return 1.0 - abs(d_solve(record) - d_target)


def fitness_m(
    records: Mapping[str, PlayRecord] | Sequence[PlayRecord],
    focal: str,
    roster: Sequence[str] | None = None,
    inverse: bool = False,
    score_average: str = "all",
) -> float:
    """Focal agent's score difficulty minus the easiest difficulty any agent saw.

    The minimum always ranges over the focal agent as well, so the value is
    non-negative (non-positive with ``inverse``).
    """
    if not isinstance(records, Mapping):
        records = {r.agent_id: r for r in records}
    if focal not in records:
        raise KeyError(f"no record for focal agent {focal!r}")
    ids = list(records) if roster is None else list(roster)
    if focal not in ids:
        ids.append(focal)
    missing = [a for a in ids if a not in records]
    if missing:
        raise KeyError(f"missing roster records: {missing}")
    level_ids = {records[a].level_id for a in ids}
    if len(level_ids) > 1:
        raise ValueError(f"records span several levels: {sorted(level_ids)}")
    scores = {a: d_score(records[a], score_average) for a in ids}
    value = scores[focal] - min(scores.values())
    return -value if inverse else value


def level_fitness(records: Mapping[str, PlayRecord], config: FitnessConfig) -> float:
    """Fitness of one level under ``config`` from the agents' records."""
    if config.mode == "percentage":
        return fitness_p(records[config.focal_agent_id], config.d_target)
    return fitness_m(
        records,
        config.focal_agent_id,
        roster=config.roster,
        inverse=config.mode == "relative-inverse",
        score_average=config.score_average,
    )
