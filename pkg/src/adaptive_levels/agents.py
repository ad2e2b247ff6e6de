"""Scripted players, the rule-based hyper-agent and player-to-agent matching.

Strategies:

* ``naive``: aims a low arc at a random living pig and never uses abilities.
* ``tnt-hunter``: shoots TNT while any is left, then clear shots at pigs.
* ``shot-simulator``: tries ``CANDIDATES`` shots in an internal copy of the
  level and fires the one with the best predicted score gain.
* ``structure-breaker``: knocks out the weakest supporting block of the
  structure holding the most pigs.
* ``hyper``: picks one of the skilled strategies per level from its features.

Skilled agents tap their bird's ability just before the first impact. Every
shot gets Gaussian angle noise on top of the intended angle.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from adaptive_levels.difficulty import PlayRecord, d_solve
from adaptive_levels.level import Level
from adaptive_levels.seeding import SeedLike, make_rng
from adaptive_levels.sim import (
    BLOCK,
    DEFAULT_RULES,
    LAUNCH_SPEED,
    PIG,
    TNT,
    ScoreRules,
    Shot,
    SimState,
    aim_angles,
    flight_time,
    max_score,
)

STRATEGIES = ("naive", "tnt-hunter", "shot-simulator", "structure-breaker", "hyper")
SKILLED_STRATEGIES = ("tnt-hunter", "shot-simulator", "structure-breaker")
DEFAULT_AIM_NOISE = {"naive": 0.05}
SKILLED_AIM_NOISE = 0.02
CANDIDATES = 7
STONE_MAJORITY = 0.6

MIN_ANGLE = 0.01
MAX_ANGLE = math.pi / 2 - 0.01
FALLBACK_ANGLE = math.pi / 4
# seconds before the first impact at which skilled agents trigger abilities
TAP_LEAD = {"yellow": 0.12, "blue": 0.15, "white": 0.05}


@dataclass(frozen=True)
class AgentProfile:
    id: str
    strategy: str
    rng_seed: int | None = None
    aim_noise: float | None = None
    members: tuple["AgentProfile", ...] = ()

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.rng_seed is None:
            object.__setattr__(self, "rng_seed", zlib.crc32(self.id.encode("utf-8")))
        if self.aim_noise is not None and self.aim_noise < 0:
            raise ValueError("aim_noise must be non-negative")
        if self.strategy == "hyper" and not self.members:
            object.__setattr__(self, "members", skilled_roster())

    @property
    def noise(self) -> float:
        if self.aim_noise is not None:
            return self.aim_noise
        return DEFAULT_AIM_NOISE.get(self.strategy, SKILLED_AIM_NOISE)

    def to_dict(self) -> dict:
        data = {"id": self.id, "strategy": self.strategy, "rng_seed": self.rng_seed}
        if self.aim_noise is not None:
            data["aim_noise"] = self.aim_noise
        if self.strategy == "hyper":
            data["members"] = [m.id for m in self.members]
        return data


def skilled_roster() -> tuple[AgentProfile, ...]:
    return tuple(AgentProfile(s, s) for s in SKILLED_STRATEGIES)


def default_roster() -> tuple[AgentProfile, ...]:
    return (AgentProfile("naive", "naive"),) + skilled_roster()


def check_roster(roster: Sequence[AgentProfile]) -> None:
    ids = [a.id for a in roster]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ValueError(f"duplicate agent ids in roster: {dupes}")


# -- targeting helpers -------------------------------------------------------


def _velocity(angle: float) -> tuple[float, float]:
    return LAUNCH_SPEED * math.cos(angle), LAUNCH_SPEED * math.sin(angle)


def _first_hit(state: SimState, angle: float) -> tuple[float, int | None]:
    x0, y0 = state.geo.slingshot
    vx, vy = _velocity(angle)
    return state.first_hit(x0, y0, vx, vy)


def _angles_to(state: SimState, i: int) -> tuple[float, ...]:
    return aim_angles(state.geo.slingshot, state.centre(i))


def _clamp(angle: float) -> float:
    return min(max(angle, MIN_ANGLE), MAX_ANGLE)


def ability_tap(state: SimState, angle: float) -> float:
    """Tap time a skilled agent uses: just before the first impact."""
    bird = state.next_bird
    lead = TAP_LEAD.get(bird)
    if lead is None:
        return 1.0
    t_hit, idx = _first_hit(state, angle)
    if idx is None:
        return 1.0
    t_flight = flight_time(angle, LAUNCH_SPEED, state.geo.slingshot[1])
    return min(max(t_hit - lead, 0.0) / t_flight, 1.0)


def _obstacle_cost(state: SimState, angle: float, target: int) -> float:
    """How hard it is to reach ``target`` along ``angle`` (0 = clear line)."""
    _, first = _first_hit(state, angle)
    if first == target:
        return 0.0
    if first is None:
        return math.inf
    kind = state.geo.kinds[first]
    if kind == TNT:
        return 0.5
    if kind == PIG:
        return 0.25
    if kind == BLOCK:
        return 1.0 + state.hp[first]
    return math.inf


def _best_shot_at(state: SimState, targets: Sequence[int], rng: np.random.Generator) -> float:
    """Arc at one of ``targets`` with the weakest first obstacle; random among ties."""
    best_cost = math.inf
    options: list[float] = []
    for i in targets:
        for angle in _angles_to(state, i):
            cost = _obstacle_cost(state, angle, i)
            if cost < best_cost:
                best_cost, options = cost, [angle]
            elif cost == best_cost and cost < math.inf:
                options.append(angle)
    if not options:
        return _naive_angle(state, rng)
    return options[int(rng.integers(len(options)))]


def _aim_at(state: SimState, i: int) -> float:
    """Angle at object ``i``: an unobstructed arc when one exists, else the low arc."""
    angles = _angles_to(state, i)
    for angle in angles:
        if _first_hit(state, angle)[1] == i:
            return angle
    return angles[0] if angles else FALLBACK_ANGLE


def _pig_shot(state: SimState, rng: np.random.Generator) -> float:
    return _best_shot_at(state, state.living(PIG), rng)


def _naive_angle(state: SimState, rng: np.random.Generator) -> float:
    pigs = state.living(PIG)
    pig = pigs[int(rng.integers(len(pigs)))]
    angles = _angles_to(state, pig)
    return angles[0] if angles else FALLBACK_ANGLE


def _tnt_angle(state: SimState, rng: np.random.Generator) -> float:
    tnt = state.living(TNT)
    if tnt:
        pigs = state.living(PIG)

        def pigs_near(i):
            cx, cy = state.centre(i)
            return sum(1 for p in pigs if math.dist((cx, cy), state.centre(p)) <= 8.0)

        best = max(tnt, key=lambda i: (pigs_near(i), -i))
        if pigs_near(best):
            return _aim_at(state, best)
    return _pig_shot(state, rng)


def pig_structure(state: SimState, pig: int) -> int | None:
    """Structure a pig sits on or inside (None for pigs on open ground/platform)."""
    geo = state.geo
    cx = 0.5 * (geo.x1[pig] + geo.x2[pig])
    bottom = state.y1[pig]
    for j in state.supporters(pig):
        if geo.kinds[j] == BLOCK:
            return geo.structure[j]
    if bottom <= 0.0:
        return None
    for j in geo.block_indices:
        if state.alive[j] and geo.x1[j] <= cx <= geo.x2[j] and state.y2[j] <= bottom:
            return geo.structure[j]
    return None


def _holds_pig(state: SimState, j: int) -> bool:
    """True when a living pig rests on block ``j`` directly or through the stack above it."""
    seen = {j}
    frontier = [j]
    while frontier:
        for k in state.resting_on(frontier.pop()):
            if k in seen:
                continue
            if state.geo.kinds[k] == PIG:
                return True
            seen.add(k)
            frontier.append(k)
    return False


def weakest_support(state: SimState, structure: int) -> int | None:
    """Lowest-HP block of ``structure`` that holds something up; pig-bearing ones first."""
    geo = state.geo
    candidates = [
        j
        for j in geo.block_indices
        if state.alive[j] and geo.structure[j] == structure and state.resting_on(j)
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda j: (not _holds_pig(state, j), state.hp[j], state.y1[j], j))


def _breaker_angle(state: SimState, rng: np.random.Generator) -> float:
    counts: dict[int, int] = {}
    for p in state.living(PIG):
        s = pig_structure(state, p)
        if s is not None:
            counts[s] = counts.get(s, 0) + 1
    if counts:
        target_structure = min(counts, key=lambda s: (-counts[s], s))
        block = weakest_support(state, target_structure)
        # knocking out a block only pays off when pigs come down with it
        if block is not None and _holds_pig(state, block):
            return _aim_at(state, block)
    return _pig_shot(state, rng)


def shot_candidates(state: SimState, rng: np.random.Generator, k: int = CANDIDATES) -> list[Shot]:
    """The k shots a shot-simulator agent considers in the current state."""
    pool: list[float] = []
    for i in state.living(PIG) + state.living(TNT):
        for angle in _angles_to(state, i):
            if all(abs(angle - a) > 1e-6 for a in pool):
                pool.append(angle)
    if len(pool) > k:
        keep = np.sort(rng.choice(len(pool), size=k, replace=False))
        pool = [pool[int(j)] for j in keep]
    pad = k - len(pool)
    for j in range(pad):
        pool.append(0.15 + (1.35 - 0.15) * (j + 0.5) / pad)
    return [Shot(_clamp(a), ability_tap(state, _clamp(a))) for a in pool]


def predicted_gain(state: SimState, shot: Shot) -> int:
    trial = state.copy()
    before = trial.score
    trial.apply(shot)
    return trial.score - before


def rank_candidates(state: SimState, rng: np.random.Generator, k: int = CANDIDATES):
    """Candidates, their predicted score gains and the index of the chosen one."""
    candidates = shot_candidates(state, rng, k)
    gains = [predicted_gain(state, s) for s in candidates]
    best = max(range(len(gains)), key=lambda j: (gains[j], -j))
    return candidates, gains, best


# -- public operations -------------------------------------------------------


def hyper_select(level: Level, roster: Sequence[AgentProfile]) -> AgentProfile:
    """Rule-based choice of a skilled agent from level features.

    TNT present -> tnt-hunter; else at least 60% stone blocks ->
    structure-breaker; else shot-simulator. Rules whose strategy is missing
    from the roster are skipped; the first roster member is the last resort.
    """
    if not roster:
        raise ValueError("hyper_select needs a non-empty roster")
    blocks = level.blocks
    stone = sum(1 for b in blocks if b.material == "stone")
    wanted = []
    if level.tnt:
        wanted.append("tnt-hunter")
    if blocks and stone / len(blocks) >= STONE_MAJORITY:
        wanted.append("structure-breaker")
    wanted.append("shot-simulator")
    by_strategy = {}
    for agent in roster:
        by_strategy.setdefault(agent.strategy, agent)
    for strategy in wanted:
        if strategy in by_strategy:
            return by_strategy[strategy]
    return roster[0]


def plan_shot(agent: AgentProfile, state: SimState, rng: np.random.Generator) -> Shot:
    """The shot the agent intends to fire, before aim noise."""
    strategy = agent.strategy
    if strategy == "hyper":
        strategy = hyper_select(state.level, agent.members).strategy
    if strategy == "naive":
        return Shot(_clamp(_naive_angle(state, rng)), 1.0)
    if strategy == "shot-simulator":
        candidates, _, best = rank_candidates(state, rng)
        return candidates[best]
    if strategy == "tnt-hunter":
        angle = _clamp(_tnt_angle(state, rng))
    else:
        angle = _clamp(_breaker_angle(state, rng))
    return Shot(angle, ability_tap(state, angle))


def propose_shot(
    agent: AgentProfile, level: Level, state: SimState, rng: np.random.Generator
) -> Shot:
    if state.level is not level:
        raise ValueError("state does not belong to this level")
    if state.pigs_alive < 1 or state.birds_left < 1:
        raise ValueError("nothing left to shoot at or with")
    intended = plan_shot(agent, state, rng)
    noisy = _clamp(intended.angle + rng.normal(0.0, agent.noise)) if agent.noise else intended.angle
    return Shot(noisy, intended.tap_time)


def play_level(
    agent: AgentProfile,
    level: Level,
    attempts: int,
    seed: SeedLike,
    rules: ScoreRules = DEFAULT_RULES,
    trace: Callable[[dict], None] | None = None,
) -> PlayRecord:
    """Play ``attempts`` independent attempts; unsolved attempts score 0."""
    if attempts < 1:
        raise ValueError("attempts must be at least 1")
    scores: list[int] = []
    mask: list[bool] = []
    for attempt in range(attempts):
        rng = make_rng(seed, agent.rng_seed, attempt)
        state = SimState(level, rules)
        while not state.finished:
            shot = propose_shot(agent, level, state, rng)
            report = state.apply(shot)
            if trace is not None:
                trace({"agent": agent.id, "attempt": attempt, **report.to_dict(state.geo)})
        mask.append(state.solved)
        scores.append(state.score if state.solved else 0)
    return PlayRecord(
        agent_id=agent.id,
        level_id=level.level_id,
        attempts=attempts,
        solves=sum(mask),
        scores=tuple(scores),
        max_score=max_score(level, rules),
        solved_mask=tuple(mask),
    )


@dataclass(frozen=True)
class CalibrationReport:
    level_ids: tuple[str, ...]
    player_d_solve: tuple[float, ...]
    agent_d_solve: dict[str, tuple[float, ...]]
    rmse: dict[str, float]
    chosen: str

    def to_dict(self) -> dict:
        return {
            "level_ids": list(self.level_ids),
            "player_d_solve": list(self.player_d_solve),
            "agent_d_solve": {k: list(v) for k, v in self.agent_d_solve.items()},
            "rmse": dict(self.rmse),
            "chosen": self.chosen,
        }


def match_player(
    player_records: Sequence[PlayRecord],
    agent_records: Mapping[str, Sequence[PlayRecord]],
) -> CalibrationReport:
    """Pick the agent whose per-level solve difficulty is closest (RMSE) to the player's.

    Ties go to the agent listed first.
    """
    if not player_records:
        raise ValueError("need at least one calibration level")
    if not agent_records:
        raise ValueError("need at least one agent")
    level_ids = tuple(r.level_id for r in player_records)
    player = tuple(d_solve(r) for r in player_records)
    agent_d: dict[str, tuple[float, ...]] = {}
    rmse: dict[str, float] = {}
    for agent_id, records in agent_records.items():
        by_level = {r.level_id: r for r in records}
        if len(records) != len(level_ids) or set(by_level) != set(level_ids):
            raise ValueError(f"agent {agent_id!r} was calibrated on a different level set")
        values = tuple(d_solve(by_level[lid]) for lid in level_ids)
        agent_d[agent_id] = values
        rmse[agent_id] = math.sqrt(sum((p - a) ** 2 for p, a in zip(player, values)) / len(player))
    chosen = min(rmse, key=lambda a: rmse[a])
    return CalibrationReport(level_ids, player, agent_d, rmse, chosen)
