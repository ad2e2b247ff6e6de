"""Deterministic, simplified playthrough engine.

A shot is a parabola (gravity 9.8, launch speed 30) from the slingshot. The
bird strikes objects in the order the parabola enters their rectangles.
Impact energy is ``mass * speed**2 / ENERGY_SCALE``; a block whose remaining
hit points do not exceed the energy is destroyed and half the energy carries
on, otherwise the block loses that many hit points and the bird stops. Pigs
die on any direct hit or explosion overlap. After each shot, unsupported
objects drop straight down (pigs die on falls of 3 units or more, blocks lose
1 hit point on landing) until nothing moves.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from adaptive_levels.level import GRAVITY, LAUNCH_SPEED, MATERIALS, Level

ENERGY_SCALE = 60.0
RESIDUAL_FRACTION = 0.5

MATERIAL_HP = {"ice": 1.0, "wood": 2.0, "stone": 3.0}
BIRD_MASS = {"red": 1.0, "yellow": 0.8, "blue": 0.5, "black": 1.5, "white": 0.6}
BLUE_SPLIT_MASS = 0.4
BLUE_SPLIT_OFFSETS = (-1.5, 0.0, 1.5)
YELLOW_BOOST = 1.7
ABILITY_BIRDS = frozenset({"yellow", "blue", "black", "white"})

TNT_RADIUS = 8.0
BLACK_RADIUS = 6.0
WHITE_RADIUS = 4.0
BLAST_DAMAGE = 2.0
PIG_FALL_DEATH = 3.0
LANDING_DAMAGE = 1.0
SUPPORT_FRACTION = 0.5

BLOCK, PIG, TNT, PLATFORM = 0, 1, 2, 3
KIND_NAMES = ("block", "pig", "tnt", "platform")

_EPS = 1e-9


@dataclass(frozen=True)
class Shot:
    angle: float
    tap_time: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.angle < math.pi / 2:
            raise ValueError(f"shot angle must lie in (0, pi/2), got {self.angle}")
        if not 0.0 <= self.tap_time <= 1.0:
            raise ValueError(f"tap_time must lie in [0, 1], got {self.tap_time}")

    @property
    def launch_speed(self) -> float:
        return LAUNCH_SPEED


@dataclass(frozen=True)
class ScoreRules:
    points_per_pig: int = 5000
    points_per_block_by_material: tuple[int, int, int] = (500, 300, 800)  # wood, ice, stone
    bonus_per_unused_bird: int = 10000

    def __post_init__(self):
        values = (self.points_per_pig, self.bonus_per_unused_bird, *self.points_per_block_by_material)
        if len(self.points_per_block_by_material) != len(MATERIALS):
            raise ValueError("need one block value per material")
        if any(v < 0 for v in values):
            raise ValueError("score rules must be non-negative")

    def block_points(self, material: str) -> int:
        return self.points_per_block_by_material[MATERIALS.index(material)]


DEFAULT_RULES = ScoreRules()


@dataclass(frozen=True)
class SimOutcome:
    solved: bool
    score: int
    pigs_killed: int
    blocks_destroyed: int
    birds_used: int


@dataclass(frozen=True)
class Hit:
    index: int
    kind: str
    t: float
    x: float
    y: float


class Geometry:
    """Flat per-object arrays for one level, built once and cached on it."""

    def __init__(self, level: Level):
        kinds, x1, x2, y1, y2, hp, material, structure = [], [], [], [], [], [], [], []

        def add(kind, r, h=0.0, mat=-1, s=-1):
            kinds.append(kind)
            x1.append(r.x)
            x2.append(r.x2)
            y1.append(r.y)
            y2.append(r.y2)
            hp.append(h)
            material.append(mat)
            structure.append(s)

        for si, s in enumerate(level.structures):
            for b in s.blocks:
                add(BLOCK, b.rect, MATERIAL_HP[b.material], MATERIALS.index(b.material), si)
        for p in level.pigs:
            add(PIG, p.rect)
        for t in level.tnt:
            add(TNT, t.rect)
        for si, s in enumerate(level.structures):
            if s.platform is not None:
                add(PLATFORM, s.platform, math.inf, -1, si)
        self.kinds = tuple(kinds)
        self.x1 = tuple(x1)
        self.x2 = tuple(x2)
        self.y1 = tuple(y1)
        self.y2 = tuple(y2)
        self.hp = tuple(hp)
        self.material = tuple(material)
        self.structure = tuple(structure)
        self.n = len(kinds)
        self.num_pigs = kinds.count(PIG)
        self.pig_indices = tuple(i for i, k in enumerate(kinds) if k == PIG)
        self.tnt_indices = tuple(i for i, k in enumerate(kinds) if k == TNT)
        self.block_indices = tuple(i for i, k in enumerate(kinds) if k == BLOCK)
        self.birds = level.birds
        self.slingshot = level.slingshot
        self.x_limit = level.bounds[2]


def geometry(level: Level) -> Geometry:
    geo = level._cache.get("geometry")
    if geo is None:
        geo = Geometry(level)
        level._cache["geometry"] = geo
    return geo


def max_score(level: Level, rules: ScoreRules = DEFAULT_RULES) -> int:
    """Upper bound on the score: every pig and block, plus the bonus for all birds but one."""
    blocks = sum(rules.block_points(b.material) for b in level.blocks)
    return (
        rules.points_per_pig * len(level.pigs)
        + blocks
        + rules.bonus_per_unused_bird * (len(level.birds) - 1)
    )


def flight_time(angle: float, speed: float = LAUNCH_SPEED, origin_y: float = 2.0) -> float:
    """Time for the untapped parabola to come back down to the ground."""
    vy = speed * math.sin(angle)
    return (vy + math.sqrt(vy * vy + 2.0 * GRAVITY * origin_y)) / GRAVITY


def _entry_time(x0, y0, vx, vy, t_end, rx1, rx2, ry1, ry2):
    """Earliest t in [0, t_end] at which the segment is inside the rectangle."""
    ta = (rx1 - x0) / vx
    tb = (rx2 - x0) / vx
    if tb < 0.0:
        return None
    if ta < 0.0:
        ta = 0.0
    if ta > t_end:
        return None
    if tb > t_end:
        tb = t_end
    ya = y0 + vy * ta - 0.5 * GRAVITY * ta * ta
    if ry1 <= ya <= ry2:
        return ta
    if ya > ry2:
        disc = vy * vy + 2.0 * GRAVITY * (y0 - ry2)
        if disc < 0.0:
            return None
        t = (vy + math.sqrt(disc)) / GRAVITY
    else:
        disc = vy * vy + 2.0 * GRAVITY * (y0 - ry1)
        if disc < 0.0:
            return None
        t = (vy - math.sqrt(disc)) / GRAVITY
        if t < ta:
            return None
    if ta <= t <= tb:
        return t
    return None


@dataclass
class ShotReport:
    """What one shot did; consumed by traces and by look-ahead agents."""

    shot: Shot
    bird: str
    destroyed: list[int] = field(default_factory=list)
    score_delta: int = 0
    collapse_rounds: int = 0

    def to_dict(self, geo: Geometry) -> dict:
        return {
            "angle": self.shot.angle,
            "tap_time": self.shot.tap_time,
            "bird": self.bird,
            "destroyed": [{"index": i, "kind": KIND_NAMES[geo.kinds[i]]} for i in self.destroyed],
            "score_delta": self.score_delta,
        }


class SimState:
    """Mutable destruction state of one playthrough."""

    __slots__ = (
        "level",
        "geo",
        "rules",
        "alive",
        "hp",
        "y1",
        "y2",
        "birds_used",
        "score",
        "pigs_killed",
        "blocks_destroyed",
        "_report",
    )

    def __init__(self, level: Level, rules: ScoreRules = DEFAULT_RULES):
        self.level = level
        self.geo = geometry(level)
        self.rules = rules
        self.alive = [True] * self.geo.n
        self.hp = list(self.geo.hp)
        self.y1 = list(self.geo.y1)
        self.y2 = list(self.geo.y2)
        self.birds_used = 0
        self.score = 0
        self.pigs_killed = 0
        self.blocks_destroyed = 0
        self._report: ShotReport | None = None

    def copy(self) -> "SimState":
        other = SimState.__new__(SimState)
        other.level = self.level
        other.geo = self.geo
        other.rules = self.rules
        other.alive = self.alive.copy()
        other.hp = self.hp.copy()
        other.y1 = self.y1.copy()
        other.y2 = self.y2.copy()
        other.birds_used = self.birds_used
        other.score = self.score
        other.pigs_killed = self.pigs_killed
        other.blocks_destroyed = self.blocks_destroyed
        other._report = None
        return other

    # -- queries -------------------------------------------------------------

    @property
    def pigs_alive(self) -> int:
        return self.geo.num_pigs - self.pigs_killed

    @property
    def solved(self) -> bool:
        return self.pigs_killed == self.geo.num_pigs

    @property
    def birds_left(self) -> int:
        return len(self.geo.birds) - self.birds_used

    @property
    def finished(self) -> bool:
        return self.solved or self.birds_left <= 0

    @property
    def next_bird(self) -> str | None:
        return None if self.birds_left <= 0 else self.geo.birds[self.birds_used]

    def living(self, kind: int) -> list[int]:
        idx = self.geo.pig_indices if kind == PIG else self.geo.tnt_indices if kind == TNT else None
        if idx is None:
            idx = [i for i, k in enumerate(self.geo.kinds) if k == kind]
        return [i for i in idx if self.alive[i]]

    def centre(self, i: int) -> tuple[float, float]:
        geo = self.geo
        return (0.5 * (geo.x1[i] + geo.x2[i]), 0.5 * (self.y1[i] + self.y2[i]))

    def outcome(self) -> SimOutcome:
        return SimOutcome(
            solved=self.solved,
            score=self.score,
            pigs_killed=self.pigs_killed,
            blocks_destroyed=self.blocks_destroyed,
            birds_used=self.birds_used,
        )

    def supporters(self, i: int) -> list[int]:
        geo = self.geo
        bottom = self.y1[i]
        a, b = geo.x1[i], geo.x2[i]
        alive, y2, x1, x2 = self.alive, self.y2, geo.x1, geo.x2
        return [
            j
            for j in range(geo.n)
            if alive[j] and j != i and abs(y2[j] - bottom) < _EPS and x1[j] < b and a < x2[j]
        ]

    def resting_on(self, j: int) -> list[int]:
        geo = self.geo
        top = self.y2[j]
        a, b = geo.x1[j], geo.x2[j]
        alive, y1, x1, x2, kinds = self.alive, self.y1, geo.x1, geo.x2, geo.kinds
        return [
            i
            for i in range(geo.n)
            if alive[i]
            and i != j
            and kinds[i] != PLATFORM
            and abs(y1[i] - top) < _EPS
            and x1[i] < b
            and a < x2[i]
        ]

    def support_fraction(self, i: int) -> float:
        """Share of the object's base resting on live objects directly beneath it."""
        if self.y1[i] <= _EPS:
            return 1.0
        geo = self.geo
        bottom = self.y1[i]
        a, b = geo.x1[i], geo.x2[i]
        alive, y2, x1, x2 = self.alive, self.y2, geo.x1, geo.x2
        covered = 0.0
        for j in range(geo.n):
            if alive[j] and j != i and abs(y2[j] - bottom) < _EPS and x1[j] < b and a < x2[j]:
                covered += min(b, x2[j]) - max(a, x1[j])
        return covered / (b - a)

    def is_supported(self, i: int) -> bool:
        return self.support_fraction(i) >= SUPPORT_FRACTION - _EPS

    # -- shot resolution -----------------------------------------------------

    def first_hit(self, x0, y0, vx, vy, t_limit=math.inf) -> tuple[float, int | None]:
        """First object entered by a segment, or (ground/exit time, None)."""
        hits, t_end, _, _ = self._segment_hits(x0, y0, vx, vy, t_limit)
        if hits:
            return hits[0]
        return t_end, None

    def _segment_hits(self, x0, y0, vx, vy, t_limit):
        disc = vy * vy + 2.0 * GRAVITY * y0
        t_ground = (vy + math.sqrt(disc)) / GRAVITY if disc >= 0.0 else 0.0
        t_exit = (self.geo.x_limit - x0) / vx
        t_end = min(t_ground, t_exit, t_limit)
        geo = self.geo
        alive, y1, y2, x1, x2 = self.alive, self.y1, self.y2, geo.x1, geo.x2
        hits = []
        for i in range(geo.n):
            if not alive[i] or x2[i] < x0:
                continue
            t = _entry_time(x0, y0, vx, vy, t_end, x1[i], x2[i], y1[i], y2[i])
            if t is not None:
                hits.append((t, i))
        hits.sort()
        return hits, t_end, t_ground, t_exit

    def apply(self, shot: Shot) -> ShotReport:
        """Fire the next bird; mutates the state and returns what happened."""
        if self.birds_left <= 0:
            raise ValueError("no birds left")
        bird = self.geo.birds[self.birds_used]
        report = ShotReport(shot=shot, bird=bird)
        self._report = report
        self._fly(bird, shot)
        report.collapse_rounds = self._collapse(report.destroyed)
        self.birds_used += 1
        if self.solved:
            bonus = self.rules.bonus_per_unused_bird * self.birds_left
            self.score += bonus
            report.score_delta += bonus
        self._report = None
        return report

    def _fly(self, bird: str, shot: Shot) -> None:
        x0, y0 = self.geo.slingshot
        vx = LAUNCH_SPEED * math.cos(shot.angle)
        vy = LAUNCH_SPEED * math.sin(shot.angle)
        tapped = shot.tap_time < 1.0 and bird in ABILITY_BIRDS
        t_tap = shot.tap_time * flight_time(shot.angle, LAUNCH_SPEED, y0) if tapped else math.inf
        mass = BIRD_MASS[bird]
        still_flying = self._travel(x0, y0, vx, vy, mass, t_tap, explode=BLACK_RADIUS if bird == "black" else 0.0)
        if not still_flying:
            return
        # ability fires at t_tap
        px = x0 + vx * t_tap
        py = y0 + vy * t_tap - 0.5 * GRAVITY * t_tap * t_tap
        pvy = vy - GRAVITY * t_tap
        if bird == "yellow":
            self._travel(px, py, vx * YELLOW_BOOST, pvy * YELLOW_BOOST, mass, math.inf)
        elif bird == "blue":
            for dy in BLUE_SPLIT_OFFSETS:
                self._travel(px, py + dy, vx, pvy, BLUE_SPLIT_MASS, math.inf)
        elif bird == "black":
            self._explode(px, py, BLACK_RADIUS, tnt=False)
        elif bird == "white":
            self._explode(px, self._drop_height(px, py), WHITE_RADIUS, tnt=False)

    def _drop_height(self, x: float, y: float) -> float:
        """Height at which something dropped from (x, y) lands."""
        geo = self.geo
        best = 0.0
        for i in range(geo.n):
            if self.alive[i] and geo.x1[i] <= x <= geo.x2[i] and self.y2[i] <= y + _EPS:
                best = max(best, self.y2[i])
        return best

    def _travel(self, x0, y0, vx, vy, mass, t_limit, explode=0.0) -> bool:
        """Move along one parabolic segment; True if still flying at t_limit."""
        if y0 < 0.0:
            return False
        hits, t_end, t_ground, t_exit = self._segment_hits(x0, y0, vx, vy, t_limit)
        geo = self.geo
        kinds = geo.kinds
        carry = 1.0
        for t, i in hits:
            if not self.alive[i]:
                continue
            kind = kinds[i]
            hx = x0 + vx * t
            hy = y0 + vy * t - 0.5 * GRAVITY * t * t
            if kind == PLATFORM:
                if explode:
                    self._explode(hx, hy, explode, tnt=False)
                return False
            if kind == TNT:
                self._destroy(i)
                self._explode(*self.centre(i), TNT_RADIUS, tnt=True)
                return False
            if kind == PIG:
                self._destroy(i)
                carry *= RESIDUAL_FRACTION
                if explode:
                    self._explode(hx, hy, explode, tnt=False)
                    return False
                continue
            speed2 = vx * vx + (vy - GRAVITY * t) ** 2
            energy = carry * mass * speed2 / ENERGY_SCALE
            if energy + _EPS >= self.hp[i]:
                self._destroy(i)
                carry *= RESIDUAL_FRACTION
                if explode:
                    self._explode(hx, hy, explode, tnt=False)
                    return False
                continue
            self.hp[i] -= energy
            if explode:
                self._explode(hx, hy, explode, tnt=False)
            return False
        if t_end >= t_limit:
            return True
        if explode and t_ground <= t_exit:
            self._explode(x0 + vx * t_ground, 0.0, explode, tnt=False)
        return False

    def _explode(self, cx: float, cy: float, radius: float, tnt: bool) -> None:
        geo = self.geo
        queue = [(cx, cy, radius, tnt)]
        while queue:
            cx, cy, radius, tnt = queue.pop()
            r2 = radius * radius
            for i in range(geo.n):
                if not self.alive[i]:
                    continue
                kind = geo.kinds[i]
                if kind == PLATFORM:
                    continue
                dx = max(geo.x1[i] - cx, 0.0, cx - geo.x2[i])
                dy = max(self.y1[i] - cy, 0.0, cy - self.y2[i])
                if dx * dx + dy * dy > r2:
                    continue
                if kind == BLOCK and not tnt:
                    self.hp[i] -= BLAST_DAMAGE
                    if self.hp[i] > _EPS:
                        continue
                self._destroy(i)
                if kind == TNT:
                    queue.append((*self.centre(i), TNT_RADIUS, True))

    def _destroy(self, i: int) -> None:
        self.alive[i] = False
        kind = self.geo.kinds[i]
        points = 0
        if kind == PIG:
            self.pigs_killed += 1
            points = self.rules.points_per_pig
        elif kind == BLOCK:
            self.blocks_destroyed += 1
            points = self.rules.points_per_block_by_material[self.geo.material[i]]
        self.score += points
        if self._report is not None:
            self._report.destroyed.append(i)
            self._report.score_delta += points

    def _collapse(self, destroyed: list[int]) -> int:
        """Drop unsupported objects until nothing moves; returns rounds that changed state."""
        geo = self.geo
        rounds = 0
        frontier = list(destroyed)
        fallen: dict[int, float] = {}  # distance fallen so far in this collapse
        while frontier:
            pending: list[tuple[float, int]] = []
            seen: set[int] = set()
            for j in frontier:
                for i in self.resting_on(j):
                    if i not in seen:
                        seen.add(i)
                        pending.append((self.y1[i], i))
            if not pending:
                break
            heapq.heapify(pending)
            frontier = []
            moved = False
            while pending:
                _, i = heapq.heappop(pending)
                if not self.alive[i] or self.is_supported(i):
                    continue
                land = self._drop_height_for(i)
                drop = self.y1[i] - land
                if drop <= _EPS:
                    # still touching something below; no tipping model
                    continue
                above = self.resting_on(i)
                self.y2[i] -= drop
                self.y1[i] = land
                moved = True
                for k in above:
                    if self.alive[k]:
                        heapq.heappush(pending, (self.y1[k], k))
                kind = geo.kinds[i]
                fallen[i] = fallen.get(i, 0.0) + drop
                if kind == PIG and fallen[i] >= PIG_FALL_DEATH - _EPS:
                    self._destroy(i)
                    frontier.append(i)
                elif kind == BLOCK:
                    self.hp[i] -= LANDING_DAMAGE
                    if self.hp[i] <= _EPS:
                        self._destroy(i)
                        frontier.append(i)
            if moved:
                rounds += 1
        return rounds

    def _drop_height_for(self, i: int) -> float:
        geo = self.geo
        a, b, bottom = geo.x1[i], geo.x2[i], self.y1[i]
        best = 0.0
        for j in range(geo.n):
            if (
                j != i
                and self.alive[j]
                and geo.x1[j] < b
                and a < geo.x2[j]
                and self.y2[j] <= bottom + _EPS
                and self.y2[j] > best
            ):
                best = self.y2[j]
        return best


def simulate(
    level: Level,
    shots: Sequence[Shot],
    rules: ScoreRules = DEFAULT_RULES,
    trace: Callable[[dict], None] | None = None,
) -> SimOutcome:
    """Play ``shots`` in order against a fresh copy of ``level``."""
    if len(shots) > len(level.birds):
        raise ValueError(f"{len(shots)} shots but only {len(level.birds)} birds")
    state = SimState(level, rules)
    for shot in shots:
        if state.solved:
            break
        report = state.apply(shot)
        if trace is not None:
            trace(report.to_dict(state.geo))
    return state.outcome()


def trajectory_hit(level: Level, shot: Shot, state: SimState | None = None) -> Hit | None:
    """First object the untapped launch parabola intersects, or None on a miss."""
    if state is None:
        state = SimState(level)
    x0, y0 = level.slingshot
    vx = LAUNCH_SPEED * math.cos(shot.angle)
    vy = LAUNCH_SPEED * math.sin(shot.angle)
    t, i = state.first_hit(x0, y0, vx, vy)
    if i is None:
        return None
    return Hit(
        index=i,
        kind=KIND_NAMES[state.geo.kinds[i]],
        t=t,
        x=x0 + vx * t,
        y=y0 + vy * t - 0.5 * GRAVITY * t * t,
    )


def aim_angles(origin: tuple[float, float], target: tuple[float, float]) -> tuple[float, ...]:
    """Launch angles (low arc first) whose parabola passes through ``target``."""
    dx = target[0] - origin[0]
    dy = target[1] - origin[1]
    if dx <= 0.0:
        return ()
    v2 = LAUNCH_SPEED * LAUNCH_SPEED
    disc = v2 * v2 - GRAVITY * (GRAVITY * dx * dx + 2.0 * dy * v2)
    if disc < 0.0:
        return ()
    root = math.sqrt(disc)
    angles = []
    for num in (v2 - root, v2 + root):
        a = math.atan(num / (GRAVITY * dx))
        if 0.0 < a < math.pi / 2:
            angles.append(a)
    return tuple(angles)

