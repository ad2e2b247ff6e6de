"""Level representation, the 26-value generator genome and the level generator.

World coordinates are abstract units: x in [0, 100], y in [0, 50], ground at
y = 0 and the slingshot at (10, 2). Every generated coordinate lies on a 0.5
grid, so overlap and support tests are exact in floating point.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from adaptive_levels.seeding import SeedLike

logger = logging.getLogger(__name__)

BIRD_TYPES = ("red", "yellow", "blue", "black", "white")
MATERIALS = ("wood", "ice", "stone")

# (width, height) of the 13 block shapes
SHAPES: tuple[tuple[float, float], ...] = (
    (1.0, 1.0),
    (2.0, 1.0),
    (3.0, 1.0),
    (4.0, 1.0),
    (6.0, 1.0),
    (8.0, 1.0),
    (1.0, 2.0),
    (1.0, 3.0),
    (1.0, 4.0),
    (2.0, 2.0),
    (3.0, 2.0),
    (4.0, 2.0),
    (2.0, 3.0),
)

WORLD_BOUNDS = (0.0, 0.0, 100.0, 50.0)
SLINGSHOT = (10.0, 2.0)
GRAVITY = 9.8
LAUNCH_SPEED = 30.0
PLATFORM_HEIGHTS = (10.0, 18.0, 26.0, 34.0)
PLATFORM_THICKNESS = 1.0
STRUCTURE_ZONE = (22.0, 90.0)
PIG_SIZE = 2.0
TNT_SIZE = 1.0
PLACEMENT_RETRIES = 50
MAX_BASE_WIDTH = 12.0
MAX_ROW_BLOCKS = 3

INT_BOUNDS: dict[str, tuple[int, int]] = {
    "num_pigs": (1, 15),
    "num_birds": (1, 8),
    "num_ground_structures": (1, 5),
    "num_platform_structures": (0, 4),
    "max_tnt": (0, 4),
}
INT_FIELDS = tuple(INT_BOUNDS)
WEIGHT_FIELDS = (
    ("bird_weights", len(BIRD_TYPES)),
    ("material_weights", len(MATERIALS)),
    ("shape_weights", len(SHAPES)),
)
GENOME_LENGTH = len(INT_FIELDS) + sum(n for _, n in WEIGHT_FIELDS)
GENOME_SCHEMA_VERSION = 1
LEVEL_SCHEMA_VERSION = 1


class PlacementError(RuntimeError):
    """The generator could not lay out a genome's structures without overlap."""


@dataclass(frozen=True)
class ParameterSet:
    num_pigs: int
    num_birds: int
    num_ground_structures: int
    num_platform_structures: int
    max_tnt: int
    bird_weights: tuple[float, ...]
    material_weights: tuple[float, ...]
    shape_weights: tuple[float, ...]

    def __post_init__(self):
        for name, (lo, hi) in INT_BOUNDS.items():
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if not lo <= value <= hi:
                raise ValueError(f"{name}={value} outside [{lo}, {hi}]")
            object.__setattr__(self, name, int(value))
        for name, size in WEIGHT_FIELDS:
            weights = tuple(float(w) for w in getattr(self, name))
            if len(weights) != size:
                raise ValueError(f"{name} needs {size} values, got {len(weights)}")
            if any(not 0.0 <= w <= 1.0 for w in weights):
                raise ValueError(f"{name} values must lie in [0, 1]: {weights}")
            object.__setattr__(self, name, weights)

    def to_genome(self) -> list[float]:
        genes: list[float] = [getattr(self, name) for name in INT_FIELDS]
        for name, _ in WEIGHT_FIELDS:
            genes.extend(getattr(self, name))
        return genes

    @classmethod
    def from_genome(cls, genome: Sequence[float]) -> "ParameterSet":
        if len(genome) != GENOME_LENGTH:
            raise ValueError(f"genome must have {GENOME_LENGTH} values, got {len(genome)}")
        values: dict[str, Any] = {}
        for i, name in enumerate(INT_FIELDS):
            values[name] = genome[i]
        pos = len(INT_FIELDS)
        for name, size in WEIGHT_FIELDS:
            values[name] = tuple(genome[pos : pos + size])
            pos += size
        return cls(**values)


def gene_bounds(index: int) -> tuple[float, float]:
    """Inclusive bounds of the gene at ``index`` in the flat genome."""
    if index < len(INT_FIELDS):
        return INT_BOUNDS[INT_FIELDS[index]]
    if index < GENOME_LENGTH:
        return (0.0, 1.0)
    raise IndexError(index)


def is_integer_gene(index: int) -> bool:
    return index < len(INT_FIELDS)


def genome_to_json(params: ParameterSet) -> str:
    return json.dumps({"schema_version": GENOME_SCHEMA_VERSION, "genome": params.to_genome()})


def genome_from_json(text: str) -> ParameterSet:
    data = json.loads(text)
    if data.get("schema_version") != GENOME_SCHEMA_VERSION:
        raise ValueError(f"unsupported genome schema version: {data.get('schema_version')!r}")
    return ParameterSet.from_genome(data["genome"])


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    width: float
    height: float

    @property
    def x2(self) -> float:
        return self.x + self.width

    @property
    def y2(self) -> float:
        return self.y + self.height

    def overlaps(self, other: "Rect") -> bool:
        return (
            self.x < other.x2 and other.x < self.x2 and self.y < other.y2 and other.y < self.y2
        )


@dataclass(frozen=True)
class Block:
    shape: int
    material: str
    x: float
    y: float
    width: float
    height: float

    @property
    def rect(self) -> Rect:
        return Rect(self.x, self.y, self.width, self.height)


@dataclass(frozen=True)
class Pig:
    x: float
    y: float

    @property
    def rect(self) -> Rect:
        return Rect(self.x, self.y, PIG_SIZE, PIG_SIZE)


@dataclass(frozen=True)
class TNT:
    x: float
    y: float

    @property
    def rect(self) -> Rect:
        return Rect(self.x, self.y, TNT_SIZE, TNT_SIZE)


@dataclass(frozen=True)
class Structure:
    """A stack of blocks anchored on the ground or on a floating platform.

    ``height`` is the anchor height (0 for ground). ``platform`` is the
    indestructible slab the structure rests on, if any.
    """

    anchor: str
    height: float
    blocks: tuple[Block, ...]
    platform: Rect | None = None


@dataclass(frozen=True)
class Level:
    birds: tuple[str, ...]
    structures: tuple[Structure, ...]
    pigs: tuple[Pig, ...]
    tnt: tuple[TNT, ...]
    slingshot: tuple[float, float] = SLINGSHOT
    bounds: tuple[float, float, float, float] = WORLD_BOUNDS
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(b for s in self.structures for b in s.blocks)

    @property
    def platforms(self) -> tuple[Rect, ...]:
        return tuple(s.platform for s in self.structures if s.platform is not None)

    def to_dict(self) -> dict:
        return {
            "schema_version": LEVEL_SCHEMA_VERSION,
            "birds": list(self.birds),
            "structures": [
                {
                    "anchor": s.anchor,
                    "height": s.height,
                    "platform": None
                    if s.platform is None
                    else [s.platform.x, s.platform.y, s.platform.width, s.platform.height],
                    "blocks": [
                        {
                            "shape": b.shape,
                            "material": b.material,
                            "x": b.x,
                            "y": b.y,
                            "width": b.width,
                            "height": b.height,
                        }
                        for b in s.blocks
                    ],
                }
                for s in self.structures
            ],
            "pigs": [[p.x, p.y] for p in self.pigs],
            "tnt": [[t.x, t.y] for t in self.tnt],
            "slingshot": list(self.slingshot),
            "bounds": list(self.bounds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Level":
        if data.get("schema_version") != LEVEL_SCHEMA_VERSION:
            raise ValueError(f"unsupported level schema version: {data.get('schema_version')!r}")
        structures = tuple(
            Structure(
                anchor=s["anchor"],
                height=float(s["height"]),
                platform=None if s["platform"] is None else Rect(*map(float, s["platform"])),
                blocks=tuple(
                    Block(
                        shape=int(b["shape"]),
                        material=b["material"],
                        x=float(b["x"]),
                        y=float(b["y"]),
                        width=float(b["width"]),
                        height=float(b["height"]),
                    )
                    for b in s["blocks"]
                ),
            )
            for s in data["structures"]
        )
        return cls(
            birds=tuple(data["birds"]),
            structures=structures,
            pigs=tuple(Pig(float(x), float(y)) for x, y in data["pigs"]),
            tnt=tuple(TNT(float(x), float(y)) for x, y in data["tnt"]),
            slingshot=tuple(map(float, data["slingshot"])),
            bounds=tuple(map(float, data["bounds"])),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "Level":
        return cls.from_dict(json.loads(text))

    @property
    def level_id(self) -> str:
        """Content hash; equal levels share an id."""
        cached = self._cache.get("level_id")
        if cached is None:
            cached = hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()[:16]
            self._cache["level_id"] = cached
        return cached


def sample_weighted(weights: Sequence[float], rng: np.random.Generator) -> int:
    """Draw index k with probability weights[k] / sum(weights).

    An all-zero vector falls back to a uniform draw.
    """
    n = len(weights)
    if n == 0:
        raise ValueError("cannot sample from an empty weight vector")
    total = 0.0
    for w in weights:
        if w < 0:
            raise ValueError(f"weights must be non-negative: {list(weights)}")
        total += w
    if total <= 0.0:
        return int(rng.integers(n))
    u = rng.random() * total
    acc = 0.0
    last = 0
    for k, w in enumerate(weights):
        if w <= 0.0:
            continue
        acc += w
        last = k
        if u < acc:
            return k
    return last


def random_parameter_set(rng: np.random.Generator) -> ParameterSet:
    values: dict[str, Any] = {}
    for name, (lo, hi) in INT_BOUNDS.items():
        values[name] = int(rng.integers(lo, hi + 1))
    for name, size in WEIGHT_FIELDS:
        values[name] = tuple(float(w) for w in rng.random(size))
    return ParameterSet(**values)


# -- generator ---------------------------------------------------------------


def _snap(value: float) -> float:
    return float(np.floor(value * 2.0) / 2.0)


def _coverage(x0: float, x1: float, supports: Sequence[tuple[float, float]]) -> float:
    covered = 0.0
    for s0, s1 in supports:
        lo, hi = max(x0, s0), min(x1, s1)
        if hi > lo:
            covered += hi - lo
    return covered / (x1 - x0)


def _row_arrangements(width: float, supports: list[tuple[float, float]], spread_first: bool):
    """Candidate x-positions for a row of identical blocks over ``supports``."""
    lo = min(s[0] for s in supports)
    hi = max(s[1] for s in supports)
    span = hi - lo
    centre = (lo + hi) / 2.0
    n_max = min(MAX_ROW_BLOCKS, int(span // width))
    for n in range(max(n_max, 1), 0, -1):
        packed = [_snap(centre - n * width / 2.0) + i * width for i in range(n)]
        options = [packed]
        if n >= 2 and n * width < span:
            step = (span - width) / (n - 1)
            spread = [_snap(lo + i * step) for i in range(n)]
            spread[-1] = hi - width
            options.insert(0 if spread_first else 1, spread)
        for xs in options:
            overlapping = any(xs[i] + width > xs[i + 1] for i in range(len(xs) - 1))
            if overlapping:
                continue
            if all(_coverage(x, x + width, supports) >= 0.5 for x in xs):
                yield xs


def _build_stack(
    rng: np.random.Generator, params: ParameterSet, max_height: float
) -> list[tuple[int, str, float, float]]:
    """Random stack of 2-6 rows; returns (shape, material, x, y) in local coordinates."""
    rows = int(rng.integers(2, 7))
    blocks: list[tuple[int, str, float, float]] = []
    supports: list[tuple[float, float]] | None = None
    y = 0.0
    for _ in range(rows):
        material = MATERIALS[sample_weighted(params.material_weights, rng)]
        spread_first = bool(rng.random() < 0.5)
        feasible: dict[int, list[float]] = {}
        for shape, (w, h) in enumerate(SHAPES):
            if y + h > max_height:
                continue
            if supports is None:
                if w <= MAX_BASE_WIDTH:
                    feasible[shape] = []
                continue
            xs = next(_row_arrangements(w, supports, spread_first), None)
            if xs is not None:
                feasible[shape] = xs
        if not feasible:
            break
        masked = [params.shape_weights[s] if s in feasible else 0.0 for s in range(len(SHAPES))]
        if sum(masked) <= 0.0:
            masked = [1.0 if s in feasible else 0.0 for s in range(len(SHAPES))]
        shape = sample_weighted(masked, rng)
        w, h = SHAPES[shape]
        if supports is None:
            n = int(rng.integers(1, MAX_ROW_BLOCKS + 1))
            gap = float(rng.integers(0, 3))
            while n > 1 and n * w + (n - 1) * gap > MAX_BASE_WIDTH:
                n -= 1
            xs = [i * (w + gap) for i in range(n)]
        else:
            xs = feasible[shape]
        blocks.extend((shape, material, x, y) for x in xs)
        supports = [(x, x + w) for x in xs]
        y += h
    return blocks


@dataclass
class _Layout:
    occupied: list[Rect] = field(default_factory=list)  # structure bounding boxes
    solids: list[Rect] = field(default_factory=list)  # blocks, platforms, pigs, TNT
    surfaces: list[tuple[float, float, float, str]] = field(default_factory=list)


def _place_structure(
    rng: np.random.Generator,
    params: ParameterSet,
    layout: _Layout,
    anchor_height: float,
) -> Structure:
    on_platform = anchor_height > 0.0
    top_limit = WORLD_BOUNDS[3] - PIG_SIZE - anchor_height
    local = _build_stack(rng, params, top_limit)
    x_min = min(x for _, _, x, _ in local)
    x_max = max(x + SHAPES[s][0] for s, _, x, _ in local)
    height = max(y + SHAPES[s][1] for s, _, _, y in local)
    width = x_max - x_min
    margin = 1.0 if on_platform else 0.0
    foot = width + 2 * margin
    zone_lo, zone_hi = STRUCTURE_ZONE
    if foot > zone_hi - zone_lo:
        raise PlacementError(f"structure of width {foot} does not fit in the level")
    bottom = anchor_height - PLATFORM_THICKNESS if on_platform else 0.0
    for _ in range(PLACEMENT_RETRIES):
        left = _snap(rng.uniform(zone_lo, zone_hi - foot))
        # half-unit clearance keeps neighbouring structures apart
        bbox = Rect(left - 0.5, bottom, foot + 1.0, anchor_height - bottom + height + PIG_SIZE)
        if any(bbox.overlaps(o) for o in layout.occupied):
            continue
        layout.occupied.append(bbox)
        origin = left + margin - x_min
        blocks = tuple(
            Block(s, m, origin + x, anchor_height + y, SHAPES[s][0], SHAPES[s][1])
            for s, m, x, y in local
        )
        platform = None
        if on_platform:
            platform = Rect(left, bottom, foot, PLATFORM_THICKNESS)
            layout.solids.append(platform)
            layout.surfaces.append((platform.x, platform.x2, platform.y2, "platform"))
        for b in blocks:
            layout.solids.append(b.rect)
            layout.surfaces.append((b.x, b.x + b.width, b.y + b.height, "block"))
        return Structure(
            anchor="platform" if on_platform else "ground",
            height=anchor_height,
            blocks=blocks,
            platform=platform,
        )
    raise PlacementError(
        f"could not place a {'platform' if on_platform else 'ground'} structure "
        f"after {PLACEMENT_RETRIES} attempts"
    )


def within_reach(x: float, y: float, origin: tuple[float, float] = SLINGSHOT) -> bool:
    """True when some launch angle's parabola passes through (x, y)."""
    dx, dy = x - origin[0], y - origin[1]
    if dx <= 0.0:
        return False
    v2 = LAUNCH_SPEED * LAUNCH_SPEED
    return v2 * v2 - GRAVITY * (GRAVITY * dx * dx + 2.0 * dy * v2) >= 0.0


def _free_spots(surface, size: float, layout: _Layout) -> list[float]:
    s0, s1, y, _ = surface
    if y + size > WORLD_BOUNDS[3]:
        return []
    near = [r for r in layout.solids if r.x < s1 + size and r.x2 > s0 - size and r.y2 > y and r.y < y + size]
    spots = []
    x = s0 - size / 2.0
    while x <= s1 - size / 2.0:
        if WORLD_BOUNDS[0] <= x and x + size <= WORLD_BOUNDS[2] and within_reach(x + size / 2.0, y + size / 2.0):
            if not any(r.x < x + size and x < r.x2 and r.y < y + size and y < r.y2 for r in near):
                spots.append(x)
        x += 0.5
    return spots


def _ground_surfaces(layout: _Layout) -> list[tuple[float, float, float, str]]:
    """The open ground across the structure zone."""
    return [(STRUCTURE_ZONE[0], STRUCTURE_ZONE[1], 0.0, "ground")]


def _place_items(
    rng: np.random.Generator,
    count: int,
    size: float,
    layout: _Layout,
    surfaces: list,
    required: bool,
) -> list[tuple[float, float]]:
    placed: list[tuple[float, float]] = []
    exhausted: set[int] = set()
    failures = 0
    while len(placed) < count:
        open_surfaces = [i for i in range(len(surfaces)) if i not in exhausted]
        if not open_surfaces or (not required and failures >= PLACEMENT_RETRIES):
            if required:
                raise PlacementError(f"no free spot for item {len(placed) + 1} of {count}")
            break
        idx = open_surfaces[int(rng.integers(len(open_surfaces)))]
        spots = _free_spots(surfaces[idx], size, layout)
        if not spots:
            exhausted.add(idx)
            failures += 1
            continue
        x = spots[int(rng.integers(len(spots)))]
        y = surfaces[idx][2]
        placed.append((x, y))
        layout.solids.append(Rect(x, y, size, size))
    return placed


def generate_level(params: ParameterSet, seed: SeedLike) -> Level:
    """Build a concrete level from a genome; a pure function of (params, seed).

    Raises PlacementError when the requested structures or pigs cannot be laid
    out without overlap within the retry budget.
    """
    rng = np.random.default_rng(seed)
    birds = tuple(
        BIRD_TYPES[sample_weighted(params.bird_weights, rng)] for _ in range(params.num_birds)
    )
    layout = _Layout()
    structures = [
        _place_structure(rng, params, layout, 0.0) for _ in range(params.num_ground_structures)
    ]
    for i in range(params.num_platform_structures):
        structures.append(_place_structure(rng, params, layout, PLATFORM_HEIGHTS[i]))

    surfaces = layout.surfaces + _ground_surfaces(layout)
    pigs = _place_items(rng, params.num_pigs, PIG_SIZE, layout, surfaces, required=True)
    tnt = _place_items(rng, params.max_tnt, TNT_SIZE, layout, surfaces, required=False)
    return Level(
        birds=birds,
        structures=tuple(structures),
        pigs=tuple(Pig(x, y) for x, y in pigs),
        tnt=tuple(TNT(x, y) for x, y in tnt),
    )


def validate_level(level: Level, params: ParameterSet | None = None) -> list[str]:
    """Return a list of invariant violations (empty when the level is valid)."""
    problems: list[str] = []
    if params is not None:
        if len(level.pigs) != params.num_pigs:
            problems.append(f"pig count {len(level.pigs)} != {params.num_pigs}")
        if len(level.birds) != params.num_birds:
            problems.append(f"bird count {len(level.birds)} != {params.num_birds}")
        ground = sum(1 for s in level.structures if s.anchor == "ground")
        platform = sum(1 for s in level.structures if s.anchor == "platform")
        if ground != params.num_ground_structures:
            problems.append(f"ground structures {ground} != {params.num_ground_structures}")
        if platform != params.num_platform_structures:
            problems.append(f"platform structures {platform} != {params.num_platform_structures}")
        if len(level.tnt) > params.max_tnt:
            problems.append(f"tnt count {len(level.tnt)} > {params.max_tnt}")

    for b in level.blocks:
        if not 0 <= b.shape < len(SHAPES) or b.material not in MATERIALS:
            problems.append(f"bad block {b}")
        elif (b.width, b.height) != SHAPES[b.shape]:
            problems.append(f"block extent does not match shape {b.shape}: {b}")
    for bird in level.birds:
        if bird not in BIRD_TYPES:
            problems.append(f"unknown bird {bird!r}")

    rects = (
        [b.rect for b in level.blocks]
        + list(level.platforms)
        + [p.rect for p in level.pigs]
        + [t.rect for t in level.tnt]
    )
    x0, y0, x1, y1 = level.bounds
    for i, r in enumerate(rects):
        if r.x < x0 or r.x2 > x1 or r.y < y0 or r.y2 > y1:
            problems.append(f"object out of bounds: {r}")
        for other in rects[i + 1 :]:
            if r.overlaps(other):
                problems.append(f"overlap: {r} / {other}")

    supports = [b.rect for b in level.blocks] + list(level.platforms)
    for s in level.structures:
        for b in s.blocks:
            if b.y == 0.0:
                continue
            under = [(r.x, r.x2) for r in supports if r.y2 == b.y]
            if _coverage(b.x, b.x + b.width, under) < 0.5:
                problems.append(f"block base covered < 50%: {b}")
    for pig in level.pigs:
        cx, cy = pig.rect.x + pig.rect.width / 2.0, pig.rect.y + pig.rect.height / 2.0
        if not within_reach(cx, cy, level.slingshot):
            problems.append(f"pig out of launcher reach: {pig}")
    for item in list(level.pigs) + list(level.tnt):
        r = item.rect
        if r.y == 0.0:
            continue
        under = [(o.x, o.x2) for o in supports if o.y2 == r.y]
        if _coverage(r.x, r.x2, under) <= 0.0:
            problems.append(f"unsupported item: {item}")
    return problems
