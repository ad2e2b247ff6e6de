import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_levels.level import (
    GENOME_LENGTH,
    INT_BOUNDS,
    SHAPES,
    Level,
    ParameterSet,
    PlacementError,
    gene_bounds,
    generate_level,
    genome_from_json,
    genome_to_json,
    is_integer_gene,
    random_parameter_set,
    sample_weighted,
    validate_level,
    within_reach,
)
from adaptive_levels.sim import PIG, SimState

# chi-square critical value, 2 degrees of freedom, p = 0.001
CHI2_CRIT_DF2 = 13.816


def params(**overrides) -> ParameterSet:
    base = dict(
        num_pigs=2,
        num_birds=3,
        num_ground_structures=1,
        num_platform_structures=0,
        max_tnt=1,
        bird_weights=(1.0,) * 5,
        material_weights=(1.0,) * 3,
        shape_weights=(1.0,) * 13,
    )
    base.update(overrides)
    return ParameterSet(**base)


def first_level(p: ParameterSet, seeds=range(200)):
    for seed in seeds:
        try:
            return generate_level(p, seed)
        except PlacementError:
            continue
    raise AssertionError("no seed produced a level")


genomes = st.builds(
    ParameterSet,
    num_pigs=st.integers(1, 15),
    num_birds=st.integers(1, 8),
    num_ground_structures=st.integers(1, 5),
    num_platform_structures=st.integers(0, 4),
    max_tnt=st.integers(0, 4),
    bird_weights=st.tuples(*[st.floats(0, 1)] * 5),
    material_weights=st.tuples(*[st.floats(0, 1)] * 3),
    shape_weights=st.tuples(*[st.floats(0, 1)] * 13),
)


# -- parameter set -------------------------------------------------------------


def test_genome_has_26_values():
    assert GENOME_LENGTH == 26
    assert len(params().to_genome()) == 26
    assert len(SHAPES) == 13


def test_parameter_bounds_enforced():
    with pytest.raises(ValueError):
        params(num_pigs=0)
    with pytest.raises(ValueError):
        params(num_birds=9)
    with pytest.raises(ValueError):
        params(max_tnt=5)
    with pytest.raises(ValueError):
        params(shape_weights=(1.5,) + (1.0,) * 12)
    with pytest.raises(ValueError):
        params(bird_weights=(1.0,) * 4)
    with pytest.raises(ValueError):
        params(num_pigs=2.5)


def test_gene_bounds_match_field_ranges():
    assert [gene_bounds(i) for i in range(5)] == list(INT_BOUNDS.values())
    assert all(gene_bounds(i) == (0.0, 1.0) for i in range(5, GENOME_LENGTH))
    assert [is_integer_gene(i) for i in range(GENOME_LENGTH)] == [True] * 5 + [False] * 21
    with pytest.raises(IndexError):
        gene_bounds(GENOME_LENGTH)


@given(genomes)
def test_genome_json_round_trip(p):
    text = genome_to_json(p)
    assert json.loads(text)["schema_version"] == 1
    assert genome_from_json(text) == p
    assert ParameterSet.from_genome(p.to_genome()) == p


def test_genome_json_rejects_other_schema():
    data = json.loads(genome_to_json(params()))
    data["schema_version"] = 99
    with pytest.raises(ValueError):
        genome_from_json(json.dumps(data))


def test_from_genome_rejects_wrong_length():
    with pytest.raises(ValueError):
        ParameterSet.from_genome([1.0] * 25)


# -- sample_weighted -----------------------------------------------------------


def draws(weights, n=10_000, seed=0):
    rng = np.random.default_rng(seed)
    return np.bincount([sample_weighted(weights, rng) for _ in range(n)], minlength=len(weights))


def test_degenerate_weights_always_pick_the_only_option():
    assert draws([1.0, 0.0, 0.0], n=1000)[0] == 1000


def test_even_pair_is_balanced():
    counts = draws([0.5, 0.5])
    assert counts[0] / counts.sum() == pytest.approx(0.5, abs=0.02)


def test_weighted_frequencies_and_chi_square():
    weights = [0.2, 0.4, 0.4]
    counts = draws(weights)
    n = counts.sum()
    freqs = counts / n
    assert np.allclose(freqs, weights, atol=0.02)
    expected = np.array(weights) * n
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < CHI2_CRIT_DF2


def test_all_zero_weights_fall_back_to_uniform():
    counts = draws([0.0, 0.0, 0.0, 0.0])
    assert np.allclose(counts / counts.sum(), 0.25, atol=0.02)


def test_weight_scaling_invariance():
    weights = [0.1, 0.7, 0.2]
    # scaling by a power of two is exact in floating point: identical draws
    a, b = np.random.default_rng(3), np.random.default_rng(3)
    assert [sample_weighted(weights, a) for _ in range(2000)] == [
        sample_weighted([w * 8 for w in weights], b) for _ in range(2000)
    ]
    # arbitrary positive factor: same distribution
    scaled = draws([w * 3.7 for w in weights], seed=1) / 10_000
    assert np.allclose(scaled, weights, atol=0.02)


def test_sample_weighted_rejects_bad_input():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_weighted([], rng)
    with pytest.raises(ValueError):
        sample_weighted([0.5, -0.1], rng)


# -- random parameter sets -----------------------------------------------------


def test_random_parameter_sets_cover_ranges():
    rng = np.random.default_rng(7)
    samples = [random_parameter_set(rng) for _ in range(10_000)]
    assert {s.num_pigs for s in samples} == set(range(1, 16))
    assert np.mean([s.num_birds for s in samples]) == pytest.approx(4.5, abs=0.1)
    for s in samples:
        for name, (lo, hi) in INT_BOUNDS.items():
            assert lo <= getattr(s, name) <= hi
        assert all(0.0 <= w <= 1.0 for w in s.bird_weights + s.material_weights + s.shape_weights)


# -- generator -----------------------------------------------------------------


def test_counts_copied_from_genome():
    level = first_level(params(num_pigs=15, num_birds=1))
    assert len(level.pigs) == 15
    assert len(level.birds) == 1


def test_generation_is_deterministic():
    p = params(num_pigs=4, num_ground_structures=2, num_platform_structures=1, max_tnt=3)
    seed = next(s for s in range(100) if _generates(p, s))
    assert generate_level(p, seed).dumps() == generate_level(p, seed).dumps()


def _generates(p, seed):
    try:
        generate_level(p, seed)
        return True
    except PlacementError:
        return False


def test_shape_frequency_follows_weights():
    # shapes 1 and 9 share a width, so they fit on exactly the same supports;
    # shape 1 carries twice the weight of shape 9
    weights = [0.0] * 13
    weights[1], weights[9] = 1.0, 0.5
    p = params(num_pigs=1, shape_weights=tuple(weights))
    rows = Counter()
    seed = 0
    while sum(rows.values()) < 10_000:
        level = generate_level(p, seed)
        seed += 1
        for s in level.structures:
            for y in sorted({b.y for b in s.blocks}):
                shapes = {b.shape for b in s.blocks if b.y == y}
                assert len(shapes) == 1
                rows[shapes.pop()] += 1
    assert set(rows) <= {1, 9}
    assert rows[1] / rows[9] == pytest.approx(2.0, rel=0.05)


def test_impossible_layout_raises_placement_error():
    wide = [0.0] * 13
    wide[5] = 1.0  # 8-wide bars only
    p = params(num_pigs=15, num_ground_structures=5, num_platform_structures=4, shape_weights=tuple(wide))
    failures = sum(not _generates(p, s) for s in range(20))
    assert failures > 0


@settings(max_examples=60, deadline=None)
@given(genomes, st.integers(0, 2**31 - 1))
def test_generator_returns_valid_level_or_raises(p, seed):
    try:
        level = generate_level(p, seed)
    except PlacementError:
        return
    assert validate_level(level, p) == []
    assert len(level.tnt) <= p.max_tnt
    assert Level.loads(level.dumps()) == level


@settings(max_examples=30, deadline=None)
@given(genomes, st.integers(0, 2**31 - 1))
def test_every_pig_is_within_launcher_reach(p, seed):
    try:
        level = generate_level(p, seed)
    except PlacementError:
        return
    state = SimState(level)
    for i in state.living(PIG):
        assert within_reach(*state.centre(i))


def test_level_id_is_content_hash():
    level = first_level(params())
    again = Level.loads(level.dumps())
    assert again.level_id == level.level_id
    other = first_level(params(num_pigs=3))
    assert other.level_id != level.level_id


def test_level_rejects_unknown_schema():
    data = first_level(params()).to_dict()
    data["schema_version"] = 2
    with pytest.raises(ValueError):
        Level.from_dict(data)


def test_validate_level_flags_overlap_and_floating_blocks():
    level = first_level(params())
    data = level.to_dict()
    block = data["structures"][0]["blocks"][0]
    data["structures"][0]["blocks"].append(dict(block))  # exact duplicate overlaps
    assert any("overlap" in p for p in validate_level(Level.from_dict(data)))
    data = level.to_dict()
    data["structures"][0]["blocks"][0]["y"] += 20.0
    assert validate_level(Level.from_dict(data))
