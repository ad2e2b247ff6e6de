import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from adaptive_levels.difficulty import (
    FitnessConfig,
    PlayRecord,
    average_score,
    d_score,
    d_solve,
    fitness_m,
    fitness_p,
    level_fitness,
)


def rec(solves=0, attempts=10, scores=None, max_score=8000, agent="a", level="L"):
    if scores is None:
        scores = [max_score] * solves + [0] * (attempts - solves)
    return PlayRecord(agent, level, attempts, solves, tuple(scores), max_score)


def with_d_score(agent, value, max_score=1000):
    """Single-attempt record whose d_score is exactly ``value``."""
    score = round((1 - value) * max_score)
    return PlayRecord(agent, "L", 1, int(score > 0), (score,), max_score)


# -- record validation --------------------------------------------------------


def test_record_rejects_solves_above_attempts():
    with pytest.raises(ValueError):
        PlayRecord("a", "L", 2, 3, (0, 0), 10)


def test_record_rejects_score_count_mismatch():
    with pytest.raises(ValueError):
        PlayRecord("a", "L", 3, 0, (0, 0), 10)


def test_record_rejects_score_above_max():
    with pytest.raises(ValueError):
        PlayRecord("a", "L", 1, 1, (11,), 10)


def test_record_round_trip():
    r = rec(3, 10, max_score=500)
    assert PlayRecord.from_dict(r.to_dict()) == r


# -- d_solve -------------------------------------------------------------------


def test_d_solve_three_of_ten():
    assert d_solve(rec(3, 10)) == pytest.approx(0.7, abs=1e-15)


def test_d_solve_boundaries():
    assert d_solve(rec(10, 10)) == 0.0
    assert d_solve(rec(0, 10)) == 1.0


def test_d_solve_rejects_zero_attempts():
    with pytest.raises(ValueError):
        d_solve(PlayRecord("a", "L", 0, 0, (), 10))


# -- d_score -------------------------------------------------------------------


def test_d_score_perfect_and_total_failure():
    assert d_score(rec(scores=[8000] * 4, attempts=4, solves=4)) == 0.0
    assert d_score(rec(scores=[0] * 4, attempts=4)) == 1.0


def test_d_score_hand_example():
    r = PlayRecord("a", "L", 2, 2, (1000, 3000), 8000)
    assert d_score(r) == pytest.approx(0.75, abs=1e-15)


def test_d_score_rejects_zero_max_score():
    with pytest.raises(ValueError):
        d_score(PlayRecord("a", "L", 1, 0, (0,), 0))


def test_solved_only_average_switch():
    r = PlayRecord("a", "L", 4, 2, (1000, 0, 3000, 0), 8000, (True, False, True, False))
    assert average_score(r, "all") == 1000
    assert average_score(r, "solved") == 2000
    assert d_score(r, "solved") == pytest.approx(0.75)
    unsolved = PlayRecord("a", "L", 2, 0, (0, 0), 8000)
    assert average_score(unsolved, "solved") == 0.0


# -- fitness_p -----------------------------------------------------------------


def test_fitness_p_exact_match():
    assert fitness_p(rec(5, 10), 0.5) == 1.0


def test_fitness_p_maximal_mismatch():
    assert fitness_p(rec(0, 10), 0.0) == 0.0


def test_fitness_p_hand_example():
    assert fitness_p(rec(5, 10), 0.25) == pytest.approx(0.75, abs=1e-15)


def test_fitness_p_rejects_bad_target():
    with pytest.raises(ValueError):
        fitness_p(rec(5, 10), 1.5)


@given(st.integers(0, 20), st.integers(0, 20))
def test_fitness_p_symmetric(i, j):
    # swapping the observed difficulty and the target leaves the value unchanged
    a, b = i / 20, j / 20
    r_a = rec(20 - i, 20)
    r_b = rec(20 - j, 20)
    assert fitness_p(r_a, b) == pytest.approx(fitness_p(r_b, a), abs=1e-12)


# -- fitness_m -----------------------------------------------------------------


def test_fitness_m_identical_records_is_zero():
    records = {a: rec(4, 10, agent=a) for a in ("x", "y", "z")}
    assert fitness_m(records, "x") == 0.0


def test_fitness_m_high_fitness_example():
    records = {a: with_d_score(a, v) for a, v in {"focal": 0.9, "b": 0.28, "c": 0.5}.items()}
    assert fitness_m(records, "focal") == pytest.approx(0.62, abs=1e-12)


def test_fitness_m_min_includes_focal():
    records = {a: with_d_score(a, v) for a, v in {"focal": 0.5, "a": 0.8, "b": 0.6}.items()}
    assert fitness_m(records, "focal") == 0.0


def test_fitness_m_inverse_is_negated():
    records = {a: with_d_score(a, v) for a, v in {"focal": 0.9, "b": 0.28}.items()}
    assert fitness_m(records, "focal", inverse=True) == pytest.approx(-0.62, abs=1e-12)


def test_fitness_m_accepts_sequence():
    records = [with_d_score("focal", 0.9), with_d_score("b", 0.28)]
    assert fitness_m(records, "focal") == pytest.approx(0.62, abs=1e-12)


def test_fitness_m_missing_roster_record():
    records = {"focal": with_d_score("focal", 0.5)}
    with pytest.raises(KeyError):
        fitness_m(records, "focal", roster=["focal", "ghost"])
    with pytest.raises(KeyError):
        fitness_m(records, "nobody")


def test_fitness_m_rejects_mixed_levels():
    records = {"focal": rec(1, 2, agent="focal", level="L1"), "b": rec(1, 2, agent="b", level="L2")}
    with pytest.raises(ValueError):
        fitness_m(records, "focal")


def test_fitness_m_focal_outside_roster_still_in_min():
    records = {a: with_d_score(a, v) for a, v in {"focal": 0.2, "b": 0.6}.items()}
    assert fitness_m(records, "focal", roster=["b"]) == 0.0


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_fitness_m_non_negative_property(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 200_000))
    records = {f"a{i}": oracles.random_record(rng, f"a{i}", max_score=m) for i in range(int(rng.integers(1, 6)))}
    value = fitness_m(records, "a0")
    assert value >= 0.0
    assert fitness_m(records, "a0", inverse=True) <= 0.0


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_measures_invariant_under_attempt_order(seed):
    rng = np.random.default_rng(seed)
    r = oracles.random_record(rng)
    perm = rng.permutation(r.attempts)
    shuffled = PlayRecord(
        r.agent_id,
        r.level_id,
        r.attempts,
        r.solves,
        tuple(r.scores[i] for i in perm),
        r.max_score,
        tuple(r.solved_mask[i] for i in perm),
    )
    assert d_solve(shuffled) == d_solve(r)
    assert d_score(shuffled) == pytest.approx(d_score(r), abs=1e-12)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_measures_match_exact_oracle(seed):
    rng = np.random.default_rng(seed)
    r = oracles.random_record(rng)
    assert math.isclose(d_solve(r), float(oracles.d_solve(r.solves, r.attempts)), abs_tol=1e-12)
    assert math.isclose(d_score(r), float(oracles.d_score(r.scores, r.max_score)), abs_tol=1e-12)


# -- configuration -------------------------------------------------------------


def test_config_requires_target_only_in_percentage_mode():
    with pytest.raises(ValueError):
        FitnessConfig("percentage", "naive")
    with pytest.raises(ValueError):
        FitnessConfig("relative", "naive", d_target=0.5)
    with pytest.raises(ValueError):
        FitnessConfig("bogus", "naive")


def test_config_adds_focal_to_roster():
    cfg = FitnessConfig("relative", "naive", roster=("tnt-hunter",))
    assert cfg.roster == ("naive", "tnt-hunter")
    assert cfg.agents_needed == ("naive", "tnt-hunter")
    assert FitnessConfig("percentage", "naive", d_target=0.5).agents_needed == ("naive",)


def test_level_fitness_dispatch():
    records = {a: with_d_score(a, v) for a, v in {"naive": 0.9, "b": 0.28}.items()}
    rel = FitnessConfig("relative", "naive", roster=("b",))
    inv = FitnessConfig("relative-inverse", "naive", roster=("b",))
    assert level_fitness(records, rel) == pytest.approx(0.62)
    assert level_fitness(records, inv) == pytest.approx(-0.62)
    assert inv.failure_fitness == -1.0 and rel.failure_fitness == 0.0
    pct = FitnessConfig("percentage", "naive", d_target=0.0)
    # the focal record solved its single attempt, so d_solve = 0 = target
    assert level_fitness(records, pct) == 1.0
