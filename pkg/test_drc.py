"""
Tests for dependent random choice and its simultaneous variant
"""

import math
from fractions import Fraction
from itertools import combinations_with_replacement, product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drc import (
    auxiliary_product_degrees,
    drc_good_event,
    drc_sample,
    drc_success_bound_check,
    simultaneous_drc,
)
from errors import BudgetExceededError, InvalidInputError, SearchExhaustedError
from graph_core import BipartitePair, bipartition, cycle_graph, mask_of

HALF = Fraction(1, 2)


def full_pair(a: int, b: int) -> BipartitePair:
    return BipartitePair.from_rows([(1 << b) - 1] * a, b)


def matching_pair(n: int) -> BipartitePair:
    return BipartitePair.from_rows([1 << i for i in range(n)], n)


@st.composite
def small_pairs(draw, max_side=4):
    a = draw(st.integers(1, max_side))
    b = draw(st.integers(1, max_side))
    rows = draw(st.lists(st.integers(0, (1 << b) - 1), min_size=a, max_size=a))
    return BipartitePair.from_rows(rows, b)


def test_sample_complete_pair():
    """Test that every pick in K_{n,n} keeps all of Y"""
    pair = full_pair(3, 3)
    sample = drc_sample(pair, 2, seed=4)
    assert len(sample.picked) == 2
    assert sample.common == pair.Y


def test_sample_empty_pair():
    """Test that an edgeless pair keeps nothing"""
    sample = drc_sample(BipartitePair.from_rows([0, 0], 2), 1, seed=0)
    assert sample.common == ()


def test_sample_cycle_pair():
    """Test C8 split by its bipartition: two picks share at most two neighbours"""
    g = cycle_graph(8)
    pair = BipartitePair(g, *bipartition(g))
    for seed in range(20):
        sample = drc_sample(pair, 2, seed=seed)
        assert len(sample.common) in (0, 1, 2)
        for y in sample.common:
            assert all(g.has_edge(x, y) for x in sample.picked)


def test_sample_deterministic():
    """Test that a seed fixes the picks"""
    pair = full_pair(5, 2)
    assert drc_sample(pair, 3, seed=8) == drc_sample(pair, 3, seed=8)


def test_sample_rejects_bad_input():
    """Test empty X and negative h"""
    with pytest.raises(InvalidInputError):
        drc_sample(BipartitePair.from_rows([], 2), 1, seed=0)
    with pytest.raises(InvalidInputError):
        drc_sample(full_pair(2, 2), -1, seed=0)


def test_bound_check_complete_pair():
    """Test K_{3,3} with h=2: every tuple is good"""
    check = drc_success_bound_check(full_pair(3, 3), 2)
    assert check.fraction == 1
    assert check.threshold == HALF
    assert check.tuples == 9
    assert check.holds


def test_bound_check_perfect_matching():
    """Test a perfect matching on three pairs with h=1"""
    check = drc_success_bound_check(matching_pair(3), 1)
    assert check.density == Fraction(1, 3)
    assert check.threshold == Fraction(1, 6)
    assert check.fraction == 1
    assert check.holds


def test_bound_check_budget(monkeypatch):
    """Test the tuple enumeration budget"""
    monkeypatch.setattr("drc.DRC_TUPLE_BUDGET", 100)
    with pytest.raises(BudgetExceededError):
        drc_success_bound_check(full_pair(5, 2), 3)


@settings(max_examples=150, deadline=None)
@given(small_pairs(), st.integers(1, 3))
def test_bound_check_always_holds(pair, h):
    """Test the success bound on every small pair"""
    assert drc_success_bound_check(pair, h).holds


@pytest.mark.slow
@pytest.mark.parametrize("h", [1, 2, 3])
def test_bound_check_every_small_pair(h):
    """Test the success bound on every pair with both parts of size at most 4"""
    checked = 0
    for a, b in product(range(1, 5), repeat=2):
        for rows in product(range(1 << b), repeat=a):
            check = drc_success_bound_check(BipartitePair.from_rows(list(rows), b), h)
            assert check.holds, (rows, b, h)
            checked += 1
    assert checked == sum(2 ** (a * b) for a, b in product(range(1, 5), repeat=2))


@settings(max_examples=60, deadline=None)
@given(small_pairs(), st.integers(1, 3))
def test_good_event_matches_bound_check(pair, h):
    """Test that with one target set the good event counts the same tuples"""
    check = drc_success_bound_check(pair, h)
    good = sum(
        drc_good_event(pair, [pair.Y], picked, check.density, h)[0]
        for picked in product(pair.X, repeat=h)
    )
    assert Fraction(good, len(pair.X) ** h) == check.fraction


def test_auxiliary_product_degrees():
    """Test factored degrees in K_{2,4} split into two halves"""
    pair = full_pair(2, 4)
    assert auxiliary_product_degrees(pair, [[2, 3], [4, 5]]) == [4, 4]
    assert auxiliary_product_degrees(matching_pair(2), [[2, 3]]) == [1, 1]


@settings(max_examples=60, deadline=None)
@given(small_pairs(), st.sampled_from([Fraction(1, 4), HALF, Fraction(1)]))
def test_auxiliary_degrees_meet_min_degree_bound(pair, p):
    """Test prod |N(x) & Y_i| >= p^l prod |Y_i| whenever every x meets p|Y_i|"""
    half = len(pair.Y) // 2
    subsets = [list(pair.Y[:half]), list(pair.Y[half:])]
    subsets = [s for s in subsets if s]
    masks = [mask_of(s) for s in subsets]
    if any(
        (pair.host.adj[x] & m).bit_count() < p * len(s)
        for x in pair.X
        for m, s in zip(masks, subsets)
    ):
        return
    floor = p ** len(subsets) * math.prod(len(s) for s in subsets)
    assert all(d >= floor for d in auxiliary_product_degrees(pair, subsets))


def test_simultaneous_complete_pair():
    """Test K_{4,4} with Y split in two: the first attempt keeps everything"""
    pair = full_pair(4, 4)
    outcome = simultaneous_drc(pair, [[4, 5], [6, 7]], h=1, r=1, p=1)
    assert outcome.attempts_used == 1
    assert outcome.subsets == [[4, 5], [6, 7]]
    assert outcome.good_certified and outcome.bad_refuted
    assert outcome.bad_check_exhaustive


def test_simultaneous_regime_flag():
    """Test the log2 feasibility values on K_{4,4}"""
    outcome = simultaneous_drc(full_pair(4, 4), [[4, 5], [6, 7]], h=1, r=1, p=1)
    assert outcome.feasibility_log2_lhs == -1
    assert outcome.feasibility_log2_rhs == pytest.approx(1.0)
    assert not outcome.in_guaranteed_regime


def test_simultaneous_min_degree_violation():
    """Test that every offending (x, i) pair is reported"""
    pair = BipartitePair.from_rows([0b01] * 4, 2)
    with pytest.raises(InvalidInputError) as info:
        simultaneous_drc(pair, [[4, 5]], h=1, r=1, p=1)
    assert info.value.detail["violations"] == [[0, 0], [1, 0], [2, 0], [3, 0]]


def test_simultaneous_rejects_foreign_subset():
    """Test that target sets must lie in Y"""
    with pytest.raises(InvalidInputError):
        simultaneous_drc(full_pair(2, 2), [[0, 2]], h=1, r=1, p=HALF)


def test_simultaneous_exhausted():
    """Test a matching: no single y has sqrt|X| common neighbours"""
    pair = matching_pair(3)
    with pytest.raises(SearchExhaustedError) as info:
        simultaneous_drc(pair, [[3, 4, 5]], h=0, r=1, p=Fraction(1, 3), max_attempts=4)
    assert info.value.detail["attempts"] == 4
    assert info.value.detail["last"] == {"good": True, "bad_refuted": False}


@settings(max_examples=80, deadline=None)
@given(small_pairs(), st.integers(0, 2), st.integers(1, 2), st.integers(0, 2**16))
def test_simultaneous_outcome_reverifies(pair, h, r, seed):
    """Test that every returned outcome meets both events it claims"""
    half = len(pair.Y) // 2
    subsets = [list(pair.Y[:half]), list(pair.Y[half:])]
    try:
        outcome = simultaneous_drc(pair, subsets, h, r, 0, max_attempts=5, seed=seed)
    except SearchExhaustedError:
        return
    common = pair.y_mask
    for x in outcome.picked:
        common &= pair.host.adj[x]
    assert outcome.subsets == [
        [y for y in s if common >> y & 1] for s in subsets
    ]
    kept = sorted({y for s in outcome.subsets for y in s})
    for ys in combinations_with_replacement(kept, r):
        shared = pair.x_mask
        for y in ys:
            shared &= pair.host.adj[y]
        assert shared.bit_count() ** 2 >= len(pair.X)
