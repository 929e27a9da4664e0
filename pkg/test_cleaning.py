"""
Tests for cleaning constants, lower-regular subpairs and both cleaning pipelines
"""

import json
import math
from decimal import Decimal
from fractions import Fraction
from itertools import combinations, product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cleaning import (
    cleaning_constants,
    drc_clean,
    find_lower_regular_pair,
    matching_clean,
    min_degree_color_select,
    regularity_clean,
    star_clean,
)
from edge_coloring import adversary_color
from errors import CleaningError, InvalidInputError, SearchExhaustedError
from graph_core import (
    BipartitePair,
    EdgeColoring,
    complete_block,
    complete_graph,
    construct_blowup,
    empty_block,
    path_graph,
    star_graph,
)
from models import (
    AdversaryStrategy,
    RegularityMode,
    RegularityParams,
    VerdictStatus,
    canonical_json,
)
from regularity import check_regularity_exact

HALF = Fraction(1, 2)


def mono(blowup, q=1, color=0):
    return EdgeColoring(blowup.host, {e: color for e in blowup.host.edges()}, q)


def y_parity(blowup):
    """Color each host edge by the position of its endpoint in the higher part"""
    position = {x: i for part in blowup.parts for i, x in enumerate(part)}
    colors = {}
    for x, y in blowup.host.edges():
        later = y if blowup.phi[y] > blowup.phi[x] else x
        colors[(x, y)] = position[later] % 2
    return EdgeColoring(blowup.host, colors, 2)


@st.composite
def small_pairs(draw, max_side=5):
    a = draw(st.integers(2, max_side))
    b = draw(st.integers(2, max_side))
    rows = draw(st.lists(st.integers(0, (1 << b) - 1), min_size=a, max_size=a))
    return BipartitePair.from_rows(rows, b)


class TestCleaningConstants:
    def test_matching_bound(self):
        """Test log2 lambda = 13 log2(1/8) at q=2, p=1/2, eta=1"""
        constants = cleaning_constants(2, 1, HALF, 1)
        assert constants.log2_lambda_matching == pytest.approx(-39)
        assert constants.log2_lambda_matching_half == pytest.approx(-37)

    def test_large_eta_limit(self):
        """Test that the matching factor tends to 1 as eta grows"""
        constants = cleaning_constants(2, 1, HALF, 10**6)
        assert -1e-4 < constants.log2_lambda_matching < 0

    def test_tower_against_integers(self):
        """Test the two-level tower against exact integer arithmetic"""
        constants = cleaning_constants(2, 1, HALF, HALF)
        first, second = constants.tower
        assert float(Decimal(first.neg_log2_eps)) == pytest.approx(1, rel=1e-9)
        assert float(Decimal(second.neg_log2_eps)) == pytest.approx(79, rel=1e-9)
        assert first.recursion_holds
        expected = math.log2(78 + 39 * 2**79)
        tower = float(Decimal(constants.log2_neg_log2_lambda_tower))
        assert tower == pytest.approx(expected, rel=1e-9)
        assert not constants.tower_overflow

    def test_tower_three_levels(self):
        """Test three occurrences of p/2q at delta=2"""
        constants = cleaning_constants(2, 2, HALF, HALF)
        assert len(constants.tower) == 3
        third = constants.tower[2]
        assert float(Decimal(third.neg_log2_eps)) == pytest.approx(
            79 + 39 * 2**79, rel=1e-9
        )
        assert constants.tower[1].recursion_holds
        assert third.recursion_holds is None
        assert not constants.tower_overflow

    def test_tower_overflow(self):
        """Test that a fourth level no longer fits"""
        constants = cleaning_constants(2, 3, HALF, HALF)
        assert constants.tower_overflow
        assert constants.tower[3].neg_log2_eps is None
        assert constants.log2_neg_log2_lambda_tower == "Infinity"

    def test_rejects_bad_parameters(self):
        """Test parameter validation"""
        with pytest.raises(InvalidInputError):
            cleaning_constants(0, 1, HALF, HALF)
        with pytest.raises(InvalidInputError):
            cleaning_constants(2, 1, 0, HALF)


class TestLowerRegularPair:
    def test_complete_pair_whole_parts(self):
        """Test that a complete pair is certified on its whole parts at once"""
        pair = BipartitePair.from_rows([0b1111] * 4, 4)
        found = find_lower_regular_pair(pair, HALF, 4)
        assert found.x_subset == [0, 1, 2, 3]
        assert found.y_subset == [4, 5, 6, 7]
        assert found.verdict.certified
        assert found.method == "greedy"
        assert found.attempts == 1

    def test_theory_size_reported(self):
        """Test n' = n p^(12/eps) / 2"""
        pair = BipartitePair.from_rows([0b0011, 0b0011, 0b1100, 0b1100], 4)
        found = find_lower_regular_pair(pair, HALF, 2)
        assert found.theory_target_size == pytest.approx(0.5 * 4 * 0.5**24)

    def test_rejects_bad_target(self):
        """Test target sizes outside the parts"""
        pair = BipartitePair.from_rows([0b11] * 2, 2)
        with pytest.raises(InvalidInputError):
            find_lower_regular_pair(pair, HALF, 3)

    def test_rejects_empty_pair(self):
        """Test that an edgeless pair has nothing to certify"""
        with pytest.raises(InvalidInputError):
            find_lower_regular_pair(BipartitePair.from_rows([0, 0], 2), HALF, 1)

    @pytest.mark.parametrize("p", [None, HALF])
    def test_sampled_attempts_run_after_greedy_fails(self, p):
        """Test that the seeded attempts rank with their permutation tiebreak"""
        pair = BipartitePair.from_rows([0b0001, 0b0001, 0b0001, 0b1110], 4)
        density = Fraction(pair.edge_count, 16) / 2 if p is None else p
        params = RegularityParams(L=1, p=density, mode=RegularityMode.LOWER_ONLY)
        exists = any(
            check_regularity_exact(pair.restrict(xs, ys), params).certified
            for xs in combinations(pair.X, 2)
            for ys in combinations(pair.Y, 2)
        )
        try:
            found = find_lower_regular_pair(pair, HALF, 2, p=p, seed=5)
        except SearchExhaustedError as error:
            assert not exists
            assert error.detail["exhaustive"] is True
            return
        assert exists
        sub = pair.restrict(found.x_subset, found.y_subset)
        assert check_regularity_exact(sub, params).certified

    @settings(max_examples=60, deadline=None)
    @given(small_pairs(), st.integers(0, 2**16))
    def test_search_complete_on_small_parts(self, pair, seed):
        """Test that the search finds a 2x2 subpair iff one exists"""
        if pair.edge_count == 0:
            return
        p = Fraction(pair.edge_count, len(pair.X) * len(pair.Y)) / 2
        params = RegularityParams(L=1, p=p, mode=RegularityMode.LOWER_ONLY)
        exists = any(
            check_regularity_exact(pair.restrict(xs, ys), params).certified
            for xs in combinations(pair.X, 2)
            for ys in combinations(pair.Y, 2)
        )
        try:
            found = find_lower_regular_pair(pair, HALF, 2, seed=seed, max_attempts=3)
        except SearchExhaustedError:
            assert not exists
            return
        assert exists
        sub = pair.restrict(found.x_subset, found.y_subset)
        assert check_regularity_exact(sub, params).certified


def _edge_blowup(size=8, provider=complete_block):
    return construct_blowup(path_graph(2), [size, size], provider)


class TestMatchingClean:
    def test_monochromatic_block(self):
        """Test a single fully color-0 block"""
        blowup = _edge_blowup()
        outcome = matching_clean([(0, 1)], blowup, mono(blowup, q=2), 1, 2, HALF)
        assert outcome.aux_coloring.color(0, 1) == 0
        assert [len(p) for p in outcome.trimmed_parts] == [4, 4]
        assert outcome.regularity_certificates[(0, 1)].certified
        assert outcome.all_certified

    def test_half_split_block(self):
        """Test the half-split adversary: the selected color certifies exactly"""
        blowup = _edge_blowup()
        coloring = adversary_color(blowup, AdversaryStrategy.HALF_SPLIT, 2)
        outcome = matching_clean([(0, 1)], blowup, coloring, 1, 2, HALF)
        color = outcome.aux_coloring.color(0, 1)
        xs, ys = outcome.trimmed_parts
        pair = coloring.class_pair(BipartitePair(blowup.host, xs, ys), color)
        params = RegularityParams(
            L=2, p=Fraction(1, 8), mode=RegularityMode.LOWER_ONLY
        )
        assert check_regularity_exact(pair, params).certified
        assert set(xs) <= set(blowup.parts[0]) and set(ys) <= set(blowup.parts[1])

    def test_single_color(self):
        """Test that q=1 forces the color"""
        blowup = _edge_blowup()
        outcome = matching_clean([(0, 1)], blowup, mono(blowup), 1, 1, HALF)
        assert outcome.aux_coloring.as_sequence() == (0,)

    def test_sparse_block_fails(self):
        """Test the error naming the edge and its color densities"""
        blowup = _edge_blowup(provider=empty_block)
        coloring = EdgeColoring(blowup.host, {}, 2)
        with pytest.raises(CleaningError) as info:
            matching_clean([(0, 1)], blowup, coloring, 1, 2, HALF)
        assert info.value.detail["edge"] == [0, 1]
        assert info.value.detail["densities"] == ["0", "0"]

    def test_rejects_non_matching(self):
        """Test that edges sharing a vertex are refused"""
        blowup = construct_blowup(path_graph(3), [4, 4, 4], complete_block)
        with pytest.raises(InvalidInputError):
            matching_clean([(0, 1), (1, 2)], blowup, mono(blowup), 1, 1, HALF)


class TestRegularityClean:
    def test_single_edge_equals_matching_clean(self):
        """Test that one Vizing stage on an edge is one matching stage"""
        blowup = _edge_blowup(size=16)
        coloring = adversary_color(blowup, AdversaryStrategy.HALF_SPLIT, 2)
        full = regularity_clean(blowup, coloring, 1, 2, HALF, seed=3)
        single = matching_clean(
            [(0, 1)], blowup, coloring, 1, 2, HALF, target_size=8, seed=3
        )
        assert len(full.shrink_log) == 1
        assert full.trimmed_parts == single.trimmed_parts
        assert full.aux_coloring == single.aux_coloring
        assert full.regularity_certificates == single.regularity_certificates

    def test_path_monochromatic(self):
        """Test P3 with complete single-color blocks: two stages, parts of size 4"""
        blowup = construct_blowup(path_graph(3), [16, 16, 16], complete_block)
        outcome = regularity_clean(blowup, mono(blowup), 1, 1, HALF)
        assert len(outcome.shrink_log) == 2
        assert [len(p) for p in outcome.trimmed_parts] == [4, 4, 4]
        for trimmed, part in zip(outcome.trimmed_parts, blowup.parts):
            assert set(trimmed) <= set(part)
        assert outcome.all_certified

    def test_triangle_half_split(self):
        """Test K3 under the half-split adversary and re-verify every edge"""
        blowup = construct_blowup(complete_graph(3), [16, 16, 16], complete_block)
        coloring = adversary_color(blowup, AdversaryStrategy.HALF_SPLIT, 2)
        outcome = regularity_clean(blowup, coloring, 1, 2, HALF, seed=1)
        assert outcome.all_certified
        parts = outcome.trimmed_parts
        for (u, v), verdict in outcome.regularity_certificates.items():
            color = outcome.aux_coloring.color(u, v)
            block = BipartitePair(blowup.host, parts[u], parts[v])
            pair = coloring.class_pair(block, color)
            params = RegularityParams(
                L=verdict.L, p=verdict.p, mode=RegularityMode.LOWER_ONLY
            )
            assert check_regularity_exact(pair, params).certified
        assert outcome.constants.delta == 2
        assert not outcome.flags["theory_shrink"]

    def test_nested_stage_sizes(self):
        """Test that logged sizes never grow between stages"""
        blowup = construct_blowup(complete_graph(3), [16, 16, 16], complete_block)
        outcome = regularity_clean(blowup, mono(blowup, q=2), 1, 2, HALF)
        sizes = [entry.sizes for entry in outcome.shrink_log]
        for before, after in zip(sizes, sizes[1:]):
            assert all(a <= b for a, b in zip(after, before))

    def test_outcome_serializes(self):
        """Test the JSON document of a cleaning outcome"""
        blowup = _edge_blowup()
        outcome = regularity_clean(blowup, mono(blowup), 1, 1, HALF)
        document = json.loads(canonical_json(outcome.to_model()))
        assert document["kind"] == "regularity"
        assert document["aux_coloring"]["colors"] == {"0-1": 0}
        assert document["regularity_certificates"]["0-1"]["status"] == (
            VerdictStatus.CERTIFIED.value
        )


class TestMinDegreeColorSelect:
    def test_single_color_block(self):
        """Test l=1 with a monochromatic complete block"""
        blowup = _edge_blowup()
        selection = min_degree_color_select(
            blowup.parts[0], [blowup.parts[1]], mono(blowup, q=2, color=1), 1, 1, 2
        )
        assert selection.x_star == blowup.parts[0]
        assert selection.colors == (1,)

    def test_parity_two_targets(self):
        """Test l=2, q=2 with blocks colored by y parity"""
        blowup = construct_blowup(star_graph(2), [8, 4, 4], complete_block)
        coloring = y_parity(blowup)
        selection = min_degree_color_select(
            blowup.parts[0], blowup.parts[1:], coloring, 1, 1, 2
        )
        assert len(selection.x_star) * 8 >= 8
        assert selection.colors == (0, 0)
        for x in selection.x_star:
            for c, ys in zip(selection.colors, blowup.parts[1:]):
                assert sum(coloring.color(x, y) == c for y in ys) * 4 >= len(ys)

    def test_small_target_rejected(self):
        """Test the |Y_i| >= L precondition"""
        blowup = _edge_blowup(size=4)
        with pytest.raises(InvalidInputError):
            min_degree_color_select(
                blowup.parts[0], [blowup.parts[1]], mono(blowup), 5, 1, 1
            )


class TestStarClean:
    def test_complete_monochromatic_star(self):
        """Test l=1, r=1 on a complete single-color block"""
        blowup = _edge_blowup()
        star = star_clean(blowup.parts[0], [blowup.parts[1]], mono(blowup), 1, 1, 1, 1)
        assert star.subsets == (blowup.parts[1],)
        assert star.min_common == 8
        assert star.holds and star.exhaustive

    def test_parity_star_checked_exhaustively(self):
        """Test l=2 with y-parity colors: only even positions survive"""
        blowup = construct_blowup(star_graph(2), [8, 4, 4], complete_block)
        coloring = y_parity(blowup)
        star = star_clean(blowup.parts[0], blowup.parts[1:], coloring, 1, 1, 2, 1)
        assert star.subsets == ((8, 10), (12, 14))
        assert star.exhaustive and star.holds
        assert star.min_common == 8

    def test_out_of_regime_is_flagged(self):
        """Test that small sizes are reported, not rejected"""
        blowup = _edge_blowup(size=4)
        star = star_clean(blowup.parts[0], [blowup.parts[1]], mono(blowup), 1, 1, 1, 1)
        assert not star.in_regime
        assert star.holds


def brute_force_common_ok(blowup, coloring, outcome, a, r, q):
    """Direct check of the r-tuple guarantee at one vertex a"""
    base = blowup.base
    leaves = [b for b in range(base.n) if base.has_edge(a, b)]
    need = Fraction(len(blowup.parts[a]), 2 * q**base.max_degree)
    for bs in product(leaves, repeat=r):
        color = [outcome.aux_coloring.color(a, b) for b in bs]
        for ys in product(*(outcome.trimmed_parts[b] for b in bs)):
            count = sum(
                all(coloring.color(x, y) == c for y, c in zip(ys, color))
                for x in blowup.parts[a]
            )
            if count * count < need:
                return False
    return True


class TestDrcClean:
    def test_single_edge_full_retention(self):
        """Test one star stage on a monochromatic complete block"""
        blowup = _edge_blowup()
        outcome = drc_clean(blowup, mono(blowup), r=1, q=1, L=1, p=1)
        assert outcome.trimmed_parts == blowup.parts
        assert len(outcome.shrink_log) == 1
        assert outcome.neighborhood_certificates[0].holds
        assert outcome.all_certified

    @pytest.mark.parametrize("r", [1, 2])
    def test_star_parity_against_brute_force(self, r):
        """Test K_{1,2} with the part-index parity adversary"""
        blowup = construct_blowup(star_graph(2), [8, 4, 4], complete_block)
        coloring = adversary_color(blowup, AdversaryStrategy.PART_INDEX_PARITY, 2)
        outcome = drc_clean(
            blowup, coloring, r=r, q=2, L=1, p=1, seed=5, max_attempts=2000
        )
        assert outcome.aux_coloring.graph == blowup.base
        assert all(outcome.trimmed_parts[b] for b in (1, 2))
        assert brute_force_common_ok(blowup, coloring, outcome, 0, r, 2)
        certificate = outcome.neighborhood_certificates[0]
        assert certificate.exhaustive and certificate.holds

    def test_shrink_factor_logged(self):
        """Test delta = (p/2q)^(5 Delta r) in the stage log"""
        blowup = _edge_blowup()
        outcome = drc_clean(blowup, mono(blowup, q=2), r=1, q=2, L=1, p=HALF)
        factor = float(outcome.shrink_log[0].factor)
        assert factor == pytest.approx(5 * math.log2(1 / 8))

    def test_rejects_non_crossing_side(self):
        """Test that side A must be independent in the base"""
        blowup = construct_blowup(path_graph(3), [4, 4, 4], complete_block)
        with pytest.raises(InvalidInputError):
            drc_clean(blowup, mono(blowup), r=1, q=1, L=1, p=1, a_side=[0, 1])

    def test_rejects_odd_cycle_base(self):
        """Test that a non-bipartite base is refused"""
        blowup = construct_blowup(complete_graph(3), [4, 4, 4], complete_block)
        with pytest.raises(InvalidInputError):
            drc_clean(blowup, mono(blowup), r=1, q=1, L=1, p=1)
