"""
Tests for the greedy and blowup embedders
"""

from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embedding import (
    audit_bad_events,
    embedding_graphs,
    feasibility_check,
    greedy_induced_embed,
    lll_blowup_embed,
    theory_eta,
)
from errors import InvalidInputError, InvariantViolation
from graph_core import (
    EdgeColoring,
    build_graph,
    complete_block,
    complete_blowup,
    complete_graph,
    construct_blowup,
    is_blowup_of,
    is_induced_copy,
    path_graph,
)
from models import EmbedParams
from rng import make_rng

EDGE = complete_graph(2)
P3 = path_graph(3)
TRIANGLE = complete_graph(3)


def mono(blowup):
    host = blowup.host
    return EdgeColoring.from_sequence(host, [0] * host.edge_count, 1)


def setup(base, pattern, sizes, provider=complete_block, copy=None):
    blowup = construct_blowup(base, sizes, provider)
    coloring = mono(blowup)
    hstar, gstar = embedding_graphs(coloring, 0, pattern, blowup.parts, copy)
    return blowup, coloring, hstar, gstar


def params(**overrides):
    values = dict(s_star=4, L=0, L_prime=0, p="1/4", rho=1, k=1, delta=1)
    values.update(overrides)
    return EmbedParams(**values)


def sparse_far_side(u, v, a, b):
    # Matching between parts 0 and 2, complete elsewhere
    if (u, v) == (0, 2):
        return [1 << i for i in range(a)]
    return complete_block(u, v, a, b)


class TestFeasibility:
    def test_greedy_inequality(self):
        """Test s*=1000, rho=1/2, k=1, p=1/100, Delta=2, L=L'=1"""
        report = feasibility_check(
            EmbedParams(s_star=1000, L=1, L_prime=1, p="1/100", rho="1/2", k=1, delta=2)
        )
        assert report.greedy_lhs == Fraction(2401, 10)
        assert report.greedy_rhs == 3
        assert report.greedy_holds
        assert report.lll_holds is None

    def test_zero_thresholds(self):
        """Test that L = L' = 0 always passes"""
        assert feasibility_check(params(s_star=1, k=3, delta=3)).greedy_holds

    def test_eta_is_tight(self):
        """Test that L = L' = eta*s* leaves zero slack"""
        eta = theory_eta(Fraction(1, 2), 1, Fraction(1, 100), 2)
        assert eta == Fraction(2401, 30000)
        report = feasibility_check(
            EmbedParams(
                s_star=1000,
                L=eta * 1000,
                L_prime=eta * 1000,
                p="1/100",
                rho="1/2",
                k=1,
                delta=2,
            )
        )
        assert report.greedy_slack == 0
        assert not report.greedy_holds

    def test_eta_needs_degrees(self):
        """Test Delta + k = 0"""
        with pytest.raises(InvalidInputError):
            theory_eta(1, 0, Fraction(1, 4), 0)

    def test_local_lemma_inequality(self):
        """Test w*Delta*L/s* against 1/(e(w Delta^2 + 1))"""
        report = feasibility_check(params(s_star=100, L=1, w=1))
        assert report.lll_holds
        assert report.lll_lhs == "1/100"
        assert float(report.lll_rhs) == pytest.approx(1 / (2 * 2.718281828459045))

        tight = feasibility_check(params(s_star=2, L=1, w=1))
        assert not tight.lll_holds
        assert tight.lll_slack.startswith("-")


class TestGreedyEmbed:
    def test_single_edge_complete(self):
        """Test one edge into complete monochromatic blocks"""
        blowup, coloring, hstar, gstar = setup(EDGE, EDGE, [4, 4])
        embedding, trace = greedy_induced_embed(
            EDGE,
            EDGE,
            hstar,
            gstar,
            blowup.parts,
            params(),
            hypotheses_certified=True,
            color=0,
        )
        assert embedding.mapping == (0, 4)
        assert embedding.verify(coloring)
        assert trace.hypotheses_certified
        assert trace.candidate_sizes == [[4, 4], [None, 4], [None, None]]
        assert trace.fallback_steps == []
        assert trace.law_violations == []

    def test_avoids_base_neighbours(self):
        """Test P3 on a triangle: the far endpoint avoids the first neighbours"""
        blowup, coloring, hstar, gstar = setup(TRIANGLE, P3, [4, 4, 4], sparse_far_side)
        embedding, trace = greedy_induced_embed(
            P3, TRIANGLE, hstar, gstar, blowup.parts, params(k=2, delta=2), color=0
        )
        assert embedding.mapping == (0, 4, 9)
        assert trace.order == [0, 1, 2]
        assert trace.candidate_sizes == [
            [4, 4, 4],
            [None, 4, 3],
            [None, None, 3],
            [None] * 3,
        ]
        assert trace.law_violations == []
        assert is_induced_copy(blowup.host, P3, embedding.mapping, coloring, 0)

    def test_failure_is_reported(self):
        """Test P3 on a complete triangle blowup: no induced P3 exists"""
        blowup, _, hstar, gstar = setup(TRIANGLE, P3, [4, 4, 4])
        embedding, trace = greedy_induced_embed(
            P3, TRIANGLE, hstar, gstar, blowup.parts, params(k=2, delta=2)
        )
        assert embedding is None
        assert trace.failure_step == 2
        assert trace.fallback_steps == [0]
        assert trace.law_violations[0].i == 2
        assert trace.law_violations[0].size == 0

    def test_law_after_fallback_is_recorded_not_raised(self):
        """Test that a drop below the bound after a fallback step is only recorded"""
        blowup, _, hstar, gstar = setup(TRIANGLE, P3, [4, 4, 4])
        embedding, trace = greedy_induced_embed(
            P3,
            TRIANGLE,
            hstar,
            gstar,
            blowup.parts,
            params(k=2, delta=2),
            hypotheses_certified=True,
        )
        assert embedding is None
        assert trace.hypotheses_certified
        assert trace.fallback_steps == [0]
        assert not trace.law_enforced
        assert trace.law_violations[0].i == 2

    def test_law_violation_under_certificates(self, monkeypatch):
        """Test that a drop below the bound raises while the law is enforced"""
        monkeypatch.setattr(
            "embedding._law_bound", lambda params, joined, avoided: Fraction(5)
        )
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [4, 4])
        with pytest.raises(InvariantViolation):
            greedy_induced_embed(
                EDGE,
                EDGE,
                hstar,
                gstar,
                blowup.parts,
                params(),
                hypotheses_certified=True,
            )

    def test_certified_without_greedy_inequality(self):
        """Test that p = 4/5 leaves the inequality false while the law is enforced"""
        blowup, coloring, hstar, gstar = setup(TRIANGLE, P3, [4, 4, 4], sparse_far_side)
        starved = params(k=2, delta=2, p="4/5", L=1, L_prime=1)
        assert not feasibility_check(starved).greedy_holds
        embedding, trace = greedy_induced_embed(
            P3,
            TRIANGLE,
            hstar,
            gstar,
            blowup.parts,
            starved,
            hypotheses_certified=True,
            color=0,
        )
        assert embedding.verify(coloring)
        assert trace.hypotheses_certified
        assert trace.law_enforced
        assert trace.fallback_steps == []
        assert trace.law_violations == []

    def test_structure_bounds_gate_certification(self):
        """Test that parts below s* withhold the certificate flag"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [4, 4])
        _, trace = greedy_induced_embed(
            EDGE,
            EDGE,
            hstar,
            gstar,
            blowup.parts,
            params(s_star=5),
            hypotheses_certified=True,
        )
        assert not trace.hypotheses_certified
        assert not trace.law_enforced

    def test_candidate_sizes_non_increasing(self):
        """Test every candidate set only shrinks"""
        blowup, _, hstar, gstar = setup(TRIANGLE, P3, [4, 4, 4], sparse_far_side)
        _, trace = greedy_induced_embed(
            P3, TRIANGLE, hstar, gstar, blowup.parts, params(k=2, delta=2)
        )
        for before, after in zip(trace.candidate_sizes, trace.candidate_sizes[1:]):
            for old, new in zip(before, after):
                assert new is None or new <= old

    def test_custom_order(self):
        """Test embedding from the middle vertex"""
        blowup, coloring, hstar, gstar = setup(TRIANGLE, P3, [4, 4, 4], sparse_far_side)
        embedding, trace = greedy_induced_embed(
            P3,
            TRIANGLE,
            hstar,
            gstar,
            blowup.parts,
            params(k=2, delta=2),
            order=[1, 0, 2],
        )
        assert trace.order == [1, 0, 2]
        assert is_induced_copy(blowup.host, P3, embedding.mapping, coloring, 0)

    def test_deterministic(self):
        """Test that identical inputs give identical traces"""
        blowup, _, hstar, gstar = setup(TRIANGLE, P3, [4, 4, 4], sparse_far_side)
        args = (P3, TRIANGLE, hstar, gstar, blowup.parts, params(k=2, delta=2))
        assert greedy_induced_embed(*args) == greedy_induced_embed(*args)

    def test_rejects_bad_order(self):
        """Test that the order must be a permutation"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [2, 2])
        with pytest.raises(InvalidInputError):
            greedy_induced_embed(
                EDGE, EDGE, hstar, gstar, blowup.parts, params(), order=[0, 0]
            )

    def test_rejects_non_injective_copy(self):
        """Test that the pattern must sit injectively on the base"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [2, 2])
        with pytest.raises(InvalidInputError):
            greedy_induced_embed(
                EDGE, EDGE, hstar, gstar, blowup.parts, params(), copy=[0, 0]
            )

    def test_rejects_hstar_outside_gstar(self):
        """Test H* must be a subgraph of G*"""
        blowup, _, hstar, _ = setup(EDGE, EDGE, [2, 2])
        empty = build_graph(4, [])
        with pytest.raises(InvalidInputError):
            greedy_induced_embed(EDGE, EDGE, hstar, empty, blowup.parts, params())

    def test_rejects_gstar_off_base(self):
        """Test G* edges between parts of a base non-edge"""
        blowup, coloring, _, gstar = setup(TRIANGLE, P3, [4, 4, 4], sparse_far_side)
        hstar, _ = embedding_graphs(coloring, 0, P3, blowup.parts)
        with pytest.raises(InvalidInputError):
            greedy_induced_embed(
                P3, P3, hstar, gstar, blowup.parts, params(k=2, delta=2)
            )


def random_rows(seed):
    def provider(u, v, a, b):
        rows = make_rng(seed, "block", u, v).integers(0, 1 << b, size=a)
        return [int(r) for r in rows]

    return provider


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**16))
def test_greedy_never_returns_false_copies(seed):
    """Test every returned embedding against the host and networkx"""
    blowup = construct_blowup(TRIANGLE, [6, 6, 6], random_rows(seed))
    host = blowup.host
    draws = make_rng(seed, "colors").integers(0, 2, size=host.edge_count)
    coloring = EdgeColoring.from_sequence(host, [int(c) for c in draws], 2)
    for color in (0, 1):
        hstar, gstar = embedding_graphs(coloring, color, P3, blowup.parts)
        embedding, _ = greedy_induced_embed(
            P3, TRIANGLE, hstar, gstar, blowup.parts, params(s_star=6, k=2, delta=2)
        )
        if embedding is None:
            continue
        assert is_induced_copy(host, P3, embedding.mapping, coloring, color)
        image = host.to_networkx().subgraph(embedding.mapping)
        assert nx.is_isomorphic(image, P3.to_networkx())


def one_good_column(u, v, a, b):
    # Every x sees only the second vertex of Y
    return [0b10] * a


class TestBlowupEmbed:
    def test_single_edge_one_round(self):
        """Test w=1 on complete blocks: no resampling"""
        blowup, coloring, hstar, gstar = setup(EDGE, EDGE, [4, 4])
        embedding, trace = lll_blowup_embed(
            EDGE, EDGE, 1, hstar, gstar, blowup.parts, params(), color=0
        )
        assert trace.resamples == 0
        assert trace.surviving_bad_events == 0
        assert embedding.mapping[0] == 0
        assert embedding.mapping[1] in blowup.parts[1]
        assert embedding.verify(coloring)

    def test_resamples_until_valid(self):
        """Test that the only draw with valid images is eventually found"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [2, 4], one_good_column)
        embedding, trace = lll_blowup_embed(
            EDGE, EDGE, 1, hstar, gstar, blowup.parts, params(s_star=2), seed=7
        )
        assert embedding.mapping == (0, 3)
        assert trace.t_set_sizes == {"0": 2}

    def test_induced_two_blowup(self):
        """Test an edge plus a vertex on P3: the 2-blowup avoids the extra base edge"""
        pattern = build_graph(3, [(0, 1)])

        def provider(u, v, a, b):
            if (u, v) == (1, 2):
                return [1 << i for i in range(a)]
            return complete_block(u, v, a, b)

        blowup, coloring, hstar, gstar = setup(P3, pattern, [2, 4, 4], provider)
        embedding, trace = lll_blowup_embed(
            pattern,
            P3,
            2,
            hstar,
            gstar,
            blowup.parts,
            params(s_star=2, delta=2),
            seed=3,
        )
        hprime, _ = complete_blowup(pattern, 2)
        assert embedding.pattern == hprime
        assert is_induced_copy(blowup.host, hprime, embedding.mapping, coloring, 0)
        assert is_blowup_of(hprime, pattern, 2) is not None
        assert trace.surviving_bad_events == 0

    def test_budget_exhausted(self):
        """Test edgeless blocks: every draw is bad"""
        blowup = construct_blowup(EDGE, [2, 2], lambda u, v, a, b: [0] * a)
        coloring = EdgeColoring(blowup.host, {}, 1)
        hstar, gstar = embedding_graphs(coloring, 0, EDGE, blowup.parts)
        embedding, trace = lll_blowup_embed(
            EDGE, EDGE, 1, hstar, gstar, blowup.parts, params(s_star=2), max_resample=5
        )
        assert embedding is None
        assert trace.resamples == 5
        assert trace.surviving_bad_events == 1
        assert trace.failure_reason == "resample budget exhausted"

    def test_deterministic(self):
        """Test that a seed fixes the outcome"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [2, 4], one_good_column)
        args = (EDGE, EDGE, 1, hstar, gstar, blowup.parts, params(s_star=2))
        assert lll_blowup_embed(*args, seed=11) == lll_blowup_embed(*args, seed=11)

    def test_blocks_must_fit(self):
        """Test that Y_b must hold w disjoint blocks of size s*"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [4, 4])
        with pytest.raises(InvalidInputError):
            lll_blowup_embed(
                EDGE, EDGE, 2, hstar, gstar, blowup.parts, params(s_star=3)
            )

    def test_side_must_cross_edges(self):
        """Test an A side that contains both ends of an edge"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [2, 2])
        with pytest.raises(InvalidInputError):
            lll_blowup_embed(
                EDGE,
                EDGE,
                1,
                hstar,
                gstar,
                blowup.parts,
                params(s_star=2),
                a_side=[0, 1],
            )


class TestBadEventAudit:
    def test_complete_blocks_never_bad(self):
        """Test zero frequency on complete blocks"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [4, 4])
        audit = audit_bad_events(
            EDGE, EDGE, 1, hstar, gstar, blowup.parts, params(L=1), samples=200
        )
        assert audit.frequencies == {"0": 0.0}
        assert audit.bound == 0.25
        assert audit.within_bound

    def test_half_of_draws_bad(self):
        """Test one bad vertex out of a block of two"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [2, 4], one_good_column)
        audit = audit_bad_events(
            EDGE,
            EDGE,
            1,
            hstar,
            gstar,
            blowup.parts,
            params(s_star=2, L=1),
            samples=1000,
        )
        assert audit.frequencies["0"] == pytest.approx(0.5, abs=0.1)
        assert audit.bound == 0.5

    def test_needs_samples(self):
        """Test samples=0"""
        blowup, _, hstar, gstar = setup(EDGE, EDGE, [2, 2])
        with pytest.raises(InvalidInputError):
            audit_bad_events(
                EDGE, EDGE, 1, hstar, gstar, blowup.parts, params(), samples=0
            )
