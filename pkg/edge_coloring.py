"""
Edge colorings: Vizing matching decompositions, local-lemma colorings that
avoid monochromatic bicliques, and adversarial colorings of blowups
"""

import math
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Dict, List, Sequence, Tuple, Union

from errors import (
    BudgetExceededError,
    InvalidInputError,
    InvariantViolation,
    SearchExhaustedError,
)
from graph_core import Blowup, Edge, EdgeColoring, Graph, iter_bits
from models import AdversaryStrategy, BicliqueColoringReport, MatchingsModel
from rng import make_rng
from settings import BICLIQUE_BUDGET, get_logger, stage_timer

logger = get_logger("edge_coloring")

Biclique = Tuple[Tuple[int, ...], Tuple[int, ...]]


@dataclass(frozen=True)
class MatchingDecomposition:
    """Matchings M_Delta..M_0 partitioning E(G); empty classes are dropped"""

    graph: Graph
    matchings: Tuple[Tuple[Edge, ...], ...]

    def to_model(self) -> MatchingsModel:
        return MatchingsModel(
            matchings=[list(m) for m in self.matchings],
            max_degree=self.graph.max_degree,
        )

    def to_coloring(self) -> EdgeColoring:
        """Proper coloring where matching i gets color i"""
        colors = {e: i for i, m in enumerate(self.matchings) for e in m}
        return EdgeColoring(self.graph, colors, max(1, len(self.matchings)))


class _PartialColoring:
    """Mutable proper partial coloring with per-vertex color -> neighbour maps"""

    def __init__(self, n: int):
        self.col: Dict[Edge, int] = {}
        self.at: List[Dict[int, int]] = [{} for _ in range(n)]

    def get(self, u: int, v: int):
        return self.col.get((u, v) if u < v else (v, u))

    def set(self, u: int, v: int, c: int) -> None:
        self.col[(u, v) if u < v else (v, u)] = c
        self.at[u][c] = v
        self.at[v][c] = u

    def unset(self, u: int, v: int) -> int:
        c = self.col.pop((u, v) if u < v else (v, u))
        del self.at[u][c]
        del self.at[v][c]
        return c

    def is_free(self, v: int, c: int) -> bool:
        return c not in self.at[v]

    def free(self, v: int, palette: int) -> int:
        for c in range(palette):
            if c not in self.at[v]:
                return c
        raise InvariantViolation(f"no free color at vertex {v} among {palette}")


def vizing_matchings(g: Graph) -> MatchingDecomposition:
    """
    Proper edge coloring with at most Delta+1 colors, as matchings

    Misra-Gries: for each uncolored edge uv build a maximal fan at u, flip the
    cd-alternating path from u, then rotate the shortest usable fan prefix.
    """
    palette = g.max_degree + 1
    pc = _PartialColoring(g.n)

    for u, v in g.edges():
        fan = [v]
        in_fan = {v}
        neighbours = list(iter_bits(g.adj[u]))
        extended = True
        while extended:
            extended = False
            last = fan[-1]
            for w in neighbours:
                if w in in_fan:
                    continue
                c = pc.get(u, w)
                if c is not None and pc.is_free(last, c):
                    fan.append(w)
                    in_fan.add(w)
                    extended = True
                    break

        c = pc.free(u, palette)
        d = pc.free(fan[-1], palette)

        # Invert the cd path starting at u; it starts with a d edge since c is free at u
        if c != d:
            path = []
            x, follow = u, d
            while follow in pc.at[x]:
                y = pc.at[x][follow]
                path.append((x, y, follow))
                x, follow = y, (c if follow == d else d)
            for x, y, _ in path:
                pc.unset(x, y)
            for x, y, colour in path:
                pc.set(x, y, c if colour == d else d)

        # First w with d free whose prefix is still a fan
        stop = None
        for i, w in enumerate(fan):
            if i > 0:
                prev_color = pc.get(u, w)
                if prev_color is None or not pc.is_free(fan[i - 1], prev_color):
                    break
            if pc.is_free(w, d):
                stop = i
                break
        if stop is None or not pc.is_free(u, d):
            raise InvariantViolation(f"fan rotation failed on edge {u}-{v}")

        for i in range(stop):
            shifted = pc.unset(u, fan[i + 1])
            pc.set(u, fan[i], shifted)
        pc.set(u, fan[stop], d)

    by_color: Dict[int, List[Edge]] = {}
    for e, c in pc.col.items():
        by_color.setdefault(c, []).append(e)
    matchings = tuple(
        tuple(sorted(by_color[c]))
        for c in range(palette - 1, -1, -1)
        if by_color.get(c)
    )
    return MatchingDecomposition(g, matchings)


def is_proper(decomposition: MatchingDecomposition) -> bool:
    """Every class is a matching and the classes partition the edge set"""
    seen = set()
    for m in decomposition.matchings:
        touched = set()
        for u, v in m:
            if u in touched or v in touched or (u, v) in seen:
                return False
            touched.update((u, v))
            seen.add((u, v))
    return seen == set(decomposition.graph.edges())


def biclique_copies(g: Graph, w: int) -> List[Biclique]:
    """
    Every K_{w,w} subgraph (not necessarily induced) as sides (A, B), min A < min B

    Raises:
        BudgetExceededError: when the search visits more than BICLIQUE_BUDGET nodes
    """
    if w < 1:
        raise InvalidInputError(f"biclique side must be positive, got {w}")
    copies: List[Biclique] = []
    steps = 0

    def grow(side: List[int], common: int, start: int) -> None:
        nonlocal steps
        steps += 1
        if steps > BICLIQUE_BUDGET:
            raise BudgetExceededError("biclique enumeration", steps, BICLIQUE_BUDGET)
        if len(side) == w:
            candidates = [y for y in iter_bits(common) if y > side[0]]
            for other in combinations(candidates, w):
                copies.append((tuple(side), other))
                steps += 1
            return
        for x in range(start, g.n):
            narrowed = common & g.adj[x]
            if narrowed.bit_count() >= w:
                side.append(x)
                grow(side, narrowed, x + 1)
                side.pop()

    grow([], g.vertex_mask, 0)
    return copies


def bicliques_through_edge(g: Graph, u: int, v: int, w: int) -> int:
    """Number of K_{w,w} copies through edge uv, with u and v on opposite sides"""
    if not g.has_edge(u, v):
        return 0
    total = 0
    others = [x for x in iter_bits(g.adj[v]) if x != u]
    for rest in combinations(others, w - 1):
        common = g.adj[u]
        for x in rest:
            common &= g.adj[x]
        total += comb((common & ~(1 << v)).bit_count(), w - 1)
    return total


@dataclass(frozen=True)
class LLLInstance:
    """Edge variables, one event per K_{w,w} copy, and the dependency degree bound"""

    variables: Tuple[Edge, ...]
    events: Tuple[Tuple[int, ...], ...]
    dependency_degree: int


def biclique_lll_instance(g: Graph, w: int) -> LLLInstance:
    edges = tuple(g.edges())
    index = {e: i for i, e in enumerate(edges)}
    events = []
    for a_side, b_side in biclique_copies(g, w):
        keys = [(a, b) if a < b else (b, a) for a in a_side for b in b_side]
        events.append(tuple(sorted(index[k] for k in keys)))
    by_edge: Dict[int, List[int]] = {}
    for k, event in enumerate(events):
        for e in event:
            by_edge.setdefault(e, []).append(k)
    degree = 0
    for k, event in enumerate(events):
        neighbours = set()
        for e in event:
            neighbours.update(by_edge[e])
        degree = max(degree, len(neighbours) - 1)
    return LLLInstance(edges, tuple(events), degree)


def _monochromatic(event: Sequence[int], values) -> bool:
    first = values[event[0]]
    return all(values[e] == first for e in event)


def lll_avoid_mono_biclique(
    g: Graph, w: int, max_resample: int = 1000, seed: int = 0
) -> Tuple[EdgeColoring, BicliqueColoringReport]:
    """
    2-coloring with no monochromatic K_{w,w}, by Moser-Tardos resampling

    The lowest-index violated event is resampled each round. The local-lemma
    condition e(D+1)2^(1-w^2) < 1 is reported, not enforced.

    Args:
        g: Host graph
        w: Biclique side
        max_resample: Resampling rounds before giving up
        seed: Root seed

    Returns:
        The coloring and its regime report
    """
    with stage_timer("edge_coloring.lll"):
        instance = biclique_lll_instance(g, w)
        D = instance.dependency_degree
        condition = math.e * (D + 1) * 2.0 ** (1 - w * w)
        in_regime = condition < 1
        if not in_regime:
            logger.info("outside the guaranteed regime: e(D+1)p = %.4g >= 1", condition)

        rng = make_rng(seed, "lll")
        values = [int(x) for x in rng.integers(0, 2, size=len(instance.variables))]
        resamples = 0
        while True:
            violated = next(
                (ev for ev in instance.events if _monochromatic(ev, values)), None
            )
            if violated is None:
                break
            if resamples >= max_resample:
                surviving = sum(_monochromatic(ev, values) for ev in instance.events)
                raise SearchExhaustedError(
                    f"monochromatic K_{{{w},{w}}} copies remain after "
                    f"{resamples} resamples",
                    {"resamples": resamples, "surviving_bad_events": surviving},
                )
            for e, x in zip(violated, rng.integers(0, 2, size=len(violated))):
                values[e] = int(x)
            resamples += 1

        coloring = EdgeColoring(g, dict(zip(instance.variables, values)), 2)
        mono = sum(_monochromatic(ev, values) for ev in instance.events)
        report = BicliqueColoringReport(
            w=w,
            events=len(instance.events),
            dependency_degree=D,
            log2_event_probability=1 - w * w,
            lll_condition_value=condition,
            in_guaranteed_regime=in_regime,
            resamples=resamples,
            monochromatic_copies=mono,
            verified=mono == 0,
            max_degree=g.max_degree,
            theory_degree_bound=2.0 ** (w / 2),
        )
    logger.debug("biclique-free coloring after %d resamples", resamples)
    return coloring, report


def adversary_color(
    b: Blowup, strategy: Union[AdversaryStrategy, str], q: int, seed: int = 0
) -> EdgeColoring:
    """
    Total q-coloring of a blowup host by a named strategy

    uniform-random draws every edge from the seeded stream; per-base-edge-majority
    colors each block by its base edge index; part-index-parity uses the sum of the
    endpoints' positions in their parts; half-split-within-block splits each block
    by row position in the lower base vertex's part.
    """
    try:
        strategy = AdversaryStrategy(strategy)
    except ValueError:
        raise InvalidInputError(f"unknown adversary strategy {strategy!r}") from None
    if q < 1:
        raise InvalidInputError(f"color count must be positive, got {q}")

    host = b.host
    edges = host.edges()
    position = {}
    for part in b.parts:
        for i, x in enumerate(part):
            position[x] = i

    if strategy == AdversaryStrategy.UNIFORM:
        draws = make_rng(seed, "adversary").integers(0, q, size=len(edges))
        values = [int(c) for c in draws]
    elif strategy == AdversaryStrategy.PER_BASE_EDGE_MAJORITY:
        base_index = {e: i for i, e in enumerate(b.base.edges())}
        values = []
        for x, y in edges:
            u, v = sorted((b.phi[x], b.phi[y]))
            values.append(base_index[(u, v)] % q)
    elif strategy == AdversaryStrategy.PART_INDEX_PARITY:
        values = [(position[x] + position[y]) % q for x, y in edges]
    else:
        values = []
        for x, y in edges:
            row = x if b.phi[x] < b.phi[y] else y
            size = len(b.parts[b.phi[row]])
            values.append(position[row] * q // size)

    return EdgeColoring(host, dict(zip(edges, values)), q)
