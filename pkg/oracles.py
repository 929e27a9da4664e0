"""
Brute-force ground truth

Copy search by backtracking over bitmaps, exhaustive arrow decisions over all
q-colorings or all dense edge subsets, a desk-scale search for Ramsey hosts and
the degree pruning of a host.
"""

from fractions import Fraction
from itertools import combinations, product
from math import ceil, comb
from typing import List, Optional, Sequence, Tuple, Union

from errors import BudgetExceededError, InvalidInputError
from gadgets import sample_gnp
from graph_core import (
    EdgeColoring,
    Graph,
    complete_bipartite_graph,
    complete_graph,
    coloring_to_model,
    graph_from_model,
    graph_to_model,
    induced_subgraph,
    iter_bits,
    popcount,
    to_fraction,
)
from models import (
    ArrowQuery,
    ArrowResult,
    CopyMode,
    DegreePruneReport,
    HostSearchEntry,
    HostSearchResult,
)
from rng import derive_seed, make_rng
from settings import ARROWS_BUDGET, get_logger, stage_timer
from workers import map_ordered

logger = get_logger("oracles")

Mode = Union[CopyMode, str]


class _Matcher:
    """Backtracking search for one pattern, reusable across host colorings"""

    def __init__(self, pattern: Graph, induced: bool):
        self.pattern = pattern
        self.induced = induced
        order: List[int] = []
        placed = 0
        remaining = set(range(pattern.n))
        while remaining:
            # Most placed neighbours first, then highest degree, then lowest index
            v = max(
                remaining,
                key=lambda u: (
                    popcount(pattern.adj[u] & placed),
                    pattern.degree(u),
                    -u,
                ),
            )
            order.append(v)
            placed |= 1 << v
            remaining.remove(v)
        self.order = order
        self.joined = []
        self.apart = []
        for i, v in enumerate(order):
            before = order[:i]
            self.joined.append([u for u in before if pattern.has_edge(u, v)])
            self.apart.append([u for u in before if not pattern.has_edge(u, v)])

    def find(
        self, edge_adj: Sequence[int], host_adj: Sequence[int]
    ) -> Optional[Tuple[int, ...]]:
        """
        Injective map with pattern edges onto `edge_adj` edges

        In induced mode pattern non-edges must also be non-edges of `host_adj`.
        """
        n = len(host_adj)
        pattern = self.pattern
        if pattern.n > n:
            return None
        eligible = []
        for v in range(pattern.n):
            need = pattern.degree(v)
            eligible.append(
                sum(1 << x for x in range(n) if popcount(edge_adj[x]) >= need)
            )
        mapping = [-1] * pattern.n
        used = 0

        def extend(i: int) -> bool:
            nonlocal used
            if i == len(self.order):
                return True
            v = self.order[i]
            candidates = eligible[v] & ~used
            for u in self.joined[i]:
                candidates &= edge_adj[mapping[u]]
            if self.induced:
                for u in self.apart[i]:
                    candidates &= ~host_adj[mapping[u]]
            for x in iter_bits(candidates):
                mapping[v] = x
                used |= 1 << x
                if extend(i + 1):
                    return True
                used &= ~(1 << x)
            mapping[v] = -1
            return False

        return tuple(mapping) if extend(0) else None


def find_copy(
    host: Graph,
    pattern: Graph,
    mode: Mode = CopyMode.SUBGRAPH,
    coloring: Optional[EdgeColoring] = None,
    color: Optional[int] = None,
) -> Optional[Tuple[int, ...]]:
    """
    Find a copy of `pattern` in `host`

    Args:
        host: Host graph
        pattern: Pattern graph
        mode: subgraph, or induced to also enforce non-edges
        coloring: Restrict pattern edges to one color class of this coloring
        color: The class to use; with a coloring and no color every class is tried

    Returns:
        Host vertex of each pattern vertex, or None when there is no copy
    """
    mode = CopyMode(mode)
    matcher = _Matcher(pattern, mode == CopyMode.INDUCED)
    if coloring is None:
        return matcher.find(host.adj, host.adj)
    if coloring.graph != host:
        raise InvalidInputError("coloring must color the host")
    colors = range(coloring.q) if color is None else [color]
    for c in colors:
        if not 0 <= c < coloring.q:
            raise InvalidInputError(f"color {c} is outside 0..{coloring.q - 1}")
        found = matcher.find(coloring.color_adj[c], host.adj)
        if found is not None:
            return found
    return None


def _scan_colorings(task) -> Tuple[int, Optional[Tuple[int, ...]]]:
    # Colorings extending one prefix, stopping at the first without a monochromatic copy
    host_adj, edges, pattern_adj, q, induced, prefix = task
    matcher = _Matcher(Graph(len(pattern_adj), pattern_adj), induced)
    n = len(host_adj)
    checked = 0
    for suffix in product(range(q), repeat=len(edges) - len(prefix)):
        values = prefix + suffix
        checked += 1
        classes = [[0] * n for _ in range(q)]
        for (u, v), c in zip(edges, values):
            classes[c][u] |= 1 << v
            classes[c][v] |= 1 << u
        if all(matcher.find(cls, host_adj) is None for cls in classes):
            return checked, values
    return checked, None


def arrows(
    host: Graph, pattern: Graph, q: int, mode: Mode = CopyMode.SUBGRAPH, jobs: int = 1
) -> ArrowResult:
    """
    Decide whether every q-coloring of the host has a monochromatic copy

    The first edge is always colored 0. The remaining colorings are split by a
    prefix into ordered jobs, so the counterexample is the lexicographically
    first one whatever the job count.

    Args:
        host: Host graph
        pattern: Pattern graph
        q: Number of colors
        mode: subgraph or induced copies
        jobs: Worker processes

    Returns:
        ArrowResult with a counterexample coloring when the arrow fails
    """
    mode = CopyMode(mode)
    if q < 1:
        raise InvalidInputError(f"color count must be positive, got {q}")
    edges = host.edges()
    required = q ** max(0, len(edges) - 1)
    if required > ARROWS_BUDGET:
        raise BudgetExceededError(
            "arrows coloring enumeration", required, ARROWS_BUDGET
        )

    fixed = 1 if edges else 0
    split = 0
    if jobs > 1:
        while split < len(edges) - fixed and q**split < 4 * jobs:
            split += 1
    head = (0,) * fixed
    tasks = [
        (host.adj, edges, pattern.adj, q, mode == CopyMode.INDUCED, head + prefix)
        for prefix in product(range(q), repeat=split)
    ]

    checked = 0
    counterexample = None
    with stage_timer("oracles.arrows"):
        if jobs > 1:
            results = map_ordered(_scan_colorings, tasks, jobs=jobs)
        else:
            results = []
            for task in tasks:
                results.append(_scan_colorings(task))
                if results[-1][1] is not None:
                    break
        for count, found in results:
            checked += count
            if found is not None:
                counterexample = found
                break

    logger.debug("arrows %r -> %r: %d colorings checked", host, pattern, checked)
    result = ArrowResult(
        arrows=counterexample is None, mode=mode, q=q, colorings_checked=checked
    )
    if counterexample is not None:
        coloring = EdgeColoring.from_sequence(host, counterexample, q)
        result.counterexample = coloring_to_model(coloring)
    return result


def arrows_density(
    host: Graph, pattern: Graph, gamma, mode: Mode = CopyMode.SUBGRAPH
) -> ArrowResult:
    """
    Decide whether every subgraph with at least gamma*e(host) edges has a copy

    Both modes are monotone under edge deletion, so only subgraphs with exactly
    ceil(gamma*e(host)) edges are enumerated. In induced mode a copy on S must
    be induced in the host as well as in the subgraph.
    """
    mode = CopyMode(mode)
    gamma = to_fraction(gamma)
    if not 0 < gamma <= 1:
        raise InvalidInputError(f"gamma must lie in (0, 1], got {gamma}")
    edges = host.edges()
    floor = ceil(gamma * len(edges))
    required = comb(len(edges), floor)
    if required > ARROWS_BUDGET:
        raise BudgetExceededError("dense subgraph enumeration", required, ARROWS_BUDGET)

    matcher = _Matcher(pattern, mode == CopyMode.INDUCED)
    checked = 0
    result = ArrowResult(arrows=True, mode=mode, gamma=gamma, colorings_checked=0)
    with stage_timer("oracles.arrows_density"):
        for chosen in combinations(edges, floor):
            checked += 1
            adj = [0] * host.n
            for u, v in chosen:
                adj[u] |= 1 << v
                adj[v] |= 1 << u
            if matcher.find(adj, host.adj) is None:
                result.arrows = False
                result.counterexample_subgraph = graph_to_model(Graph(host.n, adj))
                break
    result.colorings_checked = checked
    return result


def arrows_query(query: ArrowQuery, jobs: int = 1) -> ArrowResult:
    """Dispatch an ArrowQuery to the coloring or the density arrow"""
    host = graph_from_model(query.host)
    pattern = graph_from_model(query.pattern)
    if query.gamma is not None:
        return arrows_density(host, pattern, query.gamma, query.mode)
    if query.q is None:
        raise InvalidInputError("an arrow query needs q or gamma")
    return arrows(host, pattern, query.q, query.mode, jobs=jobs)


def _cap_degrees(g: Graph, cap: Optional[int]) -> Graph:
    # Keep edges in lexicographic order while both ends stay under the cap
    if cap is None:
        return g
    adj = [0] * g.n
    for u, v in g.edges():
        if popcount(adj[u]) < cap and popcount(adj[v]) < cap:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
    return Graph(g.n, adj)


def _random_bipartite(m: int, seed: int) -> Graph:
    draws = make_rng(seed, "bipartite-host").random((m, m))
    adj = [0] * (2 * m)
    for i in range(m):
        for j in range(m):
            if draws[i, j] < 0.5:
                adj[i] |= 1 << (m + j)
                adj[m + j] |= 1 << i
    return Graph(2 * m, adj)


def search_host(
    pattern: Graph,
    q: int = 2,
    mode: Mode = CopyMode.SUBGRAPH,
    max_vertices: int = 6,
    degree_cap: Optional[int] = None,
    seeds_per_size: int = 3,
    seed: int = 0,
    bipartite: bool = False,
) -> HostSearchResult:
    """
    First host in the candidate family that arrows the pattern

    Complete graphs come first, by size, then G(n, 1/2) samples cut down to the
    degree cap. In bipartite mode the families are K_{m,m} and random balanced
    bipartite graphs. Every candidate is logged, including those skipped for
    the degree cap or the arrows budget.
    """
    mode = CopyMode(mode)
    result = HostSearchResult()
    smallest = max(2, pattern.n)

    candidates = []
    if bipartite:
        for m in range(1, max_vertices // 2 + 1):
            candidates.append(
                ("complete-bipartite", None, complete_bipartite_graph(m, m))
            )
        for m in range(1, max_vertices // 2 + 1):
            for i in range(seeds_per_size):
                child = derive_seed(seed, "bipartite-host", m, i)
                g = _cap_degrees(_random_bipartite(m, child), degree_cap)
                candidates.append(("random-bipartite", child, g))
    else:
        for n in range(smallest, max_vertices + 1):
            candidates.append(("complete", None, complete_graph(n)))
        for n in range(smallest, max_vertices + 1):
            for i in range(seeds_per_size):
                child = derive_seed(seed, "host", n, i)
                g = _cap_degrees(sample_gnp(n, Fraction(1, 2), child), degree_cap)
                candidates.append(("random", child, g))

    for family, child, g in candidates:
        entry = HostSearchEntry(family=family, n=g.n, edges=g.edge_count, seed=child)
        result.log.append(entry)
        if degree_cap is not None and g.max_degree > degree_cap:
            entry.skipped = "degree cap"
            continue
        try:
            entry.arrows = arrows(g, pattern, q, mode).arrows
        except BudgetExceededError:
            entry.skipped = "budget"
            continue
        if entry.arrows:
            result.found = graph_to_model(g)
            result.family = family
            logger.info("host found: %s on %d vertices", family, g.n)
            break
    return result


def degree_prune_host(
    g0: Graph,
    k: int,
    D: int,
    n: Optional[int] = None,
    pattern: Optional[Graph] = None,
    q: Optional[int] = None,
    mode: Mode = CopyMode.SUBGRAPH,
) -> Tuple[Graph, DegreePruneReport]:
    """
    Keep the vertices of degree at most 4kD, then drop those left isolated

    When a pattern and q are given the pruned host's arrow property is decided
    directly, if the enumeration fits the budget.

    Returns:
        The pruned graph, relabelled in ascending order, and its report
    """
    if k < 0 or D < 0:
        raise InvalidInputError("k and D must be non-negative")
    bound = 4 * k * D
    low = [v for v in range(g0.n) if g0.degree(v) <= bound]
    low_mask = sum(1 << v for v in low)
    kept = [v for v in low if g0.adj[v] & low_mask]
    pruned, labels = induced_subgraph(g0, kept)

    report = DegreePruneReport(
        graph=graph_to_model(pruned),
        kept=list(labels),
        k=k,
        D=D,
        degree_bound=bound,
        max_degree=pruned.max_degree,
    )
    if n is not None:
        report.n = n
        report.vertex_bound = 2 * D * n
        report.within_vertex_bound = pruned.n <= 2 * D * n
    if pattern is not None and q is not None:
        try:
            report.arrows = arrows(pruned, pattern, q, mode).arrows
            report.arrows_checked = True
        except BudgetExceededError:
            report.arrows_checked = False
    return pruned, report
