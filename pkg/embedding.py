"""
Induced embedding into cleaned blowups

The greedy embedder places the pattern one vertex at a time, keeping for every
unplaced vertex the set of host vertices still compatible with all choices so
far. The blowup embedder handles w-blowups of bipartite patterns: it draws the
B-side images at random and resamples Moser-Tardos style until every A-side
vertex has enough valid images, then picks those greedily.

H* and G* live on host labels; `parts[v]` is the (trimmed) part of base vertex
v and `copy[u]` the base vertex that pattern vertex u sits on.
"""

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from errors import InvalidInputError, InvariantViolation
from graph_core import (
    EdgeColoring,
    Embedding,
    Graph,
    bfs_order,
    bipartition,
    check_blowup_map,
    complete_blowup,
    is_blowup_of,
    is_induced_copy,
    iter_bits,
    lowest_bit,
    mask_of,
    popcount,
    to_fraction,
)
from models import (
    BadEventAudit,
    EmbedParams,
    EmbedTrace,
    FeasibilityReport,
    LawViolation,
)
from rng import make_rng
from settings import BLOWUP_SEARCH_CAP, get_logger, stage_timer

logger = get_logger("embedding")

_DECIMAL_PRECISION = 40


def _fmt(x: Decimal) -> str:
    return f"{x:.25g}"


def feasibility_check(params: EmbedParams) -> FeasibilityReport:
    """
    Evaluate both embedding hypotheses

    The greedy inequality s*(rho/2)^k (1-2p)^Delta > Delta*L + k*L' is decided
    in exact rationals, with (1-2p) clamped at 0. The local lemma inequality
    w*Delta*L/s* <= 1/(e(w*Delta^2+1)) involves e and is decided in 40-digit
    decimals; it is only evaluated when w is set.
    """
    factor = max(Fraction(0), 1 - 2 * params.p)
    lhs = params.s_star * (params.rho / 2) ** params.k * factor**params.delta
    rhs = params.delta * params.L + params.k * params.L_prime
    report = FeasibilityReport(
        greedy_holds=lhs > rhs, greedy_lhs=lhs, greedy_rhs=rhs, greedy_slack=lhs - rhs
    )
    if params.w is None:
        return report

    lll_lhs = params.w * params.delta * params.L / params.s_star
    with localcontext() as ctx:
        ctx.prec = _DECIMAL_PRECISION
        left = Decimal(lll_lhs.numerator) / Decimal(lll_lhs.denominator)
        right = 1 / (Decimal(1).exp() * (params.w * params.delta**2 + 1))
        report.lll_holds = left <= right
        report.lll_lhs = str(lll_lhs)
        report.lll_rhs = _fmt(right)
        report.lll_slack = _fmt(right - left)
    return report


def theory_eta(rho, k: int, p, delta: int) -> Fraction:
    """eta = (rho/2)^k (1-2p)^Delta / (Delta+k); L = L' = eta*s* makes the greedy
    inequality tight"""
    if delta + k <= 0:
        raise InvalidInputError("Delta + k must be positive")
    rho, p = to_fraction(rho), to_fraction(p)
    return (rho / 2) ** k * max(Fraction(0), 1 - 2 * p) ** delta / (delta + k)


def embedding_graphs(
    coloring: EdgeColoring,
    color: int,
    pattern: Graph,
    parts: Sequence[Sequence[int]],
    copy: Optional[Sequence[int]] = None,
) -> Tuple[Graph, Graph]:
    """
    H* and G* for a monochromatic copy of the pattern in the auxiliary coloring

    G* is the host induced on the union of all parts; H* keeps only the edges of
    `color` between the parts of pattern edges.
    """
    host = coloring.graph
    copy = tuple(range(pattern.n)) if copy is None else tuple(copy)
    part_masks = [mask_of(part) for part in parts]
    keep = mask_of(v for part in parts for v in part)
    gstar = Graph(
        host.n, [row & keep if keep >> v & 1 else 0 for v, row in enumerate(host.adj)]
    )

    colored = coloring.color_adj[color]
    adj = [0] * host.n
    for u, v in pattern.edges():
        a, b = copy[u], copy[v]
        for x in parts[a]:
            adj[x] |= colored[x] & part_masks[b]
        for y in parts[b]:
            adj[y] |= colored[y] & part_masks[a]
    return Graph(host.n, adj), gstar


def _check_structure(
    pattern: Graph,
    base: Graph,
    hstar: Graph,
    gstar: Graph,
    parts: Sequence[Sequence[int]],
    copy: Optional[Sequence[int]],
) -> Tuple[Tuple[int, ...], List[int]]:
    # Returns the copy map and one mask per base part
    copy = tuple(range(pattern.n)) if copy is None else tuple(copy)
    if len(copy) != pattern.n or len(set(copy)) != pattern.n:
        raise InvalidInputError("copy must map pattern vertices injectively")
    if any(not 0 <= a < base.n for a in copy):
        raise InvalidInputError(f"copy leaves the base graph: {list(copy)}")
    bad = [(u, v) for u, v in pattern.edges() if not base.has_edge(copy[u], copy[v])]
    if bad:
        raise InvalidInputError(f"pattern edges {bad[:5]} do not map to base edges")
    if len(parts) != base.n:
        raise InvalidInputError(f"expected {base.n} parts, got {len(parts)}")
    if hstar.n != gstar.n:
        raise InvalidInputError("H* and G* must share a vertex set")
    if any(row & ~grow for row, grow in zip(hstar.adj, gstar.adj)):
        raise InvalidInputError("H* is not a subgraph of G*")

    masks = [mask_of(part) for part in parts]
    union = 0
    for v, m in enumerate(masks):
        if m & union:
            raise InvalidInputError(f"part {v} overlaps an earlier part")
        if m >> gstar.n:
            raise InvalidInputError(f"part {v} leaves the host")
        union |= m

    # G* edges inside the parts must follow base edges
    for a, m in enumerate(masks):
        allowed = 0
        for b in iter_bits(base.adj[a]):
            allowed |= masks[b]
        for x in iter_bits(m):
            stray = gstar.adj[x] & union & ~allowed
            if stray:
                raise InvalidInputError(
                    f"G* edge {x}-{lowest_bit(stray)} does not follow the base graph",
                    {"part": a},
                )

    # H* edges between image parts must follow pattern edges
    image = 0
    for a in copy:
        image |= masks[a]
    for u in range(pattern.n):
        allowed = 0
        for v in iter_bits(pattern.adj[u]):
            allowed |= masks[copy[v]]
        for x in iter_bits(masks[copy[u]]):
            stray = hstar.adj[x] & image & ~allowed
            if stray:
                raise InvalidInputError(
                    f"H* edge {x}-{lowest_bit(stray)} does not follow the pattern",
                    {"pattern_vertex": u},
                )
    return copy, masks


def _law_bound(params: EmbedParams, joined: int, avoided: int) -> Fraction:
    factor = max(Fraction(0), 1 - 2 * params.p)
    return params.s_star * (params.rho / 2) ** joined * factor**avoided


def greedy_induced_embed(
    pattern: Graph,
    base: Graph,
    hstar: Graph,
    gstar: Graph,
    parts: Sequence[Sequence[int]],
    params: EmbedParams,
    copy: Optional[Sequence[int]] = None,
    order: Optional[Sequence[int]] = None,
    hypotheses_certified: bool = False,
    color: Optional[int] = None,
) -> Tuple[Optional[Embedding], EmbedTrace]:
    """
    Greedy induced embedding of the pattern into H* and G* at once

    Every unplaced vertex v_i keeps a candidate set inside its part, cut down to
    N_H*(x_j) for earlier pattern neighbours and to the complement of N_G*(x_j)
    for earlier base neighbours that are not pattern neighbours. At each step
    the lowest-index candidate outside every bad set is taken; a bad candidate
    would shrink some later set below rho/2 (pattern neighbours) or 1-2p (base
    non-pattern neighbours) of its size. If every candidate is bad the lowest
    one is taken anyway and the step is recorded as a fallback.

    Every later set is checked against s*(rho/2)^j (1-2p)^a after j joins and
    a avoids. With the regularity certificates and the degree and part-size
    bounds in hand, a drop below it before the first fallback raises
    InvariantViolation; otherwise it is only recorded. Whether the greedy
    inequality holds is reported separately by feasibility_check.

    Args:
        pattern: Pattern H, vertex u sits on base vertex copy[u]
        base: Base graph G
        hstar: Graph H* on host labels
        gstar: Graph G* on host labels, containing H*
        parts: Part of each base vertex
        params: s*, L, L', p, rho, k, Delta
        copy: Pattern to base map, identity by default
        order: Embedding order, breadth-first from vertex 0 by default
        hypotheses_certified: Regularity certificates of G* and H* hold
        color: Color recorded on the returned embedding

    Returns:
        The verified embedding (None on failure) and the step-by-step trace
    """
    copy, masks = _check_structure(pattern, base, hstar, gstar, parts, copy)
    h = pattern.n
    order = bfs_order(pattern) if order is None else list(order)
    if sorted(order) != list(range(h)):
        raise InvalidInputError(f"order must be a permutation of 0..{h - 1}")

    certified = (
        hypotheses_certified
        and pattern.max_degree <= params.k
        and base.max_degree <= params.delta
        and all(len(parts[a]) >= params.s_star for a in copy)
    )
    trace = EmbedTrace(
        algorithm="greedy",
        order=order,
        hypotheses_certified=certified,
        law_enforced=certified,
    )

    position = {v: i for i, v in enumerate(order)}
    vertex = order
    # Relation of order positions: 1 pattern edge, 2 base edge only, 0 neither
    relation = [[0] * h for _ in range(h)]
    for i in range(h):
        for j in range(h):
            if pattern.has_edge(vertex[i], vertex[j]):
                relation[i][j] = 1
            elif base.has_edge(copy[vertex[i]], copy[vertex[j]]):
                relation[i][j] = 2

    candidates = [masks[copy[v]] for v in vertex]
    joined = [0] * h
    avoided = [0] * h
    chosen: List[int] = []
    trace.candidate_sizes.append([popcount(m) for m in candidates])

    with stage_timer("embed.greedy"):
        for t in range(h):
            pool = candidates[t]
            if not pool:
                trace.chosen = chosen
                trace.failure_step = t
                trace.failure_reason = (
                    f"no candidate left for pattern vertex {vertex[t]}"
                )
                logger.info("greedy embedding failed at step %d", t)
                return None, trace

            bad = 0
            for i in range(t + 1, h):
                size = popcount(candidates[i])
                for x in iter_bits(pool):
                    if relation[t][i] == 1:
                        kept = popcount(hstar.adj[x] & candidates[i])
                        if 2 * kept < params.rho * size:
                            bad |= 1 << x
                    elif relation[t][i] == 2:
                        kept = size - popcount(gstar.adj[x] & candidates[i])
                        if kept < (1 - 2 * params.p) * size:
                            bad |= 1 << x
            trace.bad_set_sizes.append(popcount(bad))
            good = pool & ~bad
            if not good:
                trace.fallback_steps.append(t)
                trace.law_enforced = False
                good = pool
            x = lowest_bit(good)

            for j in range(t):
                if relation[t][j] == 0 and gstar.has_edge(x, chosen[j]):
                    raise InvariantViolation(
                        f"chosen vertex {x} is adjacent to {chosen[j]} "
                        "across a base non-edge"
                    )
            chosen.append(x)

            for i in range(t + 1, h):
                if relation[t][i] == 1:
                    candidates[i] &= hstar.adj[x]
                    joined[i] += 1
                elif relation[t][i] == 2:
                    candidates[i] &= ~gstar.adj[x]
                    avoided[i] += 1
                size = popcount(candidates[i])
                bound = _law_bound(params, joined[i], avoided[i])
                if size < bound:
                    violation = LawViolation(step=t, i=i, size=size, bound=bound)
                    trace.law_violations.append(violation)
                    if trace.law_enforced:
                        raise InvariantViolation(
                            "candidate set fell below its lower bound under certified"
                            " hypotheses",
                            violation.model_dump(mode="json"),
                        )
            trace.candidate_sizes.append(
                [None] * (t + 1) + [popcount(m) for m in candidates[t + 1 :]]
            )

    trace.chosen = chosen
    mapping = tuple(chosen[position[u]] for u in range(h))
    embedding = Embedding(pattern, gstar, mapping, color)
    if not (
        is_induced_copy(gstar, pattern, mapping)
        and is_induced_copy(hstar, pattern, mapping)
    ):
        raise InvariantViolation(
            "greedy embedding is not an induced copy in H* and G*",
            {"mapping": list(mapping)},
        )
    logger.debug(
        "greedy embedding %s with %d fallbacks", mapping, len(trace.fallback_steps)
    )
    return embedding, trace


@dataclass
class _BlowupEvents:
    """Random variables and bad events of the blowup embedding"""

    hprime: Graph
    fibers: Tuple[int, ...]
    a_vertices: List[int]
    b_vertices: List[int]
    domains: Dict[int, Tuple[int, ...]]
    part_of: Dict[int, int]
    neighbours: Dict[int, List[int]]
    avoid: Dict[int, List[int]]
    variables: Dict[int, List[int]]
    hstar: Graph
    gstar: Graph
    w: int

    def sample(self, rng, ys: Dict[int, int], which: Sequence[int]) -> None:
        for beta in which:
            domain = self.domains[beta]
            ys[beta] = domain[int(rng.integers(len(domain)))]

    def valid_images(self, alpha: int, ys: Dict[int, int]) -> int:
        mask = self.part_of[alpha]
        for beta in self.neighbours[alpha]:
            mask &= self.hstar.adj[ys[beta]]
        for beta in self.avoid[alpha]:
            mask &= ~self.gstar.adj[ys[beta]]
        return mask

    def bad_events(self, ys: Dict[int, int]) -> List[int]:
        return [
            alpha
            for alpha in self.a_vertices
            if popcount(self.valid_images(alpha, ys)) < self.w
        ]


def _blowup_events(
    pattern: Graph,
    base: Graph,
    w: int,
    hstar: Graph,
    gstar: Graph,
    parts: Sequence[Sequence[int]],
    params: EmbedParams,
    copy: Optional[Sequence[int]],
    a_side: Optional[Sequence[int]],
    hprime: Optional[Graph],
    fibers: Optional[Sequence[int]],
) -> _BlowupEvents:
    if w < 1:
        raise InvalidInputError(f"w must be positive, got {w}")
    copy, masks = _check_structure(pattern, base, hstar, gstar, parts, copy)
    A = set(bipartition(base)[0] if a_side is None else a_side)
    if any(not (a in A) ^ (b in A) for a, b in base.edges()):
        raise InvalidInputError("every base edge must cross the side A")

    if hprime is None:
        hprime, fibers = complete_blowup(pattern, w)
    elif fibers is None or not check_blowup_map(hprime, pattern, fibers, w):
        raise InvalidInputError(
            "hprime needs a fiber map onto the pattern with fibers <= w"
        )
    fibers = tuple(fibers)

    s_star = params.s_star
    rank: Dict[int, int] = {}
    seen: Dict[int, int] = {}
    for v, u in enumerate(fibers):
        rank[v] = seen.get(u, 0)
        seen[u] = rank[v] + 1

    a_vertices = [v for v in range(hprime.n) if copy[fibers[v]] in A]
    b_vertices = [v for v in range(hprime.n) if copy[fibers[v]] not in A]
    domains: Dict[int, Tuple[int, ...]] = {}
    for beta in b_vertices:
        part = sorted(parts[copy[fibers[beta]]])
        if len(part) < w * s_star:
            raise InvalidInputError(
                f"part of base vertex {copy[fibers[beta]]} has {len(part)} vertices,"
                f" {w} disjoint blocks of size {s_star} need {w * s_star}"
            )
        i = rank[beta]
        domains[beta] = tuple(part[i * s_star : (i + 1) * s_star])

    neighbours: Dict[int, List[int]] = {}
    avoid: Dict[int, List[int]] = {}
    variables: Dict[int, List[int]] = {}
    for alpha in a_vertices:
        a = copy[fibers[alpha]]
        near = [beta for beta in b_vertices if base.has_edge(a, copy[fibers[beta]])]
        neighbours[alpha] = [beta for beta in near if hprime.has_edge(alpha, beta)]
        avoid[alpha] = [beta for beta in near if not hprime.has_edge(alpha, beta)]
        variables[alpha] = near

    return _BlowupEvents(
        hprime=hprime,
        fibers=fibers,
        a_vertices=a_vertices,
        b_vertices=b_vertices,
        domains=domains,
        part_of={alpha: masks[copy[fibers[alpha]]] for alpha in a_vertices},
        neighbours=neighbours,
        avoid=avoid,
        variables=variables,
        hstar=hstar,
        gstar=gstar,
        w=w,
    )


def lll_blowup_embed(
    pattern: Graph,
    base: Graph,
    w: int,
    hstar: Graph,
    gstar: Graph,
    parts: Sequence[Sequence[int]],
    params: EmbedParams,
    copy: Optional[Sequence[int]] = None,
    a_side: Optional[Sequence[int]] = None,
    hprime: Optional[Graph] = None,
    fibers: Optional[Sequence[int]] = None,
    seed: int = 0,
    max_resample: int = 1000,
    hypotheses_certified: bool = False,
    color: Optional[int] = None,
) -> Tuple[Optional[Embedding], EmbedTrace]:
    """
    Embed a w-blowup of a bipartite pattern by Moser-Tardos resampling

    Every B-side vertex (b, i) of H' draws its image from the i-th block of s*
    vertices of Y_b. An A-side vertex (a, j) is bad when fewer than w vertices
    of X_a are adjacent in H* to all its H'-neighbours and non-adjacent in G*
    to the other draws over N_G(a). The lowest bad event has its variables
    redrawn until none is bad; then the A-side images are picked greedily,
    distinct within each part, fiber index order.

    Args:
        pattern: Bipartite pattern H on base vertices copy[u]
        base: Bipartite base G
        w: Blowup width
        hstar: Graph H* on host labels
        gstar: Graph G* on host labels, containing H*
        parts: Part of each base vertex
        params: Only s* is used by the sampler; the rest feeds the certificate flag
        copy: Pattern to base map, identity by default
        a_side: Side A of the base; defaults to its BFS bipartition's first side
        hprime: The w-blowup to embed; the complete w-blowup by default
        fibers: Fiber map hprime -> pattern, required with hprime
        seed: Root seed of the sampler
        max_resample: Resampling budget
        hypotheses_certified: Certificates of G* and H* hold
        color: Color recorded on the returned embedding

    Returns:
        The verified embedding of H' (None on failure) and the trace
    """
    events = _blowup_events(
        pattern, base, w, hstar, gstar, parts, params, copy, a_side, hprime, fibers
    )
    trace = EmbedTrace(
        algorithm="lll",
        order=events.a_vertices + events.b_vertices,
        hypotheses_certified=hypotheses_certified,
    )

    rng = make_rng(seed, "lll-embed")
    ys: Dict[int, int] = {}
    events.sample(rng, ys, events.b_vertices)
    with stage_timer("embed.lll"):
        bad = events.bad_events(ys)
        while bad:
            alpha = bad[0]
            if not events.variables[alpha]:
                trace.failure_reason = f"bad event {alpha} depends on no random draw"
                break
            if trace.resamples >= max_resample:
                trace.failure_reason = "resample budget exhausted"
                break
            events.sample(rng, ys, events.variables[alpha])
            trace.resamples += 1
            bad = events.bad_events(ys)

    trace.surviving_bad_events = len(bad)
    trace.t_set_sizes = {
        str(alpha): popcount(events.valid_images(alpha, ys))
        for alpha in events.a_vertices
    }
    if bad:
        logger.info(
            "blowup embedding stopped after %d resamples with %d bad events",
            trace.resamples,
            len(bad),
        )
        return None, trace

    mapping = [-1] * events.hprime.n
    for beta in events.b_vertices:
        mapping[beta] = ys[beta]
    used = 0
    for alpha in events.a_vertices:
        free = events.valid_images(alpha, ys) & ~used
        if not free:
            trace.failure_reason = f"no unused valid image left for {alpha}"
            return None, trace
        mapping[alpha] = lowest_bit(free)
        used |= 1 << mapping[alpha]
    trace.chosen = mapping

    hp = events.hprime
    mapping = tuple(mapping)
    if not (
        is_induced_copy(gstar, hp, mapping) and is_induced_copy(hstar, hp, mapping)
    ):
        raise InvariantViolation(
            "blowup embedding is not an induced copy in H* and G*",
            {"mapping": list(mapping)},
        )
    if hp.n <= BLOWUP_SEARCH_CAP:
        blown = is_blowup_of(hp, pattern, w) is not None
    else:
        blown = check_blowup_map(hp, pattern, events.fibers, w)
    if not blown:
        raise InvariantViolation("embedded graph is not a w-blowup of the pattern")
    logger.debug("blowup embedding after %d resamples", trace.resamples)
    return Embedding(hp, gstar, mapping, color), trace


def audit_bad_events(
    pattern: Graph,
    base: Graph,
    w: int,
    hstar: Graph,
    gstar: Graph,
    parts: Sequence[Sequence[int]],
    params: EmbedParams,
    copy: Optional[Sequence[int]] = None,
    a_side: Optional[Sequence[int]] = None,
    hprime: Optional[Graph] = None,
    fibers: Optional[Sequence[int]] = None,
    samples: int = 1000,
    seed: int = 0,
) -> BadEventAudit:
    """
    Empirical frequency of each bad event over independent full draws

    The bound is w*Delta*L/s* (capped at 1); within_bound compares the largest
    frequency against bound + 3 sigma with sigma the binomial standard
    deviation of a frequency at the bound.
    """
    if samples < 1:
        raise InvalidInputError("at least one sample is needed")
    events = _blowup_events(
        pattern, base, w, hstar, gstar, parts, params, copy, a_side, hprime, fibers
    )
    counts = {alpha: 0 for alpha in events.a_vertices}
    rng = make_rng(seed, "bad-event-audit")
    ys: Dict[int, int] = {}
    for _ in range(samples):
        events.sample(rng, ys, events.b_vertices)
        for alpha in events.bad_events(ys):
            counts[alpha] += 1

    bound = float(min(Fraction(1), w * params.delta * params.L / params.s_star))
    sigma = math.sqrt(bound * (1 - bound) / samples)
    frequencies = {str(alpha): c / samples for alpha, c in counts.items()}
    highest = max(frequencies.values(), default=0.0)
    return BadEventAudit(
        samples=samples,
        frequencies=frequencies,
        max_frequency=highest,
        bound=bound,
        sigma=sigma,
        within_bound=highest <= bound + 3 * sigma,
    )
