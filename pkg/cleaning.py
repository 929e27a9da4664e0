"""
Cleaning procedures

Regularity cleaning walks a Vizing matching decomposition of the base graph
and passes, one matching at a time, to subparts whose majority color class is
lower-regular. DRC cleaning walks the stars of one side of a bipartite base
graph and keeps the parts of the other side where every r-tuple has a large
common monochromatic neighbourhood.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import MAX_EMAX, MIN_EMIN, Decimal, Overflow, localcontext
from fractions import Fraction
from itertools import combinations, combinations_with_replacement
from typing import Dict, List, Optional, Sequence, Tuple

from drc import SPOT_CHECKS, simultaneous_drc
from edge_coloring import vizing_matchings
from errors import (
    CleaningError,
    InvalidInputError,
    InvariantViolation,
    SearchExhaustedError,
)
from graph_core import (
    BipartitePair,
    Blowup,
    Edge,
    EdgeColoring,
    Graph,
    bipartition,
    coloring_to_model,
    edge_key,
    iter_bits,
    mask_of,
    to_fraction,
)
from models import (
    CleaningConstants,
    CleaningOutcomeModel,
    NeighborhoodCertificate,
    PairSearchResult,
    RegularityMode,
    RegularityParams,
    RegularityVerdict,
    ShrinkLogEntry,
    SimDrcOutcome,
    TowerLevel,
    VerdictStatus,
)
from regularity import check_regularity, pair_density
from rng import derive_seed, make_rng
from settings import (
    DRC_BAD_TUPLE_BUDGET,
    EXHAUSTIVE_PAIR_SEARCH_BUDGET,
    EXHAUSTIVE_PAIR_SEARCH_CAP,
    get_logger,
    stage_timer,
)

logger = get_logger("cleaning")

# Digits kept by the log-domain constant evaluation
CONSTANT_PRECISION = 50


# Constants
def _dec(x: Fraction) -> Decimal:
    return Decimal(x.numerator) / Decimal(x.denominator)


def _dlog2(x: Fraction) -> Decimal:
    return (Decimal(x.numerator).ln() - Decimal(x.denominator).ln()) / Decimal(2).ln()


def cleaning_constants(q: int, delta: int, p, eta) -> CleaningConstants:
    """
    Shrink factors of matching cleaning and of the full regularity cleaning

    Everything is carried in the log domain. lambda_t = (p/2q)^(13/eps_t) with
    eps_0 = eta and eps_(t+1) = eps_t * lambda_t, so -log2 eps_(t+1) =
    -log2 eps_t + 13c * 2^(-log2 eps_t) where c = log2(2q/p). Levels whose
    exponent no longer fits a Decimal are reported as overflowed.

    Args:
        q: Number of colors
        delta: Maximum degree of the base graph
        p: Lower-regularity density of the blocks
        eta: Target regularity fraction

    Returns:
        CleaningConstants with log2 lambda for one matching and the tower levels
    """
    p, eta = to_fraction(p), to_fraction(eta)
    if q < 1 or delta < 0:
        raise InvalidInputError(f"need q >= 1 and delta >= 0, got q={q}, delta={delta}")
    if not 0 < p <= 1 or eta <= 0:
        raise InvalidInputError(f"need 0 < p <= 1 and eta > 0, got p={p}, eta={eta}")

    with localcontext() as ctx:
        ctx.prec = CONSTANT_PRECISION
        ctx.Emax = MAX_EMAX
        ctx.Emin = MIN_EMIN
        c = _dlog2(Fraction(2 * q) / p)
        inv_eta = _dec(1 / eta)
        log2_matching = -13 * c * inv_eta
        log2_matching_half = -1 - 12 * c * inv_eta
        log2_13c = (13 * c).ln() / Decimal(2).ln()
        ln2 = Decimal(2).ln()

        levels: List[TowerLevel] = []
        terms: List[Decimal] = []
        overflow = False
        E: Optional[Decimal] = -_dlog2(eta)
        for t in range(delta + 1):
            if E is None:
                overflow = True
                levels.append(TowerLevel(t=t, log2_neg_log2_lambda="Infinity"))
                continue
            term = log2_13c + E
            terms.append(term)
            try:
                power = (E * ln2).exp()
                following = E + 13 * c * power
                holds = following <= 14 * c * power
            except Overflow:
                following, holds = None, None
            levels.append(
                TowerLevel(
                    t=t,
                    neg_log2_eps=str(E),
                    log2_neg_log2_lambda=str(term),
                    recursion_holds=holds,
                )
            )
            E = following

        if overflow:
            tower = "Infinity"
        else:
            top = max(terms)
            total = sum(((x - top) * ln2).exp() for x in terms)
            tower = str(top + total.ln() / ln2)

    return CleaningConstants(
        q=q,
        delta=delta,
        p=p,
        eta=eta,
        log2_lambda_matching=float(log2_matching),
        log2_lambda_matching_half=float(log2_matching_half),
        tower=levels,
        log2_neg_log2_lambda_tower=tower,
        tower_overflow=overflow,
    )


# Outcome
@dataclass
class CleaningOutcome:
    """Auxiliary base coloring, trimmed parts and the certificates behind them"""

    kind: str
    aux_coloring: EdgeColoring
    trimmed_parts: Tuple[Tuple[int, ...], ...]
    regularity_certificates: Dict[Edge, RegularityVerdict] = field(default_factory=dict)
    neighborhood_certificates: Dict[int, NeighborhoodCertificate] = field(
        default_factory=dict
    )
    shrink_log: List[ShrinkLogEntry] = field(default_factory=list)
    flags: Dict[str, bool] = field(default_factory=dict)
    constants: Optional[CleaningConstants] = None

    @property
    def all_certified(self) -> bool:
        return all(v.certified for v in self.regularity_certificates.values()) and all(
            c.holds for c in self.neighborhood_certificates.values()
        )

    def to_model(self) -> CleaningOutcomeModel:
        return CleaningOutcomeModel(
            kind=self.kind,
            aux_coloring=coloring_to_model(self.aux_coloring),
            trimmed_parts=[list(p) for p in self.trimmed_parts],
            regularity_certificates={
                edge_key(*e): v for e, v in sorted(self.regularity_certificates.items())
            },
            neighborhood_certificates={
                str(a): c for a, c in sorted(self.neighborhood_certificates.items())
            },
            shrink_log=self.shrink_log,
            all_certified=self.all_certified,
            flags=dict(sorted(self.flags.items())),
            constants=self.constants,
        )


# Lower-regular subpairs
def _ranked(candidates: Sequence[int], adj: Sequence[int], mask: int, tiebreak=None):
    def key(v):
        rank = tiebreak[v] if tiebreak is not None else v
        return (-(adj[v] & mask).bit_count(), rank)

    return sorted(candidates, key=key)


def find_lower_regular_pair(
    b: BipartitePair,
    eps,
    target_size: int,
    p=None,
    seed: int = 0,
    max_attempts: int = 20,
    refute_trials: int = 200,
) -> PairSearchResult:
    """
    Subsets X', Y' of size target_size with G[X', Y'] lower-regular

    The claim certified is (max(1, ceil(eps * target_size)), p)-lower-regularity
    with p defaulting to half the pair density. Attempt 0 takes the highest
    degree vertices, later attempts intersect the neighbourhoods of one or two
    random vertices of X first. If no attempt passes and both sides have at
    most EXHAUSTIVE_PAIR_SEARCH_CAP vertices, every subset pair is tried.

    Raises:
        SearchExhaustedError: no certified subpair was found
    """
    eps = to_fraction(eps)
    if not 1 <= target_size <= min(len(b.X), len(b.Y)):
        raise InvalidInputError(
            f"target size {target_size} outside 1..{min(len(b.X), len(b.Y))}"
        )
    p = pair_density(b) / 2 if p is None else to_fraction(p)
    if p <= 0:
        raise InvalidInputError("pair has no edges, no lower-regular subpair exists")
    params = RegularityParams(
        L=max(1, math.ceil(eps * target_size)), p=p, mode=RegularityMode.LOWER_ONLY
    )
    n = min(len(b.X), len(b.Y))
    theory_size = 0.0
    if eps > 0:
        theory_size = 0.5 * n * float(pair_density(b)) ** (12 / float(eps))
    adj = b.host.adj

    def result(xs, ys, verdict, method, attempts) -> PairSearchResult:
        return PairSearchResult(
            x_subset=sorted(xs),
            y_subset=sorted(ys),
            verdict=verdict,
            method=method,
            attempts=attempts,
            theory_target_size=theory_size,
        )

    for attempt in range(max_attempts):
        if attempt == 0:
            ys = _ranked(b.Y, adj, b.x_mask)[:target_size]
            xs = _ranked(b.X, adj, mask_of(ys))[:target_size]
            method = "greedy"
        else:
            rng = make_rng(seed, "pair-search", attempt)
            size = min(1 + (attempt - 1) % 2, len(b.X))
            picks = rng.choice(len(b.X), size=size, replace=False)
            common = b.y_mask
            for i in picks:
                common &= adj[b.X[int(i)]]
            order = rng.permutation(b.host.n).tolist()
            ranked = _ranked(b.Y, adj, b.x_mask, order)
            ys = sorted(ranked, key=lambda y: not common >> y & 1)[:target_size]
            xs = _ranked(b.X, adj, mask_of(ys), order)[:target_size]
            method = "drc-sample"
        verdict = check_regularity(
            b.restrict(xs, ys),
            params,
            refute_trials,
            derive_seed(seed, "refute", attempt),
        )
        if verdict.status != VerdictStatus.REFUTED:
            return result(xs, ys, verdict, method, attempt + 1)

    largest = max(len(b.X), len(b.Y))
    budget = math.comb(len(b.X), target_size) * math.comb(len(b.Y), target_size)
    exhaustive = (
        largest <= EXHAUSTIVE_PAIR_SEARCH_CAP
        and budget <= EXHAUSTIVE_PAIR_SEARCH_BUDGET
    )
    if exhaustive:
        for xs in combinations(b.X, target_size):
            for ys in combinations(b.Y, target_size):
                verdict = check_regularity(b.restrict(xs, ys), params)
                if verdict.certified:
                    return result(xs, ys, verdict, "exhaustive", max_attempts)

    raise SearchExhaustedError(
        f"no lower-regular {target_size}x{target_size} subpair found",
        {
            "attempts": max_attempts,
            "exhaustive": exhaustive,
            "L": params.L,
            "p": str(p),
        },
    )


# Regularity cleaning
def _majority_color(
    coloring: EdgeColoring, pair: BipartitePair
) -> Tuple[int, List[Fraction]]:
    densities = [pair_density(coloring.class_pair(pair, c)) for c in range(coloring.q)]
    # Ties go to the lower color index
    best = max(range(coloring.q), key=lambda c: (densities[c], -c))
    return best, densities


def _matching_stage(
    matching: Sequence[Edge],
    blowup: Blowup,
    coloring: EdgeColoring,
    parts: List[Tuple[int, ...]],
    p: Fraction,
    q: int,
    L: int,
    target_size: int,
    seed: int,
    max_attempts: int,
    stage: int,
) -> Tuple[Dict[Edge, int], List[Tuple[int, ...]], Dict[Edge, RegularityVerdict]]:
    touched = [v for e in matching for v in e]
    if len(touched) != len(set(touched)):
        raise InvalidInputError(f"edges {sorted(matching)} do not form a matching")
    for u, v in matching:
        if not blowup.base.has_edge(u, v):
            raise InvalidInputError(f"{u}-{v} is not a base edge")

    floor = p / (2 * q)
    eps = Fraction(L, target_size)
    colors: Dict[Edge, int] = {}
    verdicts: Dict[Edge, RegularityVerdict] = {}
    trimmed = [tuple(part[:target_size]) for part in parts]
    for u, v in sorted(matching):
        u, v = min(u, v), max(u, v)
        pair = BipartitePair(blowup.host, parts[u], parts[v])
        color, densities = _majority_color(coloring, pair)
        if densities[color] < floor:
            raise CleaningError(
                f"no color class reaches density p/2q on edge {u}-{v}",
                {
                    "stage": stage,
                    "edge": [u, v],
                    "densities": [str(d) for d in densities],
                },
            )
        try:
            found = find_lower_regular_pair(
                coloring.class_pair(pair, color),
                eps,
                target_size,
                p=p / (4 * q),
                seed=derive_seed(seed, "stage", stage, u, v),
                max_attempts=max_attempts,
            )
        except SearchExhaustedError as e:
            raise CleaningError(
                f"matching stage {stage} failed on edge {u}-{v}",
                {"stage": stage, "edge": [u, v], "color": color, **e.detail},
            ) from e
        colors[(u, v)] = color
        verdicts[(u, v)] = found.verdict
        trimmed[u] = tuple(found.x_subset)
        trimmed[v] = tuple(found.y_subset)
    return colors, trimmed, verdicts


def matching_clean(
    matching: Sequence[Edge],
    blowup: Blowup,
    coloring: EdgeColoring,
    p,
    q: int,
    eta,
    target_size: Optional[int] = None,
    seed: int = 0,
    max_attempts: int = 20,
    stage: int = 0,
) -> CleaningOutcome:
    """
    One cleaning stage over a matching of the base graph

    Each matched edge gets its densest color class (at least p/2q is required)
    and a lower-regular target_size subpair inside it, certified at
    (ceil(eta * target_size), p/4q). Vertices outside the matching keep the
    first target_size vertices of their part. The auxiliary coloring covers
    the matching edges only.
    """
    p, eta = to_fraction(p), to_fraction(eta)
    if coloring.q != q:
        raise InvalidInputError(f"coloring has {coloring.q} colors, expected {q}")
    if target_size is None:
        target_size = max(1, min(blowup.part_sizes, default=1) // 2)
    L = max(1, math.ceil(eta * target_size))
    parts = [tuple(part) for part in blowup.parts]
    with stage_timer("cleaning.matching"):
        colors, trimmed, verdicts = _matching_stage(
            matching,
            blowup,
            coloring,
            parts,
            p,
            q,
            L,
            target_size,
            seed,
            max_attempts,
            stage,
        )
    graph = blowup.base.with_edges(colors)
    return CleaningOutcome(
        kind="matching",
        aux_coloring=EdgeColoring(graph, colors, q),
        trimmed_parts=tuple(trimmed),
        regularity_certificates=verdicts,
        shrink_log=[
            ShrinkLogEntry(
                stage=f"matching {stage}",
                sizes=[len(t) for t in trimmed],
                note=f"{len(colors)} edges",
            )
        ],
    )


def regularity_clean(
    blowup: Blowup,
    coloring: EdgeColoring,
    p,
    q: int,
    eta,
    shrink=Fraction(1, 2),
    seed: int = 0,
    max_attempts: int = 20,
) -> CleaningOutcome:
    """
    Regularity cleaning over a Vizing decomposition M_Delta..M_0

    Stage k shrinks every part to s_k = floor(shrink * s_(k-1)) and cleans the
    edges of the k-th matching at the final scale L = ceil(eta * s_final),
    density p/4q. Every base edge is re-certified on the final parts; a stage
    certificate that fails re-verification is a bug.

    Args:
        blowup: Host blowup; parts should have equal size s
        coloring: q-coloring of the host edges
        p: Lower-regularity density of the gadget blocks
        q: Number of colors
        eta: Target regularity fraction of the final parts
        shrink: Engineering shrink factor per stage, in (0, 1]
        seed: Root seed for the subpair searches
        max_attempts: Search attempts per edge before the exhaustive fallback

    Returns:
        CleaningOutcome with the theoretical constants attached for comparison
    """
    p, eta, shrink = to_fraction(p), to_fraction(eta), to_fraction(shrink)
    if not 0 < shrink <= 1:
        raise InvalidInputError(f"shrink factor must lie in (0, 1], got {shrink}")
    if coloring.q != q or coloring.graph != blowup.host:
        raise InvalidInputError("coloring must be a q-coloring of the blowup host")
    base = blowup.base
    decomposition = vizing_matchings(base)
    matchings = decomposition.matchings

    sizes = []
    current = min(blowup.part_sizes, default=0)
    for _ in matchings:
        current = max(1, math.floor(shrink * current))
        sizes.append(current)
    final_size = sizes[-1] if sizes else current
    L = max(1, math.ceil(eta * final_size))
    final_params = RegularityParams(L=L, p=p / (4 * q), mode=RegularityMode.LOWER_ONLY)

    parts = [tuple(part) for part in blowup.parts]
    colors: Dict[Edge, int] = {}
    stage_verdicts: Dict[Edge, RegularityVerdict] = {}
    log: List[ShrinkLogEntry] = []
    with stage_timer("cleaning.regularity"):
        for k, matching in enumerate(matchings):
            stage_colors, parts, verdicts = _matching_stage(
                matching,
                blowup,
                coloring,
                parts,
                p,
                q,
                L,
                sizes[k],
                seed,
                max_attempts,
                k,
            )
            colors.update(stage_colors)
            stage_verdicts.update(verdicts)
            log.append(
                ShrinkLogEntry(
                    stage=f"matching {k}",
                    sizes=[len(part) for part in parts],
                    factor=str(shrink),
                    note=f"{len(matching)} edges, target {sizes[k]}",
                )
            )
            logger.debug("matching stage %d done: parts of size %d", k, sizes[k])

        certificates: Dict[Edge, RegularityVerdict] = {}
        for (u, v), color in sorted(colors.items()):
            block = BipartitePair(blowup.host, parts[u], parts[v])
            pair = coloring.class_pair(block, color)
            verdict = check_regularity(
                pair, final_params, seed=derive_seed(seed, "final", u, v)
            )
            refuted = verdict.status == VerdictStatus.REFUTED
            if stage_verdicts[(u, v)].certified and refuted:
                raise InvariantViolation(
                    f"edge {u}-{v} lost lower-regularity after later stages",
                    {
                        "edge": [u, v],
                        "witness": verdict.witness.model_dump(mode="json"),
                    },
                )
            certificates[(u, v)] = verdict

    constants = cleaning_constants(q, base.max_degree, p, eta)
    flags = {
        "theory_shrink": math.log2(shrink) <= constants.log2_lambda_matching,
        "all_stages_exact": all(
            v.certified and v.method == "exact" for v in stage_verdicts.values()
        ),
    }
    return CleaningOutcome(
        kind="regularity",
        aux_coloring=EdgeColoring(base, colors, q),
        trimmed_parts=tuple(parts),
        regularity_certificates=certificates,
        shrink_log=log,
        flags=flags,
        constants=constants,
    )


# DRC cleaning
@dataclass(frozen=True)
class ColorSelection:
    x_star: Tuple[int, ...]
    colors: Tuple[int, ...]
    dropped: int
    hypothesis_holds: bool
    size_bound_holds: bool


def min_degree_color_select(
    x_part: Sequence[int],
    y_subsets: Sequence[Sequence[int]],
    coloring: EdgeColoring,
    L: int,
    p,
    q: int,
    strict: bool = True,
) -> ColorSelection:
    """
    X* of size >= |X|/(2q^l) and colors c_i with |N_ci(x) & Y_i| >= (p/2q)|Y_i|

    Drops the vertices of low total degree into some Y_i, gives every
    survivor its majority color per Y_i (lower index on ties) and keeps the
    largest class of equal color tuples (lexicographically first on ties).
    With strict=False the size preconditions are reported instead of raised.
    """
    p = to_fraction(p)
    ell = len(y_subsets)
    if strict and any(len(y) < L for y in y_subsets):
        raise InvalidInputError(f"every Y_i needs at least L={L} vertices")
    if strict and len(x_part) < 2 * ell * L:
        raise InvalidInputError(f"|X| = {len(x_part)} is below 2lL = {2 * ell * L}")

    host = coloring.graph
    masks = [mask_of(y) for y in y_subsets]
    low = set()
    hypothesis = True
    for m, ys in zip(masks, y_subsets):
        weak = [x for x in x_part if 2 * (host.adj[x] & m).bit_count() < p * len(ys)]
        hypothesis = hypothesis and len(weak) <= L
        low.update(weak)

    classes: Dict[Tuple[int, ...], List[int]] = defaultdict(list)
    for x in x_part:
        if x in low:
            continue
        choice = tuple(
            max(
                range(q),
                key=lambda c: ((coloring.color_adj[c][x] & m).bit_count(), -c),
            )
            for m in masks
        )
        classes[choice].append(x)
    if not classes:
        raise CleaningError(
            "every vertex of X has low degree into some Y_i",
            {"x_size": len(x_part), "dropped": len(low)},
        )

    colors, x_star = min(classes.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    floor = p / (2 * q)
    for x in x_star:
        for c, m, ys in zip(colors, masks, y_subsets):
            if (coloring.color_adj[c][x] & m).bit_count() < floor * len(ys):
                raise InvariantViolation(f"vertex {x} misses the p/2q degree floor")
    size_ok = len(x_star) * 2 * q**ell >= len(x_part)
    if not size_ok and hypothesis and len(x_part) >= 2 * ell * L:
        raise InvariantViolation(
            f"|X*| = {len(x_star)} below |X|/(2q^l) under the regularity hypothesis"
        )
    return ColorSelection(tuple(x_star), colors, len(low), hypothesis, size_ok)


def _common_check(
    x_mask: int,
    colored_ys: Sequence[Tuple[int, int]],
    coloring: EdgeColoring,
    r: int,
    seed: int,
) -> Tuple[Optional[int], int, bool]:
    """Least |{x: color(x, y_j) = c_j for all j}| over r-multisets of (y, c)"""
    n = len(colored_ys)
    if n == 0:
        return None, 0, True
    exhaustive = math.comb(n + r - 1, r) <= DRC_BAD_TUPLE_BUDGET
    if exhaustive:
        tuples = combinations_with_replacement(range(n), r)
    else:
        draws = make_rng(seed, "common-check").integers(0, n, size=(SPOT_CHECKS, r))
        tuples = ([int(i) for i in row] for row in draws)
    least, checked = None, 0
    for idx in tuples:
        common = x_mask
        for i in idx:
            y, c = colored_ys[i]
            common &= coloring.color_adj[c][y]
        size = common.bit_count()
        least = size if least is None else min(least, size)
        checked += 1
    return least, checked, exhaustive


@dataclass(frozen=True)
class StarCleaning:
    colors: Tuple[int, ...]
    subsets: Tuple[Tuple[int, ...], ...]
    selection: ColorSelection
    drc: SimDrcOutcome
    min_common: Optional[int]
    required_squared: Fraction
    tuples_checked: int
    exhaustive: bool
    holds: bool
    in_regime: bool
    size_bound_holds: bool


def star_clean(
    x_part: Sequence[int],
    y_subsets: Sequence[Sequence[int]],
    coloring: EdgeColoring,
    L: int,
    p,
    q: int,
    r: int,
    h: Optional[int] = None,
    seed: int = 0,
    max_attempts: int = 200,
) -> StarCleaning:
    """
    Colors c_i and subsets Y_i'' with large common monochromatic neighbourhoods

    Selects X* and the colors by min_degree_color_select, then runs
    simultaneous DRC with h picks (default 4r) on the auxiliary pair where
    x ~ y_i iff the edge x y_i has color c_i. Every r-tuple of the kept
    vertices is then checked against sqrt(|X| / 2q^l) on the original X.
    """
    p = to_fraction(p)
    h = 4 * r if h is None else h
    ell = len(y_subsets)
    if r < 1 or h < 0:
        raise InvalidInputError(f"need r >= 1 and h >= 0, got r={r}, h={h}")
    union = [y for ys in y_subsets for y in ys]
    if len(union) != len(set(union)):
        raise InvalidInputError("the sets Y_i must be disjoint")

    ratio = Fraction(2 * q) / p
    in_regime = (
        all(len(ys) >= L for ys in y_subsets)
        and len(x_part) >= 2 * ell * L
        and len(x_part) >= 2 * q**ell * 2 * ratio ** (4 * ell) * len(union)
    )
    if not in_regime:
        logger.debug(
            "star cleaning outside the guaranteed regime (|X|=%d)", len(x_part)
        )

    selection = min_degree_color_select(
        x_part, y_subsets, coloring, L, p, q, strict=False
    )
    host = coloring.graph
    masks = [mask_of(ys) for ys in y_subsets]
    adj = [0] * host.n
    for x in selection.x_star:
        row = 0
        for c, m in zip(selection.colors, masks):
            row |= coloring.color_adj[c][x] & m
        adj[x] = row
        for y in iter_bits(row):
            adj[y] |= 1 << x
    gamma = BipartitePair(Graph(host.n, adj), selection.x_star, tuple(sorted(union)))

    floor = p / (2 * q)
    try:
        outcome = simultaneous_drc(
            gamma, [sorted(ys) for ys in y_subsets], h, r, floor, max_attempts, seed
        )
    except SearchExhaustedError as e:
        raise CleaningError("simultaneous DRC failed in star cleaning", e.detail) from e

    subsets = tuple(tuple(ys) for ys in outcome.subsets)
    factor = floor ** (h * ell) / 2
    size_ok = all(len(new) >= factor * len(old) for new, old in zip(subsets, y_subsets))
    if in_regime and not size_ok:
        raise InvariantViolation("star cleaning kept fewer vertices than guaranteed")

    colored = [(y, c) for c, ys in zip(selection.colors, subsets) for y in ys]
    least, checked, exhaustive = _common_check(
        mask_of(x_part), colored, coloring, r, derive_seed(seed, "check")
    )
    required = Fraction(len(x_part), 2 * q**ell)
    holds = least is None or least * least >= required
    if not holds and outcome.bad_check_exhaustive and selection.size_bound_holds:
        raise InvariantViolation(
            "common neighbourhood below sqrt(|X|/2q^l) after a verified DRC step",
            {"min_common": least, "required_squared": str(required)},
        )
    return StarCleaning(
        colors=selection.colors,
        subsets=subsets,
        selection=selection,
        drc=outcome,
        min_common=least,
        required_squared=required,
        tuples_checked=checked,
        exhaustive=exhaustive,
        holds=holds,
        in_regime=in_regime,
        size_bound_holds=size_ok,
    )


def drc_clean(
    blowup: Blowup,
    coloring: EdgeColoring,
    r: int,
    q: int,
    L: int,
    p,
    seed: int = 0,
    a_side: Optional[Sequence[int]] = None,
    h: Optional[int] = None,
    max_attempts: int = 200,
) -> CleaningOutcome:
    """
    DRC cleaning over a bipartite base graph (A, B)

    The stars of a_1 < a_2 < ... are cleaned in turn; each stage replaces the
    current Y_b of the star's leaves by the star-cleaned subsets and fixes the
    auxiliary colors of the star edges. At the end every a is checked: for
    all b_1..b_r in N(a) and y_i in Y*_(b_i), at least sqrt(|X_a|/2q^Delta)
    vertices x of X_a have color(x y_i) = color(a b_i).

    Args:
        blowup: Blowup over a bipartite base; X_a = parts of A, Y_b = parts of B
        coloring: q-coloring of the host edges
        r: Tuple size of the common-neighbourhood guarantee
        q: Number of colors
        L: Regularity threshold of the blocks
        p: Regularity density of the blocks
        seed: Root seed; star a uses its own child seed
        a_side: Side A of the base; defaults to the BFS bipartition's first side
        h: DRC picks per star, default 4r
        max_attempts: DRC attempts per star

    Returns:
        CleaningOutcome with one neighbourhood certificate per non-isolated a
    """
    p = to_fraction(p)
    base = blowup.base
    if coloring.q != q or coloring.graph != blowup.host:
        raise InvalidInputError("coloring must be a q-coloring of the blowup host")
    A = sorted(bipartition(base)[0] if a_side is None else a_side)
    a_mask = mask_of(A)
    for u, v in base.edges():
        if (a_mask >> u & 1) == (a_mask >> v & 1):
            raise InvalidInputError(
                f"base edge {u}-{v} does not cross the given side A"
            )
    B = [v for v in range(base.n) if not a_mask >> v & 1]

    delta = base.max_degree
    ratio = Fraction(2 * q) / p
    s0 = min((len(blowup.parts[b]) for b in B), default=0)
    s = min((len(blowup.parts[a]) for a in A), default=0)
    log2_shrink = 5 * delta * r * math.log2(p / (2 * q))
    flags = {
        "y_size_hypothesis": s0 >= L * ratio ** (5 * delta * delta * r),
        "x_size_hypothesis": s >= 4 * ratio ** (5 * delta) * delta * s0,
    }

    Y: Dict[int, Tuple[int, ...]] = {b: tuple(blowup.parts[b]) for b in B}
    colors: Dict[Edge, int] = {}
    stars: Dict[int, StarCleaning] = {}
    log: List[ShrinkLogEntry] = []
    with stage_timer("cleaning.drc"):
        for a in A:
            leaves = sorted(iter_bits(base.adj[a]))
            if not leaves:
                continue
            try:
                star = star_clean(
                    blowup.parts[a],
                    [Y[b] for b in leaves],
                    coloring,
                    L,
                    p,
                    q,
                    r,
                    h,
                    derive_seed(seed, "star", a),
                    max_attempts,
                )
            except CleaningError as e:
                e.detail.setdefault("stage", f"star {a}")
                raise
            stars[a] = star
            for b, c, kept in zip(leaves, star.colors, star.subsets):
                colors[(min(a, b), max(a, b))] = c
                Y[b] = kept
            log.append(
                ShrinkLogEntry(
                    stage=f"star {a}",
                    sizes=[
                        len(Y[v]) if v in Y else len(blowup.parts[v])
                        for v in range(base.n)
                    ],
                    factor=f"{log2_shrink:.6g}",
                    note="log2 delta = 5*Delta*r*log2(p/2q)",
                )
            )

        certificates: Dict[int, NeighborhoodCertificate] = {}
        for a, star in stars.items():
            leaves = sorted(iter_bits(base.adj[a]))
            colored = [
                (y, colors[(min(a, b), max(a, b))]) for b in leaves for y in Y[b]
            ]
            x_part = blowup.parts[a]
            least, checked, exhaustive = _common_check(
                mask_of(x_part), colored, coloring, r, derive_seed(seed, "final", a)
            )
            required = Fraction(len(x_part), 2 * q**delta)
            holds = least is None or least * least >= required
            if not holds and star.holds and star.exhaustive and exhaustive:
                raise InvariantViolation(
                    f"common-neighbourhood guarantee at {a} broken by later stages"
                )
            certificates[a] = NeighborhoodCertificate(
                a=a,
                x_star_size=len(star.selection.x_star),
                colors={
                    edge_key(min(a, b), max(a, b)): colors[(min(a, b), max(a, b))]
                    for b in leaves
                },
                min_common=least,
                required_squared=required,
                tuples_checked=checked,
                exhaustive=exhaustive,
                holds=holds,
            )

    bound = (p / (2 * q)) ** (5 * delta * delta * r)
    flags["final_size_bound"] = all(
        len(Y[b]) >= bound * len(blowup.parts[b]) for b in B
    )
    flags["stars_in_regime"] = all(star.in_regime for star in stars.values())
    trimmed = tuple(
        Y[v] if v in Y else tuple(blowup.parts[v]) for v in range(base.n)
    )
    logger.debug("DRC cleaning kept Y sizes %s", [len(Y[b]) for b in B])
    return CleaningOutcome(
        kind="drc",
        aux_coloring=EdgeColoring(base, colors, q),
        trimmed_parts=trimmed,
        neighborhood_certificates=certificates,
        shrink_log=log,
        flags=flags,
    )
