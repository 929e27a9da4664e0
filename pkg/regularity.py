"""
Exact and sampled verdicts for (L,p)-regularity of bipartite pairs

A pair is (L,p)-regular when for every subset X' of either side with |X'| >= L,
at most L vertices y on the other side have d_{X'}(y) < p|X'|/2 or
d_{X'}(y) > 2p|X'|. Lower-only mode drops the upper clause. Both comparisons
are strict and are done on integers by cross-multiplication.
"""

from fractions import Fraction
from itertools import combinations
from math import comb
from typing import List, Optional, Sequence, Tuple

from errors import BudgetExceededError, InvalidInputError
from graph_core import BipartitePair, Graph, iter_bits, mask_of, to_fraction
from models import (
    DensityWitness,
    RegularityMode,
    RegularityParams,
    RegularityVerdict,
    RegularityWitness,
    Side,
    VerdictStatus,
)
from rng import make_rng
from settings import DENSITY_PAIR_BUDGET, EXACT_REGULARITY_CAP, get_logger
from workers import map_ordered

logger = get_logger("regularity")

# (size, gray index, subset mask, offending mask), smaller tuples win
_Found = Tuple[int, int, int, int]


def pair_density(b: BipartitePair) -> Fraction:
    """Exact e(X,Y) / (|X||Y|)"""
    if not b.X or not b.Y:
        raise InvalidInputError("density of a pair with an empty side is undefined")
    return Fraction(b.edge_count, len(b.X) * len(b.Y))


def degree_window(p: Fraction, k: int) -> Tuple[int, int]:
    """
    Integer window for subset size k

    Returns:
        (lo, hi): a degree d is bad iff d < lo, or (two-sided) d > hi
    """
    num, den = p.numerator, p.denominator
    lo = -(-num * k // (2 * den))
    hi = 2 * num * k // den
    return lo, hi


_SideView = Tuple[Side, Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]


def _sides(b: BipartitePair) -> List[_SideView]:
    # (side label, subset-side vertices, opposite vertices, rows of subset side)
    return [(Side.X, b.X, b.Y, b.rows), (Side.Y, b.Y, b.X, b.cols)]


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _scan_gray_range(
    args: Tuple[Sequence[int], int, int, Fraction, bool, int, int, int]
) -> Tuple[Optional[_Found], int]:
    """
    Walk Gray codes g(start)..g(stop-1) over subsets of the row side

    Degrees of the opposite side are kept incrementally along with a degree
    histogram, so each step costs the flipped row's degree plus one window sum.
    """
    rows, a, b, p, two_sided, L, start, stop = args
    lows = [0] * (a + 1)
    highs = [0] * (a + 1)
    for k in range(a + 1):
        lows[k], highs[k] = degree_window(p, k)

    # Column masks give the opposite-side degrees for a starting subset
    cols = [0] * b
    for i, row in enumerate(rows):
        for j in iter_bits(row):
            cols[j] |= 1 << i

    subset = _gray(start)
    size = subset.bit_count()
    deg = [(cols[j] & subset).bit_count() for j in range(b)]
    hist = [0] * (a + 2)
    for d in deg:
        hist[d] += 1

    best: Optional[_Found] = None
    checked = 0
    i = start
    while True:
        if size >= L and size > 0:
            checked += 1
            lo, hi = lows[size], highs[size]
            bad = sum(hist[:lo]) if lo > 0 else 0
            if two_sided and hi < size:
                bad += sum(hist[hi + 1 : size + 1])
            if bad > L and (best is None or (size, i) < best[:2]):
                offending = 0
                for j in range(b):
                    if deg[j] < lo or (two_sided and deg[j] > hi):
                        offending |= 1 << j
                best = (size, i, subset, offending)
        i += 1
        if i >= stop:
            break
        flip = (i & -i).bit_length() - 1
        bit = 1 << flip
        if subset & bit:
            subset ^= bit
            size -= 1
            for j in iter_bits(rows[flip]):
                hist[deg[j]] -= 1
                deg[j] -= 1
                hist[deg[j]] += 1
        else:
            subset |= bit
            size += 1
            for j in iter_bits(rows[flip]):
                hist[deg[j]] -= 1
                deg[j] += 1
                hist[deg[j]] += 1
    return best, checked


def exact_side_size(b: BipartitePair, params: RegularityParams) -> int:
    """Largest side the exact checker enumerates; sides below L hold no subset"""
    return max((len(side) for side in (b.X, b.Y) if len(side) >= params.L), default=0)


def check_regularity_exact(
    b: BipartitePair, params: RegularityParams, jobs: int = 1
) -> RegularityVerdict:
    """
    Decide (L,p)-regularity by enumerating every subset of both sides

    The witness returned on refutation is the smallest violating subset found,
    X side first, ties broken by Gray-code position.

    Args:
        b: Pair to check; every side with at least L vertices must have at most
            EXACT_REGULARITY_CAP of them
        params: Threshold, density and mode
        jobs: Split the Gray-code range across this many worker processes

    Returns:
        RegularityVerdict with status certified-regular or refuted
    """
    largest = exact_side_size(b, params)
    if largest > EXACT_REGULARITY_CAP:
        error = BudgetExceededError(
            "exhaustive regularity cap (part size)", largest, EXACT_REGULARITY_CAP
        )
        error.detail["hint"] = "use refute_regularity_sampled for larger pairs"
        raise error

    two_sided = params.mode == RegularityMode.TWO_SIDED
    checked = 0
    for side, subset_side, opposite, rows in _sides(b):
        a, bb = len(subset_side), len(opposite)
        if a < params.L:
            continue
        total = 1 << a
        pieces = max(1, min(jobs * 4, total)) if jobs > 1 else 1
        bounds = [total * k // pieces for k in range(pieces + 1)]
        tasks = [
            (rows, a, bb, params.p, two_sided, params.L, bounds[k], bounds[k + 1])
            for k in range(pieces)
            if bounds[k] < bounds[k + 1]
        ]
        results = map_ordered(_scan_gray_range, tasks, jobs=jobs)
        found = [r for r, _ in results if r is not None]
        checked += sum(c for _, c in results)
        if found:
            size, _, subset, offending = min(found)
            witness = RegularityWitness(
                side=side,
                subset=sorted(subset_side[i] for i in iter_bits(subset)),
                offending=sorted(opposite[j] for j in iter_bits(offending)),
            )
            logger.debug("pair refuted on side %s with |X'|=%d", side.value, size)
            return RegularityVerdict(
                status=VerdictStatus.REFUTED,
                method="exact",
                p=params.p,
                L=params.L,
                mode=params.mode,
                witness=witness,
                checked=checked,
            )

    return RegularityVerdict(
        status=VerdictStatus.CERTIFIED,
        method="exact",
        p=params.p,
        L=params.L,
        mode=params.mode,
        checked=checked,
    )


def is_regularity_witness(
    b: BipartitePair, params: RegularityParams, witness: RegularityWitness
) -> bool:
    """Re-check a witness against the definition"""
    if witness.side == Side.X:
        subset_side, opposite = b.X, b.Y
    else:
        subset_side, opposite = b.Y, b.X
    chosen = set(witness.subset)
    if not chosen <= set(subset_side) or len(chosen) < params.L:
        return False
    k = len(chosen)
    lo, hi = degree_window(params.p, k)
    two_sided = params.mode == RegularityMode.TWO_SIDED
    subset_mask = mask_of(chosen)
    offending = []
    for y in opposite:
        d = (b.host.adj[y] & subset_mask).bit_count()
        if d < lo or (two_sided and d > hi):
            offending.append(y)
    return len(offending) > params.L and sorted(offending) == sorted(witness.offending)


def refute_regularity_sampled(
    b: BipartitePair, params: RegularityParams, trials: int, seed: int
) -> Optional[RegularityWitness]:
    """
    Look for a regularity witness by sampling subsets

    Half the trials take uniform subsets, the rest take neighbourhoods (or
    non-neighbourhoods) of a random opposite vertex, padded up to size L. Any
    witness is re-checked against the definition before it is returned.
    """
    rng = make_rng(seed, "refute")
    two_sided = params.mode == RegularityMode.TWO_SIDED
    sides = [s for s in _sides(b) if len(s[1]) >= params.L and len(s[1]) > 0]
    if not sides:
        return None

    for trial in range(trials):
        side, subset_side, opposite, rows = sides[trial % len(sides)]
        a = len(subset_side)
        cols = b.cols if side == Side.X else b.rows
        if trial % 2 == 0 or not opposite:
            k = int(rng.integers(params.L, a + 1))
            picked = rng.choice(a, size=k, replace=False)
            subset = mask_of(int(i) for i in picked)
        else:
            j = int(rng.integers(0, len(opposite)))
            subset = cols[j]
            if rng.random() < 0.5:
                subset = ((1 << a) - 1) & ~subset
            missing = params.L - subset.bit_count()
            if missing > 0:
                outside = [i for i in range(a) if not subset >> i & 1]
                for i in rng.choice(len(outside), size=missing, replace=False):
                    subset |= 1 << outside[int(i)]
            if subset == 0:
                continue
        k = subset.bit_count()
        lo, hi = degree_window(params.p, k)
        offending = [
            opposite[j]
            for j in range(len(opposite))
            if (d := (cols[j] & subset).bit_count()) < lo or (two_sided and d > hi)
        ]
        if len(offending) > params.L:
            witness = RegularityWitness(
                side=side,
                subset=sorted(subset_side[i] for i in iter_bits(subset)),
                offending=sorted(offending),
            )
            if is_regularity_witness(b, params, witness):
                logger.debug("sampled witness found on trial %d", trial)
                return witness
    return None


def sampled_verdict(
    b: BipartitePair, params: RegularityParams, trials: int, seed: int
) -> RegularityVerdict:
    """Refuted with a witness, otherwise inconclusive; sampling never certifies"""
    witness = refute_regularity_sampled(b, params, trials, seed)
    return RegularityVerdict(
        status=VerdictStatus.REFUTED if witness else VerdictStatus.INCONCLUSIVE,
        method="sampled",
        p=params.p,
        L=params.L,
        mode=params.mode,
        witness=witness,
        checked=trials,
    )


def check_regularity(
    b: BipartitePair, params: RegularityParams, trials: int = 200, seed: int = 0
) -> RegularityVerdict:
    """Exact verdict within the cap, sampled verdict beyond it"""
    if exact_side_size(b, params) <= EXACT_REGULARITY_CAP:
        return check_regularity_exact(b, params)
    return sampled_verdict(b, params, trials, seed)


def check_density_condition(g: Graph, t: int, p, eps) -> RegularityVerdict:
    """
    Certify |e(X',Y') - p t^2| <= eps p t^2 for all disjoint t-sets X', Y'

    Unordered pairs are enumerated once (min Y' > min X'); the first violation
    in lexicographic order is reported along with the largest relative deviation
    seen.
    """
    p = to_fraction(p)
    eps = to_fraction(eps)
    if t < 1:
        raise InvalidInputError(f"set size t must be positive, got {t}")
    if not 0 <= p <= 1:
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    required = comb(g.n, t) * comb(max(g.n - t, 0), t)
    if required > DENSITY_PAIR_BUDGET:
        raise BudgetExceededError(
            "density-condition pair enumeration", required, DENSITY_PAIR_BUDGET
        )

    expected = p * t * t
    allowed = eps * expected
    checked = 0
    worst = Fraction(0)
    for xs in combinations(range(g.n), t):
        x_mask = mask_of(xs)
        rest = [v for v in range(xs[0] + 1, g.n) if not x_mask >> v & 1]
        for ys in combinations(rest, t):
            checked += 1
            y_mask = mask_of(ys)
            e = sum((g.adj[x] & y_mask).bit_count() for x in xs)
            deviation = abs(e - expected)
            if expected:
                worst = max(worst, deviation / expected)
            if deviation > allowed:
                return RegularityVerdict(
                    status=VerdictStatus.REFUTED,
                    method="enumeration",
                    p=p,
                    t=t,
                    eps=eps,
                    density_witness=DensityWitness(
                        x_set=list(xs), y_set=list(ys), edges=e, expected=expected
                    ),
                    max_deviation=worst if expected else None,
                    checked=checked,
                )

    return RegularityVerdict(
        status=VerdictStatus.CERTIFIED,
        method="enumeration",
        p=p,
        t=t,
        eps=eps,
        max_deviation=worst if expected else None,
        checked=checked,
    )
