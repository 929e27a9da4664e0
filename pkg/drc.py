"""
Dependent random choice

Sample h vertices of X with repetition and keep their common neighbourhood in
Y. The simultaneous variant intersects the same common neighbourhood with
several target sets Y_1..Y_l and rules out small r-wise common neighbourhoods.
The auxiliary product graph on X x (Y_1 x ... x Y_l) is only ever used through
its factored degrees.
"""

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import List, Sequence, Tuple

from errors import BudgetExceededError, InvalidInputError, SearchExhaustedError
from graph_core import BipartitePair, iter_bits, mask_of, to_fraction
from models import DrcBoundCheck, SimDrcOutcome
from regularity import pair_density
from rng import make_rng
from settings import DRC_BAD_TUPLE_BUDGET, DRC_TUPLE_BUDGET, get_logger, stage_timer

logger = get_logger("drc")

# Random r-tuples checked when the exhaustive bad-event check is over budget
SPOT_CHECKS = 2000


@dataclass(frozen=True)
class DrcSample:
    picked: Tuple[int, ...]
    common: Tuple[int, ...]


def _common_mask(b: BipartitePair, picked: Sequence[int]) -> int:
    common = b.y_mask
    for x in picked:
        common &= b.host.adj[x]
    return common


def drc_sample(b: BipartitePair, h: int, seed: int) -> DrcSample:
    """h uniform picks from X with repetition and their common neighbourhood in Y"""
    if not b.X:
        raise InvalidInputError("cannot sample from an empty side X")
    if h < 0:
        raise InvalidInputError(f"h must be non-negative, got {h}")
    picks = make_rng(seed, "drc").integers(0, len(b.X), size=h)
    picked = tuple(b.X[int(i)] for i in picks)
    return DrcSample(picked, tuple(iter_bits(_common_mask(b, picked))))


def _tuple_weight(counts: Counter, h: int) -> int:
    # Number of ordered h-tuples with this multiset of entries
    weight = math.factorial(h)
    for m in counts.values():
        weight //= math.factorial(m)
    return weight


def drc_success_bound_check(b: BipartitePair, h: int) -> DrcBoundCheck:
    """
    Exact share of h-tuples of X whose common neighbourhood has >= (p^h/2)|Y| vertices

    Args:
        b: Pair; p is its density
        h: Tuple length

    Returns:
        DrcBoundCheck; holds is true iff the share is at least p^h/2
    """
    if not b.X or not b.Y:
        raise InvalidInputError("both sides must be non-empty")
    required = len(b.X) ** h
    if required > DRC_TUPLE_BUDGET:
        raise BudgetExceededError("DRC tuple enumeration", required, DRC_TUPLE_BUDGET)

    p = pair_density(b)
    threshold = p**h / 2
    needed = threshold * len(b.Y)
    good = 0
    for combo in combinations_with_replacement(b.X, h):
        if _common_mask(b, combo).bit_count() >= needed:
            good += _tuple_weight(Counter(combo), h)
    fraction = Fraction(good, required)
    return DrcBoundCheck(
        h=h,
        density=p,
        fraction=fraction,
        threshold=threshold,
        holds=fraction >= threshold,
        tuples=required,
    )


def auxiliary_product_degrees(
    b: BipartitePair, subsets: Sequence[Sequence[int]]
) -> List[int]:
    """Degree of every x in the auxiliary product graph: prod_i |N(x) & Y_i|"""
    masks = [mask_of(s) for s in subsets]
    degrees = []
    for x in b.X:
        degree = 1
        for m in masks:
            degree *= (b.host.adj[x] & m).bit_count()
        degrees.append(degree)
    return degrees


def drc_good_event(
    b: BipartitePair,
    subsets: Sequence[Sequence[int]],
    picked: Sequence[int],
    p,
    h: int,
) -> Tuple[bool, List[List[int]]]:
    """Whether |Y_i & common| >= (p^(h l)/2)|Y_i| for every i, with the trimmed sets"""
    p = to_fraction(p)
    common = _common_mask(b, picked)
    factor = p ** (h * len(subsets)) / 2
    trimmed = [sorted(iter_bits(mask_of(s) & common)) for s in subsets]
    holds = all(len(t) >= factor * len(s) for t, s in zip(trimmed, subsets))
    return holds, trimmed


def _r_wise_ok(b: BipartitePair, ys: Sequence[int]) -> bool:
    common = b.x_mask
    for y in ys:
        common &= b.host.adj[y]
    # |common| >= sqrt(|X|)
    return common.bit_count() ** 2 >= len(b.X)


def simultaneous_drc(
    b: BipartitePair,
    subsets: Sequence[Sequence[int]],
    h: int,
    r: int,
    p,
    max_attempts: int = 200,
    seed: int = 0,
) -> SimDrcOutcome:
    """
    Simultaneous dependent random choice over Y_1..Y_l

    Resamples until the good event (every Y_i keeps a p^(hl)/2 share) and the
    bad-event refutation (every r-tuple of the kept vertices has at least
    sqrt|X| common neighbours) both hold. r-tuples are taken with repetition.

    Args:
        b: Pair (X, Y)
        subsets: Y_1..Y_l, subsets of Y in host labels
        h: Number of picks
        r: Tuple size for the bad-event check
        p: Minimum relative degree of every x into every Y_i
        max_attempts: Samples to try
        seed: Root seed; attempt k uses its own child stream

    Returns:
        SimDrcOutcome with the kept subsets Y_i'
    """
    p = to_fraction(p)
    if not b.X:
        raise InvalidInputError("side X is empty")
    y_set = set(b.Y)
    for i, s in enumerate(subsets):
        if not set(s) <= y_set:
            raise InvalidInputError(f"subset {i} is not contained in Y")

    masks = [mask_of(s) for s in subsets]
    violations = [
        [x, i]
        for x in b.X
        for i, (m, s) in enumerate(zip(masks, subsets))
        if (b.host.adj[x] & m).bit_count() < p * len(s)
    ]
    if violations:
        raise InvalidInputError(
            f"min-degree hypothesis fails for {len(violations)} (x, i) pairs",
            {"violations": violations[:50]},
        )

    ell = len(subsets)
    union_size = len(set().union(*map(set, subsets))) if subsets else 0
    log2_p = math.log2(p) if p > 0 else -math.inf
    lhs = (h * ell * log2_p if h * ell else 0.0) - 1
    rhs = r * math.log2(max(union_size, 1)) - h / 2 * math.log2(len(b.X))
    in_regime = lhs > rhs
    if not in_regime:
        logger.info(
            "simultaneous DRC outside guaranteed regime: %.4g <= %.4g", lhs, rhs
        )

    last = {}
    with stage_timer("drc.simultaneous"):
        for attempt in range(max_attempts):
            rng = make_rng(seed, "sim-drc", attempt)
            picked = [b.X[int(i)] for i in rng.integers(0, len(b.X), size=h)]
            good, trimmed = drc_good_event(b, subsets, picked, p, h)
            if not good:
                last = {"good": False}
                continue

            kept = sorted(set().union(*map(set, trimmed))) if trimmed else []
            exhaustive = len(kept) ** r <= DRC_BAD_TUPLE_BUDGET
            if exhaustive:
                refuted = all(
                    _r_wise_ok(b, ys) for ys in combinations_with_replacement(kept, r)
                )
            elif kept:
                draws = rng.integers(0, len(kept), size=(SPOT_CHECKS, r))
                refuted = all(
                    _r_wise_ok(b, [kept[int(j)] for j in row]) for row in draws
                )
            else:
                refuted = True
            if not refuted:
                last = {"good": True, "bad_refuted": False}
                continue

            logger.debug("simultaneous DRC succeeded on attempt %d", attempt)
            return SimDrcOutcome(
                subsets=trimmed,
                picked=picked,
                good_certified=True,
                bad_refuted=True,
                bad_check_exhaustive=exhaustive,
                attempts_used=attempt + 1,
                seed=seed,
                in_guaranteed_regime=in_regime,
                feasibility_log2_lhs=lhs,
                feasibility_log2_rhs=rhs,
            )

    raise SearchExhaustedError(
        f"simultaneous DRC failed within {max_attempts} attempts",
        {"attempts": max_attempts, "in_guaranteed_regime": in_regime, "last": last},
    )
