"""
Certified pseudorandom graphs and bipartite gadgets

Gadgets are sampled either directly as an a x b block or as the bipartite
part G[A,B] of an ambient G(a+b, p) sample. Each attempt draws from its own
child stream, so attempt k replays in isolation. Certification runs the exact
regularity checker when both sides fit under the cap and the sampled refuter
otherwise; sampled acceptance is never reported as a valid certificate.
"""

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from errors import InvalidInputError, SearchExhaustedError
from graph_core import BipartitePair, Graph, iter_bits, to_fraction
from models import (
    BipartiteBlockModel,
    DensityCertificate,
    GadgetCertificate,
    GadgetSource,
    RegularityMode,
    RegularityParams,
    RegularityVerdict,
    VerdictStatus,
)
from regularity import (
    check_density_condition,
    check_regularity_exact,
    exact_side_size,
    sampled_verdict,
)
from rng import derive_seed, make_rng
from settings import EXACT_REGULARITY_CAP, get_logger, stage_timer

logger = get_logger("gadgets")


def _check_probability(p: Fraction) -> None:
    if not 0 <= p <= 1:
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")


def sample_gnp(n: int, p, seed: int) -> Graph:
    """G(n, p): every pair independently with probability p under the seeded stream"""
    p = to_fraction(p)
    _check_probability(p)
    if n < 0:
        raise InvalidInputError(f"vertex count must be non-negative, got {n}")
    draws = make_rng(seed, "gnp").random((n, n))
    threshold = float(p)
    adj = [0] * n
    for u in range(n):
        for v in range(u + 1, n):
            if draws[u, v] < threshold:
                adj[u] |= 1 << v
                adj[v] |= 1 << u
    return Graph(n, adj)


def chernoff_tail(n_pairs: int, p, delta: float) -> float:
    """Upper bound 2 exp(-delta^2 n p / 3) on P(|e - np| > delta n p)"""
    return 2.0 * math.exp(-(delta**2) * n_pairs * float(to_fraction(p)) / 3.0)


def transpose_rows(rows: Sequence[int], b: int) -> List[int]:
    """Rows of the transposed block: b rows over len(rows) columns"""
    out = [0] * b
    for i, row in enumerate(rows):
        for j in iter_bits(row):
            out[j] |= 1 << i
    return out


def pair_to_block(pair: BipartitePair) -> BipartiteBlockModel:
    return BipartiteBlockModel(a=len(pair.X), b=len(pair.Y), rows=list(pair.rows))


def theory_threshold(a: int, b: int, p: Fraction) -> int:
    """ceil((48/p) ln(a+b)), the regularity threshold the sampling argument delivers"""
    return math.ceil(48 / float(p) * math.log(a + b))


def load_block(path: Path) -> BipartiteBlockModel:
    """Read a bipartite block document {"a", "b", "rows"}"""
    try:
        block = BipartiteBlockModel.model_validate_json(Path(path).read_text())
    except (OSError, ValidationError) as e:
        raise InvalidInputError(f"cannot read gadget file {path}: {e}") from e
    if len(block.rows) != block.a:
        raise InvalidInputError(
            f"gadget file declares a={block.a} but has {len(block.rows)} rows"
        )
    return block


class GadgetGenerator:
    """Seeded generator for certified pseudorandom graphs and gadgets"""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _sample_rows(
        self, a: int, b: int, p: Fraction, source: GadgetSource, attempt: int
    ) -> List[int]:
        rng = make_rng(self.seed, source.value, attempt)
        threshold = float(p)
        if source == GadgetSource.AMBIENT:
            # A = 0..a-1 and B = a..a+b-1 inside one G(a+b, p) draw
            draws = rng.random((a + b, a + b))
            block = draws[:a, a:]
        else:
            block = rng.random((a, b))
        rows = []
        for i in range(a):
            row = 0
            for j in range(b):
                if block[i, j] < threshold:
                    row |= 1 << j
            rows.append(row)
        return rows

    def _certify(
        self,
        pair: BipartitePair,
        params: RegularityParams,
        refute_trials: int,
        attempt: int,
        jobs: int,
    ) -> RegularityVerdict:
        if exact_side_size(pair, params) <= EXACT_REGULARITY_CAP:
            return check_regularity_exact(pair, params, jobs=jobs)
        return sampled_verdict(
            pair, params, refute_trials, derive_seed(self.seed, "refute", attempt)
        )

    def _certificate(
        self,
        pair: BipartitePair,
        params: RegularityParams,
        verdict: RegularityVerdict,
        attempts: int,
        source: GadgetSource,
    ) -> GadgetCertificate:
        a, b = len(pair.X), len(pair.Y)
        threshold = theory_threshold(a, b, params.p)
        return GadgetCertificate(
            params_claimed=params,
            verification=verdict,
            attempts_used=attempts,
            seed=self.seed,
            source=source,
            valid=verdict.certified and verdict.method == "exact",
            theory_threshold_L=threshold,
            theory_threshold_vacuous=threshold > max(a, b),
            ambient_t=24 / float(params.p) * math.log(a + b),
        )

    def generate_dense_pseudorandom_graph(
        self, n: int, p, t: int, eps, max_attempts: int = 100
    ) -> Tuple[Graph, DensityCertificate]:
        """
        Resample G(n, p) until every pair of disjoint t-sets has density within eps

        Args:
            n: Vertex count
            p: Edge probability
            t: Set size
            eps: Relative tolerance
            max_attempts: Samples to try before giving up

        Returns:
            The certified graph and its density certificate
        """
        p = to_fraction(p)
        eps = to_fraction(eps)
        _check_probability(p)
        if max_attempts < 1:
            raise InvalidInputError("max_attempts must be positive")

        regime_bound = math.exp(t * float(eps) ** 2 * float(p) / 6)
        in_regime = n <= regime_bound
        if not in_regime:
            logger.info(
                "n=%d is outside the guaranteed regime n <= %.4g", n, regime_bound
            )

        best: Optional[RegularityVerdict] = None
        best_attempt = -1
        with stage_timer("gadgets.dense"):
            for attempt in range(max_attempts):
                g = sample_gnp(n, p, derive_seed(self.seed, "dense", attempt))
                verdict = check_density_condition(g, t, p, eps)
                if verdict.certified:
                    logger.debug("dense graph certified on attempt %d", attempt)
                    return g, DensityCertificate(
                        verification=verdict,
                        attempts_used=attempt + 1,
                        seed=self.seed,
                        regime_bound=regime_bound,
                        in_guaranteed_regime=in_regime,
                    )
                # The attempt that survived the most pairs before failing
                if best is None or verdict.checked > best.checked:
                    best, best_attempt = verdict, attempt

        raise SearchExhaustedError(
            f"no certified G({n}, {p}) within {max_attempts} attempts",
            {
                "attempts": max_attempts,
                "best_attempt": best_attempt,
                "best_pairs_checked": best.checked if best else 0,
                "best_violation": (
                    best.density_witness.model_dump(mode="json")
                    if best and best.density_witness
                    else None
                ),
                "in_guaranteed_regime": in_regime,
            },
        )

    def generate_regular_gadget(
        self,
        a: int,
        b: int,
        p,
        target_L: Optional[int] = None,
        max_attempts: int = 50,
        source: GadgetSource = GadgetSource.DIRECT,
        mode: RegularityMode = RegularityMode.TWO_SIDED,
        refute_trials: int = 200,
        jobs: int = 1,
    ) -> Tuple[BipartitePair, GadgetCertificate]:
        """
        Sample a bipartite a x b gadget and certify (target_L, p)-regularity

        The accepted attempt is the lowest-index one that certifies (or, above
        the exact cap, the lowest-index one the sampled refuter cannot refute).

        Args:
            a: Rows (X side)
            b: Columns (Y side)
            p: Edge probability and regularity density
            target_L: Threshold to certify; defaults to the theoretical threshold
            max_attempts: Samples to try
            source: direct block sampling or ambient G(a+b, p)
            mode: two-sided or lower-only regularity
            refute_trials: Sampled-refuter trials above the exact cap
            jobs: Worker processes for the exact checker

        Returns:
            The gadget pair and its certificate
        """
        p = to_fraction(p)
        if a < 1 or b < 1:
            raise InvalidInputError(f"gadget sides must be positive, got {a}x{b}")
        if not 0 < p <= 1:
            raise InvalidInputError(f"p must lie in (0, 1], got {p}")
        if source == GadgetSource.FILE:
            raise InvalidInputError("file gadgets are loaded with from_file")
        if max_attempts < 1:
            raise InvalidInputError("max_attempts must be positive")

        threshold = theory_threshold(a, b, p)
        if target_L is None:
            target_L = threshold
        if threshold > max(a, b):
            logger.info(
                "threshold L=%d exceeds part sizes %dx%d; certifying at L=%d",
                threshold,
                a,
                b,
                target_L,
            )
        params = RegularityParams(L=target_L, p=p, mode=mode)

        last: Optional[RegularityVerdict] = None
        with stage_timer("gadgets.regular"):
            for attempt in range(max_attempts):
                rows = self._sample_rows(a, b, p, source, attempt)
                pair = BipartitePair.from_rows(rows, b)
                verdict = self._certify(pair, params, refute_trials, attempt, jobs)
                if verdict.status != VerdictStatus.REFUTED:
                    logger.debug(
                        "gadget %dx%d accepted on attempt %d (%s)",
                        a,
                        b,
                        attempt,
                        verdict.status.value,
                    )
                    return pair, self._certificate(
                        pair, params, verdict, attempt + 1, source
                    )
                last = verdict

        raise SearchExhaustedError(
            f"no ({target_L}, {p})-regular {a}x{b} gadget "
            f"within {max_attempts} attempts",
            {
                "attempts": max_attempts,
                "source": source.value,
                "last_witness": (
                    last.witness.model_dump(mode="json")
                    if last and last.witness
                    else None
                ),
            },
        )

    def from_file(
        self,
        path: Path,
        params: RegularityParams,
        refute_trials: int = 200,
        jobs: int = 1,
    ) -> Tuple[BipartitePair, GadgetCertificate]:
        """Load an externally supplied gadget and certify it like a sampled one"""
        block = load_block(path)
        pair = BipartitePair.from_rows(block.rows, block.b)
        verdict = self._certify(pair, params, refute_trials, 0, jobs)
        logger.info(
            "gadget from %s: %dx%d, %s", path, block.a, block.b, verdict.status.value
        )
        return pair, self._certificate(pair, params, verdict, 1, GadgetSource.FILE)


def save_block(pair: BipartitePair, path: Path) -> None:
    """Write a gadget in the bipartite block format"""
    Path(path).write_text(json.dumps(pair_to_block(pair).model_dump(), sort_keys=True))
