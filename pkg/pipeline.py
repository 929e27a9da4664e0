"""
End-to-end reductions

Both reductions build a blowup G' of a base host G that arrows the pattern,
then run independent trials: an adversary colors G', cleaning turns that into
an auxiliary coloring of G plus trimmed parts, a monochromatic copy of the
pattern is found in the auxiliary coloring and embedded back into G' as an
induced monochromatic copy. No trial counts as a success unless the final copy
is re-verified against G' and the adversary's coloring.
"""

import math
from collections import Counter
from dataclasses import dataclass
from decimal import MAX_EMAX, MIN_EMIN, Decimal, localcontext
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from cleaning import (
    CONSTANT_PRECISION,
    CleaningOutcome,
    cleaning_constants,
    drc_clean,
    regularity_clean,
)
from edge_coloring import adversary_color
from embedding import (
    embedding_graphs,
    feasibility_check,
    greedy_induced_embed,
    lll_blowup_embed,
    theory_eta,
)
from errors import (
    BudgetExceededError,
    InvalidInputError,
    InvariantViolation,
    SearchExhaustedError,
)
from gadgets import GadgetGenerator, transpose_rows
from graph_core import (
    Blowup,
    EdgeColoring,
    Graph,
    bipartition,
    blowup_to_model,
    check_blowup_map,
    complete_blowup,
    construct_blowup,
    graph_from_model,
    graph_to_model,
    is_blowup_of,
    is_induced_copy,
    popcount,
    to_fraction,
)
from models import (
    Accounting,
    AdversaryStrategy,
    ClosureReport,
    CopyMode,
    EmbeddingModel,
    EmbedParams,
    EmbedTrace,
    FeasibilityReport,
    GadgetCertificate,
    TheoryConstant,
    PipelineConfig,
    PipelineResponse,
    PipelineSummary,
    RegularityMode,
    TrialReport,
)
from oracles import arrows, find_copy, search_host
from rng import derive_seed
from settings import BLOWUP_SEARCH_CAP, get_logger, stage_timer
from workers import map_ordered

logger = get_logger("pipeline")

GENERAL = "general"
BIPARTITE = "bipartite"


# Theoretical parameter chains
def _log2(x: Fraction) -> float:
    return math.log2(x.numerator) - math.log2(x.denominator)


def _constant(
    formula: str, log2: Optional[float] = None, value: Optional[float] = None
) -> TheoryConstant:
    """Constant given by its value or its log2; huge values keep only the logs"""
    constant = TheoryConstant(formula=formula)
    if value is not None:
        constant.value = float(value)
    if log2 is not None:
        constant.log2_value = f"{log2:.12g}"
        if constant.value is None and log2 < 1000:
            constant.value = 2.0**log2
        if log2 > 0:
            constant.log2_log2_value = f"{math.log2(log2):.12g}"
    return constant


def _tower_constant(
    formula: str, tower: str, scale: int, offset: float
) -> TheoryConstant:
    """Constant whose log2 is scale * 2^T + offset, T = log2(-log2 lambda)"""
    if tower == "Infinity":
        return TheoryConstant(log2_log2_value="Infinity", formula=formula)
    with localcontext() as ctx:
        ctx.prec = CONSTANT_PRECISION
        ctx.Emax = MAX_EMAX
        ctx.Emin = MIN_EMIN
        ln2 = Decimal(2).ln()
        T = Decimal(tower)
        if T < 1000:
            log2 = scale * (T * ln2).exp() + Decimal(repr(offset))
            constant = TheoryConstant(log2_value=f"{log2:.12g}", formula=formula)
            if log2 > 0:
                constant.log2_log2_value = f"{log2.ln() / ln2:.12g}"
            return constant
        # the offset is below the working precision
        top = T + Decimal(scale).ln() / ln2
        return TheoryConstant(log2_log2_value=f"{top:.12g}", formula=formula)


def theory_constants_general(
    q: int, k: int, delta: int, C=1
) -> Dict[str, TheoryConstant]:
    """
    Parameter chain of the general reduction

    p = 1/100, rho = p/4q, eta = (rho/2)^k (1-2p)^Delta / (Delta+k), lambda the
    cleaning shrink factor for (q, Delta, p, eta), s = C (lambda eta)^-2 the
    gadget part size, s* = lambda s the cleaned part size and L = eta s*.
    For lambda, log2_log2_value holds log2(-log2 lambda).
    """
    C = to_fraction(C)
    if q < 1 or k < 0 or delta < 0 or C <= 0:
        raise InvalidInputError("need q >= 1, k >= 0, Delta >= 0 and C > 0")
    p = Fraction(1, 100)
    rho = p / (4 * q)
    eta = theory_eta(rho, k, p, delta)
    log2_eta = _log2(eta)
    log2_C = _log2(C)
    tower = cleaning_constants(q, delta, p, eta).log2_neg_log2_lambda_tower
    return {
        "p": _constant("1/100", value=float(p)),
        "rho": _constant("p/(4q)", log2=_log2(rho), value=float(rho)),
        "eta": _constant(
            "(rho/2)^k (1-2p)^Delta / (Delta+k)", log2=log2_eta, value=float(eta)
        ),
        "lambda": TheoryConstant(
            log2_log2_value=tower,
            formula="lambda(q, Delta, p, eta); log2 of -log2 lambda",
        ),
        "s": _tower_constant("C (lambda eta)^-2", tower, 2, log2_C - 2 * log2_eta),
        "s_star": _tower_constant("lambda s", tower, 1, log2_C - 2 * log2_eta),
        "L": _tower_constant("eta s*", tower, 1, log2_C - log2_eta),
    }


def theory_constants_bipartite(
    q: int, k: int, delta: int, w: int, C=1
) -> Dict[str, TheoryConstant]:
    """
    Parameter chain of the bipartite reduction

    The headline part size is (Delta q)^(C k Delta^2 w); the chain itself uses
    p = 1/(4 Delta), s = (2q/p)^(C Delta^2 k w), s0 = s^(1/3),
    L = (48/p) ln(2s) <= s^(1/9), s* = s0^(1/2) and r = k w.
    """
    C = to_fraction(C)
    if q < 1 or k < 0 or delta < 1 or w < 1 or C <= 0:
        raise InvalidInputError("need q >= 1, k >= 0, Delta >= 1, w >= 1 and C > 0")
    p = Fraction(1, 4 * delta)
    exponent = float(C) * k * delta * delta * w
    log2_s = exponent * math.log2(delta * q)
    log2_proof = exponent * _log2(Fraction(2 * q) / p)
    L = float(48 / p) * math.log(2) * (1 + log2_proof)
    return {
        "p": _constant("1/(4 Delta)", value=float(p)),
        "s": _constant("(Delta q)^(C k Delta^2 w)", log2=log2_s),
        "s_proof": _constant("(2q/p)^(C Delta^2 k w)", log2=log2_proof),
        "s0": _constant("s^(1/3)", log2=log2_proof / 3),
        "L": _constant("(48/p) ln(2s)", log2=math.log2(L), value=L),
        "L_cap": _constant("s^(1/9)", log2=log2_proof / 9),
        "s_star": _constant("s0^(1/2)", log2=log2_proof / 6),
        "r": _constant("k w", value=k * w),
    }


# Hosts and blowups
def prepare_host(
    config: PipelineConfig, pattern: Graph, bipartite: bool = False
) -> Tuple[Graph, bool]:
    """
    Base host from the config, or the first arrowing host of the search

    A host given in the config is checked with the oracle unless it is marked
    trusted; the flag returned says whether the arrow was verified.
    """
    if config.host is None:
        spec = config.host_search
        with stage_timer("pipeline.host-search"):
            result = search_host(
                pattern,
                config.q,
                CopyMode.SUBGRAPH,
                spec.max_vertices,
                spec.degree_cap,
                spec.seeds_per_size,
                seed=derive_seed(config.seed, "host-search"),
                bipartite=bipartite,
            )
        if result.found is None:
            raise SearchExhaustedError(
                f"no host on at most {spec.max_vertices} vertices arrows the pattern",
                {"candidates": len(result.log)},
            )
        return graph_from_model(result.found), True

    host = graph_from_model(config.host)
    if config.host_trusted:
        logger.info("using trusted host %r without an arrow check", host)
        return host, False
    try:
        verdict = arrows(host, pattern, config.q)
    except BudgetExceededError as e:
        e.detail["hint"] = "set host_trusted to skip the arrow check"
        raise
    if not verdict.arrows:
        raise InvalidInputError(
            f"host does not arrow the pattern in {config.q} colors",
            {"counterexample": verdict.counterexample.model_dump(mode="json")},
        )
    return host, True


def build_blowup(
    base: Graph, config: PipelineConfig, a_side: Optional[Sequence[int]] = None
) -> Tuple[Blowup, GadgetCertificate]:
    """
    Install one certified gadget on every base edge

    Without a side every part has size s and the gadget is s x s. With side A
    the A parts have size s and the others s0, and the s x s0 gadget is laid
    down from its A end.
    """
    spec = config.gadget
    generator = GadgetGenerator(derive_seed(config.seed, "gadget"))
    s0 = spec.s if a_side is None or spec.s0 is None else spec.s0
    with stage_timer("pipeline.gadget"):
        pair, certificate = generator.generate_regular_gadget(
            spec.s,
            s0,
            spec.p,
            target_L=spec.target_L,
            max_attempts=spec.max_attempts,
            source=spec.source,
            mode=RegularityMode.TWO_SIDED,
            refute_trials=spec.refute_trials,
        )
    rows = list(pair.rows)
    if a_side is None:
        sizes = [spec.s] * base.n

        def provider(u: int, v: int, a: int, b: int) -> List[int]:
            return rows

    else:
        A = set(a_side)
        sizes = [spec.s if v in A else s0 for v in range(base.n)]
        columns = transpose_rows(rows, s0)

        def provider(u: int, v: int, a: int, b: int) -> List[int]:
            return rows if u in A else columns

    with stage_timer("pipeline.blowup"):
        blowup = construct_blowup(base, sizes, provider)
    logger.info(
        "blowup of %r: %d vertices, %d edges, gadget valid=%s",
        base,
        blowup.host.n,
        blowup.host.edge_count,
        certificate.valid,
    )
    return blowup, certificate


def accounting(blowup: Blowup, s: int) -> Accounting:
    """Recount the blowup and compare with s|V(G)| and s^2 e(G)"""
    host, base = blowup.host, blowup.base
    sum_parts = sum(blowup.part_sizes)
    block_edges = sum(popcount(row) for rows in blowup.blocks.values() for row in rows)
    vertex_bound = s * base.n
    edge_bound = s * s * base.edge_count
    return Accounting(
        host_vertices=host.n,
        sum_part_sizes=sum_parts,
        host_edges=host.edge_count,
        sum_block_edges=block_edges,
        identities_hold=host.n == sum_parts and host.edge_count == block_edges,
        s=s,
        vertex_bound=vertex_bound,
        edge_bound=edge_bound,
        within_bounds=host.n <= vertex_bound and host.edge_count <= edge_bound,
    )


# Trials
def trial_coloring(
    blowup: Blowup, adversary: Union[AdversaryStrategy, str], q: int, seed: int
) -> EdgeColoring:
    """The adversary coloring a trial with this seed sees"""
    return adversary_color(blowup, adversary, q, seed=derive_seed(seed, "adversary"))


def monochromatic_copy(
    aux: EdgeColoring, pattern: Graph
) -> Tuple[Optional[Tuple[int, ...]], Optional[int]]:
    for c in range(aux.q):
        copy = find_copy(aux.graph, pattern, CopyMode.SUBGRAPH, coloring=aux, color=c)
        if copy is not None:
            return copy, c
    return None, None


def _cleaned_L(outcome: CleaningOutcome, default: int) -> int:
    levels = [v.L for v in outcome.regularity_certificates.values() if v.L is not None]
    return max(levels, default=default)


@dataclass
class EmbedOutcome:
    """Embedding of the pattern, or its w-blowup, into the cleaned parts of G'"""

    target: Graph
    trace: Optional[EmbedTrace] = None
    feasibility: Optional[FeasibilityReport] = None
    embedding: Optional[EmbeddingModel] = None
    feasible: bool = False
    failure_reason: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.embedding is not None and self.embedding.verified


def embed_cleaned(
    blowup: Blowup,
    coloring: EdgeColoring,
    pattern: Graph,
    parts: Sequence[Sequence[int]],
    copy: Sequence[int],
    color: int,
    embed_kind: str = "greedy",
    config: Optional[PipelineConfig] = None,
    gadget_L: int = 1,
    cleaned_L: Optional[int] = None,
    certified: bool = False,
    seed: int = 0,
    a_side: Optional[Sequence[int]] = None,
) -> EmbedOutcome:
    """
    Embed the pattern into G' along a monochromatic copy of the auxiliary coloring

    The result is re-verified against the host and the adversary coloring; a
    returned mapping that fails that check is an invariant violation.

    Args:
        blowup: Blowup G' of the base host
        coloring: Adversary coloring of G'
        pattern: Pattern H
        parts: Trimmed parts left by cleaning, indexed by base vertex
        copy: Monochromatic copy of H in the auxiliary coloring
        color: Its color
        embed_kind: "greedy" for H itself, "lll" for the complete w-blowup of H
        config: Stage parameters
        gadget_L: Regularity threshold claimed for the gadget
        cleaned_L: Lower-regularity threshold certified by cleaning
        certified: Every embedding hypothesis was certified
        seed: Trial seed
        a_side: Side A of a bipartite base

    Returns:
        EmbedOutcome; embedding is None when the embedding stage failed

    Raises:
        InvariantViolation: The returned copy does not verify
    """
    if embed_kind not in ("greedy", "lll"):
        raise InvalidInputError(f"unknown embedding kind {embed_kind}")
    config = config or PipelineConfig(pattern=graph_to_model(pattern))
    base = blowup.base
    spec = config.embedding
    p, q = config.gadget.p, config.q
    cleaned_L = gadget_L if cleaned_L is None else cleaned_L
    parts = [list(part) for part in parts]
    hstar, gstar = embedding_graphs(coloring, color, pattern, parts, copy)
    rho = p / (4 * q) if spec.rho is None else spec.rho
    L = gadget_L if spec.L is None else spec.L

    fibers = None
    if embed_kind == "greedy":
        s_star = spec.s_star or min((len(parts[a]) for a in copy), default=1)
        params = EmbedParams(
            s_star=max(1, s_star),
            L=L,
            L_prime=cleaned_L if spec.L_prime is None else spec.L_prime,
            p=p,
            rho=rho,
            k=pattern.max_degree,
            delta=base.max_degree,
        )
        outcome = EmbedOutcome(target=pattern, feasibility=feasibility_check(params))
        embedding, trace = greedy_induced_embed(
            pattern,
            base,
            hstar,
            gstar,
            parts,
            params,
            copy=copy,
            order=spec.order,
            hypotheses_certified=certified,
            color=color,
        )
    else:
        w = config.w or 1
        A = set(bipartition(base)[0] if a_side is None else a_side)
        b_sizes = [len(parts[b]) for b in copy if b not in A]
        s_star = spec.s_star or min(b_sizes, default=w) // w
        target, fibers = complete_blowup(pattern, w)
        if s_star < 1:
            return EmbedOutcome(
                target=target,
                failure_reason=f"cleaned parts hold fewer than w={w} vertices",
            )
        params = EmbedParams(
            s_star=s_star,
            L=L,
            L_prime=gadget_L if spec.L_prime is None else spec.L_prime,
            p=p,
            rho=rho,
            k=pattern.max_degree,
            delta=base.max_degree,
            w=w,
        )
        outcome = EmbedOutcome(target=target, feasibility=feasibility_check(params))
        embedding, trace = lll_blowup_embed(
            pattern,
            base,
            w,
            hstar,
            gstar,
            parts,
            params,
            copy=copy,
            a_side=sorted(A),
            hprime=target,
            fibers=fibers,
            seed=derive_seed(seed, "embedding"),
            max_resample=spec.max_resample,
            hypotheses_certified=certified,
            color=color,
        )
    outcome.trace = trace
    outcome.feasible = bool(
        outcome.feasibility.greedy_holds
        if embed_kind == "greedy"
        else outcome.feasibility.lll_holds
    )
    if embedding is None:
        outcome.failure_reason = trace.failure_reason or "embedding failed"
        return outcome

    target = outcome.target
    mapping = embedding.mapping
    verified = is_induced_copy(blowup.host, target, mapping, coloring, color)
    if verified and fibers is not None:
        if target.n <= BLOWUP_SEARCH_CAP:
            verified = is_blowup_of(target, pattern, config.w or 1) is not None
        else:
            verified = check_blowup_map(target, pattern, fibers, config.w or 1)
    outcome.embedding = EmbeddingModel(
        pattern=graph_to_model(target),
        mapping=list(mapping),
        claimed_color=color,
        verified=verified,
    )
    if not verified:
        raise InvariantViolation(
            "embedding failed verification against the blowup and its coloring",
            {"mapping": list(mapping), "color": color},
        )
    return outcome


def run_trial(
    blowup: Blowup,
    pattern: Graph,
    clean_kind: str = "regularity",
    embed_kind: str = "greedy",
    adversary: AdversaryStrategy = AdversaryStrategy.UNIFORM,
    seed: int = 0,
    config: Optional[PipelineConfig] = None,
    trial: int = 0,
    gadget: Optional[GadgetCertificate] = None,
    base_arrows: bool = False,
    a_side: Optional[Sequence[int]] = None,
) -> TrialReport:
    """
    One pass: adversary coloring, cleaning, monochromatic base copy, embedding

    Stage failures (exhausted searches and budgets) end the trial and are
    recorded; invariant violations are recorded as such. With embed_kind
    "lll" the embedded graph is the complete w-blowup of the pattern.

    Args:
        blowup: Blowup G' of the base host
        pattern: Pattern H on its own vertex labels
        clean_kind: "regularity" or "drc"
        embed_kind: "greedy" or "lll"
        adversary: Coloring strategy
        seed: Trial seed, every stage derives its own stream from it
        config: Stage parameters; defaults throughout when omitted
        trial: Trial index recorded in the report
        gadget: Certificate of the installed gadget
        base_arrows: The base host was verified to arrow the pattern
        a_side: Side A of a bipartite base

    Returns:
        TrialReport; success implies the final verification passed
    """
    if clean_kind not in ("regularity", "drc") or embed_kind not in ("greedy", "lll"):
        raise InvalidInputError(f"unknown trial kind {clean_kind}/{embed_kind}")
    config = config or PipelineConfig(pattern=graph_to_model(pattern))
    adversary = AdversaryStrategy(adversary)
    q, p = config.q, config.gadget.p
    base = blowup.base
    timings: Optional[Dict[str, float]] = {} if config.include_timings else None
    report = TrialReport(trial=trial, seed=seed, adversary=adversary.value)
    gadget_L = gadget.params_claimed.L if gadget is not None else 1
    report.regime_flags["gadget_exact"] = bool(gadget and gadget.valid)

    stage = "coloring"
    try:
        with stage_timer("pipeline.coloring", timings):
            coloring = trial_coloring(blowup, adversary, q, seed)
        report.color_class_sizes = [
            coloring.class_graph(c).edge_count for c in range(q)
        ]

        stage = "cleaning"
        with stage_timer("pipeline.cleaning", timings):
            if clean_kind == "regularity":
                outcome = regularity_clean(
                    blowup,
                    coloring,
                    p,
                    q,
                    config.cleaning.eta,
                    shrink=config.cleaning.shrink,
                    seed=derive_seed(seed, "cleaning"),
                    max_attempts=config.cleaning.max_attempts,
                )
            else:
                w = config.w or 1
                outcome = drc_clean(
                    blowup,
                    coloring,
                    r=config.cleaning.r or max(1, pattern.max_degree * w),
                    q=q,
                    L=config.cleaning.L or gadget_L,
                    p=p,
                    seed=derive_seed(seed, "cleaning"),
                    a_side=a_side,
                    h=config.cleaning.h,
                    max_attempts=config.cleaning.max_attempts,
                )
        report.cleaning = outcome.to_model()
        report.regime_flags["cleaning_certified"] = outcome.all_certified
        for name, value in outcome.flags.items():
            report.regime_flags[f"cleaning_{name}"] = value

        stage = "base-copy"
        with stage_timer("pipeline.base-copy", timings):
            copy, color = monochromatic_copy(outcome.aux_coloring, pattern)
        if copy is None:
            if base_arrows:
                raise InvariantViolation(
                    "no monochromatic copy in the auxiliary coloring "
                    "of an arrowing host"
                )
            report.failure_stage = stage
            report.failure_reason = "no monochromatic copy in the auxiliary coloring"
            return report
        report.base_copy = list(copy)
        report.base_color = color

        stage = "embedding"
        certified = bool(gadget and gadget.valid) and outcome.all_certified
        with stage_timer("pipeline.embedding", timings):
            embedded = embed_cleaned(
                blowup,
                coloring,
                pattern,
                outcome.trimmed_parts,
                copy,
                color,
                embed_kind=embed_kind,
                config=config,
                gadget_L=gadget_L,
                cleaned_L=_cleaned_L(outcome, gadget_L),
                certified=certified,
                seed=seed,
                a_side=a_side,
            )
        report.trace = embedded.trace
        report.feasibility = embedded.feasibility
        report.embedding = embedded.embedding
        if embedded.trace is not None:
            flags = report.regime_flags
            flags["hypotheses_certified"] = embedded.trace.hypotheses_certified
            flags["feasible"] = embedded.feasible
            flags["law_enforced"] = embedded.trace.law_enforced
        if not embedded.success:
            report.failure_stage = stage
            report.failure_reason = embedded.failure_reason
            return report
        report.verified = True
        report.success = True
    except InvariantViolation as e:
        logger.error("trial %d: invariant violation at %s: %s", trial, stage, e.message)
        report.invariant_violation = e.message
        report.failure_stage = stage
        report.failure_reason = e.message
    except (SearchExhaustedError, BudgetExceededError) as e:
        logger.debug("trial %d failed at %s: %s", trial, stage, e.message)
        report.failure_stage = stage
        report.failure_reason = e.message
    finally:
        if timings is not None:
            report.timings = {name: round(t, 6) for name, t in sorted(timings.items())}
    return report


def _trial_job(kwargs: Dict[str, Any]) -> TrialReport:
    return run_trial(**kwargs)


# Closure
def closure_check(
    blowup: Blowup, target: Graph, q: int, reports: Sequence[TrialReport]
) -> ClosureReport:
    """
    Decide G' ->_ind (target)_q over all colorings when it fits the budget,
    and check each sampled adversary coloring for an induced monochromatic copy
    """
    try:
        with stage_timer("pipeline.closure"):
            verdict = arrows(blowup.host, target, q, CopyMode.INDUCED)
    except BudgetExceededError:
        return ClosureReport(decided=False, skipped="budget")

    with_copy = 0
    for report in reports:
        coloring = trial_coloring(blowup, report.adversary, q, report.seed)
        copy = find_copy(blowup.host, target, CopyMode.INDUCED, coloring=coloring)
        if copy is not None:
            with_copy += 1
    successes = sum(1 for r in reports if r.success)
    consistent = with_copy >= successes and (
        not verdict.arrows or with_copy == len(reports)
    )
    return ClosureReport(
        decided=True,
        arrows_induced=verdict.arrows,
        sampled=len(reports),
        sampled_with_copy=with_copy,
        consistent=consistent,
    )


# Reductions
def _run_trials(
    blowup: Blowup,
    pattern: Graph,
    config: PipelineConfig,
    kinds: Tuple[str, str],
    gadget: GadgetCertificate,
    base_arrows: bool,
    a_side: Optional[Sequence[int]],
    jobs: int,
) -> List[TrialReport]:
    adversaries = config.adversaries or [AdversaryStrategy.UNIFORM]
    tasks = [
        dict(
            blowup=blowup,
            pattern=pattern,
            clean_kind=kinds[0],
            embed_kind=kinds[1],
            adversary=adversaries[i % len(adversaries)],
            seed=derive_seed(config.seed, "trial", i),
            config=config,
            trial=i,
            gadget=gadget,
            base_arrows=base_arrows,
            a_side=a_side,
        )
        for i in range(config.trials)
    ]
    return map_ordered(_trial_job, tasks, jobs=jobs)


def _summarize(
    reduction: str,
    config: PipelineConfig,
    host: Graph,
    host_verified: bool,
    blowup: Blowup,
    gadget: GadgetCertificate,
    s: int,
    constants: Dict[str, TheoryConstant],
    reports: List[TrialReport],
    closure: Optional[ClosureReport],
) -> PipelineSummary:
    successes = sum(1 for r in reports if r.success)
    stages = Counter(r.failure_stage for r in reports if r.failure_stage is not None)
    return PipelineSummary(
        reduction=reduction,
        config=config,
        host=graph_to_model(host),
        host_arrows_verified=host_verified,
        blowup=blowup_to_model(blowup),
        gadget_certificate=gadget,
        accounting=accounting(blowup, s),
        theory_constants=constants,
        trials=len(reports),
        successes=successes,
        failures=len(reports) - successes,
        invariant_violations=sum(1 for r in reports if r.invariant_violation),
        certified_trials=sum(
            1 for r in reports if r.regime_flags.get("hypotheses_certified")
        ),
        law_enforced_trials=sum(
            1 for r in reports if r.regime_flags.get("law_enforced")
        ),
        success_rate=successes / len(reports) if reports else 0.0,
        failure_stages=dict(sorted(stages.items())),
        closure=closure,
    )


def reduction_general(config: PipelineConfig, jobs: int = 1) -> PipelineResponse:
    """
    Blowup of an arrowing host with one shared s x s gadget on every edge, then
    trials of regularity cleaning and greedy induced embedding

    Args:
        config: Pipeline configuration; w must be unset
        jobs: Worker processes for the trials

    Returns:
        Summary (blowup, accounting, theoretical constants) and one report per trial
    """
    if config.w is not None:
        raise InvalidInputError("w is only used by the bipartite reduction")
    pattern = graph_from_model(config.pattern)
    host, verified = prepare_host(config, pattern)
    blowup, gadget = build_blowup(host, config)

    k, delta = pattern.max_degree, host.max_degree
    constants = (
        theory_constants_general(config.q, k, delta, config.C) if k + delta > 0 else {}
    )
    if constants:
        logger.info(
            "theoretical constants: rho=%s eta=%s; engineering p=%s s=%d",
            constants["rho"].value,
            constants["eta"].value,
            config.gadget.p,
            config.gadget.s,
        )

    reports = _run_trials(
        blowup, pattern, config, ("regularity", "greedy"), gadget, verified, None, jobs
    )
    closure = None
    if config.closure:
        closure = closure_check(blowup, pattern, config.q, reports)
    summary = _summarize(
        GENERAL,
        config,
        host,
        verified,
        blowup,
        gadget,
        config.gadget.s,
        constants,
        reports,
        closure,
    )
    logger.info(
        "general reduction: %d/%d trials succeeded, %d invariant violations",
        summary.successes,
        summary.trials,
        summary.invariant_violations,
    )
    return PipelineResponse(summary=summary, trials=reports)


def reduction_bipartite(config: PipelineConfig, jobs: int = 1) -> PipelineResponse:
    """
    Asymmetric blowup of a bipartite arrowing host (s on side A, s0 on side B),
    then trials of DRC cleaning and local-lemma embedding of the complete
    w-blowup of the pattern

    Args:
        config: Pipeline configuration with w set
        jobs: Worker processes for the trials

    Returns:
        Summary (blowup, accounting, theoretical constants) and one report per trial
    """
    if config.w is None:
        raise InvalidInputError("the bipartite reduction needs the blowup width w")
    pattern = graph_from_model(config.pattern)
    bipartition(pattern)
    host, verified = prepare_host(config, pattern, bipartite=True)
    a_side = bipartition(host)[0]
    blowup, gadget = build_blowup(host, config, a_side)

    k, delta = pattern.max_degree, host.max_degree
    constants = (
        theory_constants_bipartite(config.q, k, delta, config.w, config.C)
        if delta > 0
        else {}
    )
    reports = _run_trials(
        blowup, pattern, config, ("drc", "lll"), gadget, verified, a_side, jobs
    )
    closure = None
    if config.closure:
        closure = closure_check(
            blowup, complete_blowup(pattern, config.w)[0], config.q, reports
        )
    s = max(blowup.part_sizes, default=0)
    summary = _summarize(
        BIPARTITE,
        config,
        host,
        verified,
        blowup,
        gadget,
        s,
        constants,
        reports,
        closure,
    )
    logger.info(
        "bipartite reduction: %d/%d trials succeeded, %d invariant violations",
        summary.successes,
        summary.trials,
        summary.invariant_violations,
    )
    return PipelineResponse(summary=summary, trials=reports)


def run_pipeline(config: PipelineConfig, jobs: int = 1) -> PipelineResponse:
    """Bipartite reduction when w is set, general reduction otherwise"""
    if config.w is None:
        return reduction_general(config, jobs)
    return reduction_bipartite(config, jobs)
