"""
Service layer for the Induced Ramsey Workbench
Shared by the command line and the HTTP surface
"""

from pathlib import Path
from typing import Optional

from cleaning import drc_clean, regularity_clean
from edge_coloring import adversary_color, lll_avoid_mono_biclique, vizing_matchings
from errors import InvalidInputError
from gadgets import GadgetGenerator, pair_to_block
from graph_core import (
    BipartitePair,
    bipartition,
    blowup_from_model,
    blowup_to_model,
    coloring_from_model,
    coloring_to_model,
    graph_from_model,
    graph_to_model,
    verify_blowup,
)
from models import (
    AdversaryStrategy,
    ArrowQuery,
    ArrowResult,
    BipartiteBlockModel,
    BlowupModel,
    BlowupRequest,
    BlowupResponse,
    BlowupVerdict,
    CleaningOutcomeModel,
    CleaningSpec,
    ColoringModel,
    ColoringResponse,
    DenseGraphResponse,
    EmbeddingSpec,
    EmbedResponse,
    GadgetRequest,
    GadgetResponse,
    GadgetSpec,
    GraphModel,
    HostSearchRequest,
    HostSearchResult,
    PipelineConfig,
    PipelineResponse,
    RegularityParams,
    RegularityVerdict,
    VerifyBlowupRequest,
)
from oracles import arrows_query, search_host
from pipeline import (
    accounting,
    build_blowup,
    embed_cleaned,
    monochromatic_copy,
    run_pipeline,
)
from regularity import check_regularity
from settings import get_logger

logger = get_logger("services")


class ArrowService:
    """Service for arrow queries"""

    @staticmethod
    def check(query: ArrowQuery, jobs: int = 1) -> ArrowResult:
        """Decide the coloring or density arrow of a query"""
        return arrows_query(query, jobs=jobs)


class GadgetService:
    """Service for certified gadgets and pseudorandom graphs"""

    @staticmethod
    def generate(request: GadgetRequest, jobs: int = 1) -> GadgetResponse:
        """Sample and certify an (L, p)-regular a x b gadget"""
        generator = GadgetGenerator(request.seed)
        pair, certificate = generator.generate_regular_gadget(
            request.a,
            request.b,
            request.p,
            target_L=request.target_L,
            max_attempts=request.max_attempts,
            source=request.source,
            mode=request.mode,
            refute_trials=request.refute_trials,
            jobs=jobs,
        )
        return GadgetResponse(gadget=pair_to_block(pair), certificate=certificate)

    @staticmethod
    def load(
        path: Path,
        params: RegularityParams,
        refute_trials: int = 200,
        seed: int = 0,
        jobs: int = 1,
    ) -> GadgetResponse:
        """Certify an externally supplied gadget"""
        pair, certificate = GadgetGenerator(seed).from_file(
            path, params, refute_trials=refute_trials, jobs=jobs
        )
        return GadgetResponse(gadget=pair_to_block(pair), certificate=certificate)

    @staticmethod
    def dense_graph(
        n: int, p, t: int, eps, seed: int = 0, max_attempts: int = 100
    ) -> DenseGraphResponse:
        """Sample G(n, p) with the density condition on disjoint t-sets certified"""
        graph, certificate = GadgetGenerator(seed).generate_dense_pseudorandom_graph(
            n, p, t, eps, max_attempts=max_attempts
        )
        return DenseGraphResponse(graph=graph_to_model(graph), certificate=certificate)

    @staticmethod
    def verify(
        block: BipartiteBlockModel,
        params: RegularityParams,
        refute_trials: int = 200,
        seed: int = 0,
    ) -> RegularityVerdict:
        """Re-check a gadget: exact within the cap, sampled refutation beyond it"""
        if len(block.rows) != block.a:
            raise InvalidInputError(
                f"gadget declares a={block.a} but has {len(block.rows)} rows"
            )
        pair = BipartitePair.from_rows(block.rows, block.b)
        return check_regularity(pair, params, trials=refute_trials, seed=seed)


class BlowupService:
    """Service for gadget blowups"""

    @staticmethod
    def build(request: BlowupRequest) -> BlowupResponse:
        """Install one certified gadget on every edge of the base graph"""
        base = graph_from_model(request.base)
        a_side = list(bipartition(base)[0]) if request.bipartite else None
        config = PipelineConfig(
            pattern=GraphModel(n=0), gadget=request.gadget, seed=request.seed
        )
        blowup, certificate = build_blowup(base, config, a_side)
        return BlowupResponse(
            blowup=blowup_to_model(blowup),
            certificate=certificate,
            accounting=accounting(blowup, max(blowup.part_sizes, default=0)),
            a_side=a_side,
            seed=request.seed,
        )

    @staticmethod
    def verify(request: VerifyBlowupRequest) -> BlowupVerdict:
        """Check that a blowup document is an s-blowup of its base"""
        return verify_blowup(blowup_from_model(request.blowup), request.s)


class ColoringService:
    """Service for adversary, proper and biclique-avoiding colorings"""

    @staticmethod
    def adversary(
        blowup: BlowupModel, strategy: AdversaryStrategy, q: int, seed: int = 0
    ) -> ColoringResponse:
        """Color the blowup host with a named adversary strategy"""
        coloring = adversary_color(blowup_from_model(blowup), strategy, q, seed=seed)
        return ColoringResponse(coloring=coloring_to_model(coloring), seed=seed)

    @staticmethod
    def vizing(graph: GraphModel) -> ColoringResponse:
        """Proper edge coloring with at most Delta+1 matchings"""
        decomposition = vizing_matchings(graph_from_model(graph))
        return ColoringResponse(
            coloring=coloring_to_model(decomposition.to_coloring()),
            matchings=decomposition.to_model(),
        )

    @staticmethod
    def avoid_biclique(
        graph: GraphModel, w: int, max_resample: int = 1000, seed: int = 0
    ) -> ColoringResponse:
        """2-coloring without a monochromatic K_{w,w}"""
        coloring, report = lll_avoid_mono_biclique(
            graph_from_model(graph), w, max_resample=max_resample, seed=seed
        )
        return ColoringResponse(
            coloring=coloring_to_model(coloring), seed=seed, report=report
        )


class CleaningService:
    """Service for cleaning a colored blowup down to an auxiliary base coloring"""

    @staticmethod
    def clean(
        blowup: BlowupModel,
        coloring: ColoringModel,
        kind: str = "regularity",
        p=None,
        spec: Optional[CleaningSpec] = None,
        w: int = 1,
        pattern_degree: int = 1,
        seed: int = 0,
    ) -> CleaningOutcomeModel:
        """
        Run regularity or DRC cleaning on a colored blowup

        Args:
            blowup: Blowup document
            coloring: Coloring of the blowup host
            kind: "regularity" or "drc"
            p: Regularity density of the installed gadgets
            spec: Cleaning parameters
            w: Blowup width; DRC uses r = k * w unless spec.r is given
            pattern_degree: Max degree k of the pattern
            seed: Root seed

        Returns:
            CleaningOutcomeModel with its certificates
        """
        spec = spec or CleaningSpec()
        p = GadgetSpec().p if p is None else p
        b = blowup_from_model(blowup)
        colors = coloring_from_model(b.host, coloring)
        if kind == "regularity":
            outcome = regularity_clean(
                b,
                colors,
                p,
                coloring.q,
                spec.eta,
                shrink=spec.shrink,
                seed=seed,
                max_attempts=spec.max_attempts,
            )
        elif kind == "drc":
            if spec.L is None:
                raise InvalidInputError("DRC cleaning needs the block threshold L")
            outcome = drc_clean(
                b,
                colors,
                r=spec.r or max(1, pattern_degree * w),
                q=coloring.q,
                L=spec.L,
                p=p,
                seed=seed,
                h=spec.h,
                max_attempts=spec.max_attempts,
            )
        else:
            raise InvalidInputError(f"unknown cleaning kind {kind!r}")
        return outcome.to_model()


class EmbeddingService:
    """Service for embedding a pattern back into a cleaned blowup"""

    @staticmethod
    def embed(
        blowup: BlowupModel,
        coloring: ColoringModel,
        cleaning: CleaningOutcomeModel,
        pattern: GraphModel,
        kind: str = "greedy",
        spec: Optional[EmbeddingSpec] = None,
        p=None,
        L: int = 1,
        w: Optional[int] = None,
        seed: int = 0,
    ) -> EmbedResponse:
        """
        Find a monochromatic copy in the auxiliary coloring and embed it into G'

        The copy is searched in every color of the auxiliary coloring. With
        kind "lll" the complete w-blowup of the pattern is embedded.
        """
        b = blowup_from_model(blowup)
        h = graph_from_model(pattern)
        colors = coloring_from_model(b.host, coloring)
        aux = coloring_from_model(b.base, cleaning.aux_coloring)
        copy, color = monochromatic_copy(aux, h)
        if copy is None:
            return EmbedResponse(
                failure_reason="no monochromatic copy in the auxiliary coloring",
                seed=seed,
            )
        config = PipelineConfig(
            pattern=pattern,
            w=w,
            q=coloring.q,
            gadget=GadgetSpec() if p is None else GadgetSpec(p=p),
            embedding=spec or EmbeddingSpec(),
            seed=seed,
        )
        verdicts = cleaning.regularity_certificates.values()
        levels = [v.L for v in verdicts if v.L is not None]
        outcome = embed_cleaned(
            b,
            colors,
            h,
            cleaning.trimmed_parts,
            copy,
            color,
            embed_kind=kind,
            config=config,
            gadget_L=L,
            cleaned_L=max(levels, default=L),
            certified=cleaning.all_certified,
            seed=seed,
        )
        logger.info("embedding %s: success=%s", kind, outcome.success)
        return EmbedResponse(
            base_copy=list(copy),
            base_color=color,
            embedding=outcome.embedding,
            trace=outcome.trace,
            feasibility=outcome.feasibility,
            success=outcome.success,
            failure_reason=outcome.failure_reason,
            seed=seed,
        )


class HostService:
    """Service for base host search"""

    @staticmethod
    def search(request: HostSearchRequest) -> HostSearchResult:
        """Smallest arrowing host among the enumerated candidate families"""
        return search_host(
            graph_from_model(request.pattern),
            request.q,
            request.mode,
            request.max_vertices,
            request.degree_cap,
            request.seeds_per_size,
            seed=request.seed,
            bipartite=request.bipartite,
        )


class PipelineService:
    """Service for the end-to-end reductions"""

    @staticmethod
    def run(config: PipelineConfig, jobs: int = 1) -> PipelineResponse:
        """Run the general or, with w set, the bipartite reduction"""
        return run_pipeline(config, jobs=jobs)
