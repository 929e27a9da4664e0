import json
from enum import Enum
from fractions import Fraction
from typing import Annotated, Any, Dict, List, Optional, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PlainSerializer,
    PlainValidator,
    field_validator,
    model_validator,
)
from pydantic.json_schema import WithJsonSchema


def parse_rational(value: Any) -> Fraction:
    """Exact rational from int, decimal float, "a/b" string or Fraction"""
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not a rational number: {value!r}") from e
    raise ValueError(f"expected a number, got {type(value).__name__}")


# Exact rationals travel as strings such as "4/5"
Rational = Annotated[
    Fraction,
    PlainValidator(parse_rational),
    PlainSerializer(lambda f: str(f), return_type=str),
    WithJsonSchema(
        {
            "type": "string",
            "pattern": r"^-?\d+(/\d+)?$",
            "description": "exact rational",
        }
    ),
]


def canonical_json(obj: Any) -> str:
    """Byte-stable JSON: sorted keys, no whitespace"""
    if isinstance(obj, BaseModel):
        obj = obj.model_dump(mode="json")
    elif isinstance(obj, list):
        obj = [
            o.model_dump(mode="json") if isinstance(o, BaseModel) else o for o in obj
        ]
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class RegularityMode(str, Enum):
    TWO_SIDED = "two-sided"
    LOWER_ONLY = "lower-only"


class VerdictStatus(str, Enum):
    CERTIFIED = "certified-regular"
    REFUTED = "refuted"
    INCONCLUSIVE = "inconclusive"


class Side(str, Enum):
    X = "X"
    Y = "Y"


class GadgetSource(str, Enum):
    DIRECT = "direct"
    AMBIENT = "ambient"
    FILE = "file"


class AdversaryStrategy(str, Enum):
    UNIFORM = "uniform-random"
    PER_BASE_EDGE_MAJORITY = "per-base-edge-majority"
    PART_INDEX_PARITY = "part-index-parity"
    HALF_SPLIT = "half-split-within-block"


class CopyMode(str, Enum):
    SUBGRAPH = "subgraph"
    INDUCED = "induced"


# Graph documents
class GraphModel(BaseModel):
    n: int = Field(..., ge=0, description="Vertex count; vertices are 0..n-1")
    edges: List[Tuple[int, int]] = Field(
        default_factory=list, description="Undirected edges as vertex pairs"
    )


class BlowupModel(BaseModel):
    base: GraphModel
    part_sizes: List[int] = Field(..., description="Part size per base vertex")
    blocks: Dict[str, List[int]] = Field(
        default_factory=dict,
        description="Per base edge 'u-v' (u<v): row bitmasks of X_u over X_v",
    )


class BipartiteBlockModel(BaseModel):
    a: int = Field(..., ge=0, description="Row count (X side)")
    b: int = Field(..., ge=0, description="Column count (Y side)")
    rows: List[int] = Field(..., description="Row bitmasks over the b columns")


class ColoringModel(BaseModel):
    q: int = Field(..., ge=1, description="Number of colors")
    colors: Dict[str, int] = Field(..., description="Color per edge 'u-v'")


class BlowupVerdict(BaseModel):
    ok: bool
    s: int = Field(..., description="Part-size bound checked")
    violations: List[str] = Field(default_factory=list)
    offending_edges: List[Tuple[int, int]] = Field(default_factory=list)


# Regularity
class RegularityParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: int = Field(..., ge=1, description="Size threshold")
    p: Rational = Field(..., description="Density parameter in (0, 1]")
    mode: RegularityMode = RegularityMode.TWO_SIDED

    @field_validator("p")
    @classmethod
    def _p_in_range(cls, p: Fraction) -> Fraction:
        if not 0 < p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {p}")
        return p


class RegularityWitness(BaseModel):
    side: Side = Field(..., description="Side the subset X' is drawn from")
    subset: List[int] = Field(..., description="Subset X' (sorted host vertices)")
    offending: List[int] = Field(
        ..., description="Opposite-side vertices outside the degree window"
    )


class DensityWitness(BaseModel):
    x_set: List[int]
    y_set: List[int]
    edges: int
    expected: Rational = Field(..., description="p*t^2")


class RegularityVerdict(BaseModel):
    status: VerdictStatus
    method: str = Field(..., description="exact, sampled or enumeration")
    p: Rational
    L: Optional[int] = None
    mode: Optional[RegularityMode] = None
    t: Optional[int] = None
    eps: Optional[Rational] = None
    witness: Optional[RegularityWitness] = None
    density_witness: Optional[DensityWitness] = None
    max_deviation: Optional[Rational] = None
    checked: int = Field(default=0, description="Subsets or set pairs examined")

    @property
    def certified(self) -> bool:
        return self.status == VerdictStatus.CERTIFIED


# Gadgets
class GadgetCertificate(BaseModel):
    params_claimed: RegularityParams
    verification: RegularityVerdict
    attempts_used: int
    seed: int
    source: GadgetSource
    valid: bool = Field(..., description="True only for an exact certified verdict")
    theory_threshold_L: int
    theory_threshold_vacuous: bool
    formula: str = "ceil((48/p) * ln(a+b))"
    ambient_t: float = Field(
        ..., description="t = (24/p) ln(a+b) used by the ambient proof"
    )
    ambient_t_formula: str = "(24/p) * ln(a+b)"


class DensityCertificate(BaseModel):
    verification: RegularityVerdict
    attempts_used: int
    seed: int
    regime_bound: float = Field(..., description="exp(t*eps^2*p/6)")
    in_guaranteed_regime: bool
    formula: str = "n <= exp(t * eps^2 * p / 6)"


class GadgetResponse(BaseModel):
    gadget: BipartiteBlockModel
    certificate: GadgetCertificate


class DenseGraphResponse(BaseModel):
    graph: GraphModel
    certificate: DensityCertificate


# Edge coloring
class MatchingsModel(BaseModel):
    matchings: List[List[Tuple[int, int]]] = Field(
        ..., description="Matchings M_Delta..M_0, empty classes dropped"
    )
    max_degree: int


class BicliqueColoringReport(BaseModel):
    w: int
    events: int = Field(..., description="K_{w,w} copies enumerated")
    dependency_degree: int
    log2_event_probability: int = Field(..., description="1 - w^2")
    lll_condition_value: float = Field(..., description="e * (D+1) * 2^(1-w^2)")
    in_guaranteed_regime: bool
    resamples: int
    monochromatic_copies: int
    verified: bool
    max_degree: int
    theory_degree_bound: float = Field(..., description="2^(w/2)")
    formula: Dict[str, str] = Field(
        default_factory=lambda: {
            "event_probability": "2^(1-w^2)",
            "condition": "e*(D+1)*p < 1",
            "degree_bound": "2^(w/2)",
        }
    )


class ColoringResponse(BaseModel):
    coloring: ColoringModel
    seed: Optional[int] = None
    matchings: Optional[MatchingsModel] = None
    report: Optional[BicliqueColoringReport] = None


# Dependent random choice
class DrcBoundCheck(BaseModel):
    h: int
    density: Rational
    fraction: Rational = Field(
        ..., description="Share of h-tuples with a large common neighborhood"
    )
    threshold: Rational = Field(..., description="p^h / 2")
    holds: bool
    tuples: int


class SimDrcOutcome(BaseModel):
    subsets: List[List[int]]
    picked: List[int]
    good_certified: bool
    bad_refuted: bool
    bad_check_exhaustive: bool
    attempts_used: int
    seed: int
    in_guaranteed_regime: bool
    feasibility_log2_lhs: float
    feasibility_log2_rhs: float
    formula: str = "p^(h*l)/2 > |Y|^r * |X|^(-h/2)"


# Cleaning
class TowerLevel(BaseModel):
    t: int
    neg_log2_eps: Optional[str] = Field(
        None, description="-log2 eps_t, absent on overflow"
    )
    log2_neg_log2_lambda: str = Field(..., description="log2(-log2 lambda_t)")
    recursion_holds: Optional[bool] = None


class CleaningConstants(BaseModel):
    q: int
    delta: int
    p: Rational
    eta: Rational
    log2_lambda_matching: float
    log2_lambda_matching_half: float
    tower: List[TowerLevel]
    log2_neg_log2_lambda_tower: str
    tower_overflow: bool
    formula: Dict[str, str] = Field(
        default_factory=lambda: {
            "lambda_matching": "(p/2q)^(13/eta)",
            "lambda_matching_half": "1/2 * (p/2q)^(12/eta)",
            "lambda_tower": "prod_t (p/2q)^(13/eps_t), eps_{t+1} = eps_t * lambda_t",
            "recursion": "eps_t*lambda_t >= (p/2q)^(14/eps_t)",
        }
    )


class PairSearchResult(BaseModel):
    x_subset: List[int]
    y_subset: List[int]
    verdict: RegularityVerdict
    method: str
    attempts: int
    theory_target_size: float = Field(..., description="n' = 1/2 n p^(12/eps)")
    formula: str = "1/2 * n * p^(12/eps)"


class NeighborhoodCertificate(BaseModel):
    a: int
    x_star_size: int
    colors: Dict[str, int] = Field(..., description="Aux color per star edge 'a-b'")
    min_common: Optional[int] = None
    required_squared: Rational = Field(..., description="|X_a| / (2 q^Delta)")
    tuples_checked: int
    exhaustive: bool
    holds: bool


class ShrinkLogEntry(BaseModel):
    stage: str
    sizes: List[int]
    factor: Optional[str] = None
    note: Optional[str] = None


class CleaningOutcomeModel(BaseModel):
    kind: str
    aux_coloring: ColoringModel
    trimmed_parts: List[List[int]]
    regularity_certificates: Dict[str, RegularityVerdict] = Field(default_factory=dict)
    neighborhood_certificates: Dict[str, NeighborhoodCertificate] = Field(
        default_factory=dict
    )
    shrink_log: List[ShrinkLogEntry] = Field(default_factory=list)
    all_certified: bool
    flags: Dict[str, bool] = Field(default_factory=dict)
    constants: Optional[CleaningConstants] = None


# Embedding
class EmbedParams(BaseModel):
    s_star: int = Field(..., ge=1)
    L: Rational = Field(..., description="Regularity threshold of G*")
    L_prime: Rational = Field(..., description="Lower-regularity threshold of H*")
    p: Rational
    rho: Rational
    k: int = Field(..., ge=0, description="Max degree of H")
    delta: int = Field(..., ge=0, description="Max degree of G")
    w: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "EmbedParams":
        if self.L < 0 or self.L_prime < 0:
            raise ValueError("L and L_prime must be non-negative")
        if not 0 < self.p <= 1 or not 0 < self.rho <= 1:
            raise ValueError("p and rho must lie in (0, 1]")
        return self


class FeasibilityReport(BaseModel):
    greedy_holds: bool
    greedy_lhs: Rational = Field(..., description="s*(rho/2)^k max(0,1-2p)^Delta")
    greedy_rhs: Rational = Field(..., description="Delta*L + k*L'")
    greedy_slack: Rational
    lll_holds: Optional[bool] = None
    lll_lhs: Optional[str] = Field(None, description="w*Delta*L/s*")
    lll_rhs: Optional[str] = Field(None, description="1/(e(w*Delta^2+1))")
    lll_slack: Optional[str] = None
    formula: Dict[str, str] = Field(
        default_factory=lambda: {
            "greedy": "s*(rho/2)^k (1-2p)^Delta > Delta*L + k*L'",
            "lll": "w*Delta*L/s* <= 1/(e(w*Delta^2+1))",
        }
    )


class LawViolation(BaseModel):
    step: int
    i: int
    size: int
    bound: Rational


class EmbedTrace(BaseModel):
    algorithm: str
    order: List[int]
    chosen: List[int] = Field(default_factory=list)
    candidate_sizes: List[List[Optional[int]]] = Field(default_factory=list)
    bad_set_sizes: List[int] = Field(default_factory=list)
    fallback_steps: List[int] = Field(default_factory=list)
    law_violations: List[LawViolation] = Field(default_factory=list)
    failure_step: Optional[int] = None
    failure_reason: Optional[str] = None
    resamples: int = 0
    surviving_bad_events: Optional[int] = None
    t_set_sizes: Dict[str, int] = Field(default_factory=dict)
    hypotheses_certified: bool = False
    law_enforced: bool = False


class EmbeddingModel(BaseModel):
    pattern: GraphModel
    mapping: List[int]
    claimed_color: Optional[int] = None
    verified: bool


class BadEventAudit(BaseModel):
    samples: int
    frequencies: Dict[str, float]
    max_frequency: float
    bound: float = Field(..., description="w*Delta*L/s*")
    sigma: float
    within_bound: bool
    formula: str = "P(E_aj) <= w*Delta*L/s*"


# Oracles
class ArrowQuery(BaseModel):
    host: GraphModel
    pattern: GraphModel
    q: Optional[int] = Field(None, ge=1)
    gamma: Optional[Rational] = None
    mode: CopyMode = CopyMode.SUBGRAPH


class ArrowResult(BaseModel):
    arrows: bool
    mode: CopyMode
    q: Optional[int] = None
    gamma: Optional[Rational] = None
    counterexample: Optional[ColoringModel] = None
    counterexample_subgraph: Optional[GraphModel] = None
    colorings_checked: int


class HostSearchEntry(BaseModel):
    family: str
    n: int
    edges: int
    seed: Optional[int] = None
    arrows: Optional[bool] = None
    skipped: Optional[str] = None


class HostSearchRequest(BaseModel):
    pattern: GraphModel
    q: int = Field(2, ge=1)
    mode: CopyMode = CopyMode.SUBGRAPH
    max_vertices: int = Field(6, ge=1)
    degree_cap: Optional[int] = Field(None, ge=1)
    seeds_per_size: int = Field(3, ge=0)
    seed: int = 0
    bipartite: bool = False


class HostSearchResult(BaseModel):
    found: Optional[GraphModel] = None
    family: Optional[str] = None
    log: List[HostSearchEntry] = Field(default_factory=list)


class DegreePruneReport(BaseModel):
    graph: GraphModel
    kept: List[int]
    k: int
    D: int
    degree_bound: int = Field(..., description="4kD")
    max_degree: int
    n: Optional[int] = None
    vertex_bound: Optional[int] = Field(None, description="2Dn")
    within_vertex_bound: Optional[bool] = None
    arrows_checked: Optional[bool] = None
    arrows: Optional[bool] = None
    formula: Dict[str, str] = Field(
        default_factory=lambda: {"degree_bound": "4kD", "vertex_bound": "2Dn"}
    )


# Pipeline
class HostSearchSpec(BaseModel):
    max_vertices: int = Field(6, ge=1)
    degree_cap: Optional[int] = None
    seeds_per_size: int = 3


class GadgetSpec(BaseModel):
    p: Rational = Fraction(4, 5)
    target_L: Optional[int] = Field(None, ge=1)
    s: int = Field(
        16, ge=1, description="Part size (A side in the bipartite reduction)"
    )
    s0: Optional[int] = Field(None, ge=1, description="B-side part size")
    source: GadgetSource = GadgetSource.DIRECT
    max_attempts: int = Field(50, ge=1)
    refute_trials: int = Field(200, ge=0)


class CleaningSpec(BaseModel):
    eta: Rational = Fraction(1, 2)
    shrink: Rational = Fraction(1, 2)
    r: Optional[int] = Field(None, ge=1)
    h: Optional[int] = Field(None, ge=1)
    L: Optional[int] = Field(
        None, ge=1, description="Regularity threshold for DRC cleaning"
    )
    max_attempts: int = Field(200, ge=1)


class EmbeddingSpec(BaseModel):
    order: Optional[List[int]] = None
    s_star: Optional[int] = Field(None, ge=1)
    L: Optional[Rational] = None
    L_prime: Optional[Rational] = None
    rho: Optional[Rational] = None
    max_resample: int = Field(1000, ge=0)


class PipelineConfig(BaseModel):
    pattern: GraphModel
    w: Optional[int] = Field(
        None, ge=1, description="Blowup width for the bipartite reduction"
    )
    host: Optional[GraphModel] = None
    host_search: HostSearchSpec = Field(default_factory=HostSearchSpec)
    host_trusted: bool = False
    q: int = Field(2, ge=1)
    gadget: GadgetSpec = Field(default_factory=GadgetSpec)
    cleaning: CleaningSpec = Field(default_factory=CleaningSpec)
    embedding: EmbeddingSpec = Field(default_factory=EmbeddingSpec)
    adversaries: List[AdversaryStrategy] = Field(
        default_factory=lambda: [AdversaryStrategy.UNIFORM]
    )
    trials: int = Field(10, ge=0)
    seed: int = 0
    C: Rational = Fraction(1)
    closure: bool = False
    include_timings: bool = False


class TheoryConstant(BaseModel):
    value: Optional[float] = None
    log2_value: Optional[str] = None
    log2_log2_value: Optional[str] = None
    formula: str


class TrialReport(BaseModel):
    kind: str = "trial"
    trial: int
    seed: int
    adversary: str
    color_class_sizes: List[int] = Field(default_factory=list)
    cleaning: Optional[CleaningOutcomeModel] = None
    base_copy: Optional[List[int]] = None
    base_color: Optional[int] = None
    embedding: Optional[EmbeddingModel] = None
    trace: Optional[EmbedTrace] = None
    feasibility: Optional[FeasibilityReport] = None
    success: bool = False
    verified: bool = False
    failure_stage: Optional[str] = None
    failure_reason: Optional[str] = None
    invariant_violation: Optional[str] = None
    regime_flags: Dict[str, bool] = Field(default_factory=dict)
    timings: Optional[Dict[str, float]] = None


class Accounting(BaseModel):
    host_vertices: int
    sum_part_sizes: int
    host_edges: int
    sum_block_edges: int
    identities_hold: bool
    s: int
    vertex_bound: int = Field(..., description="s * |V(G)|")
    edge_bound: int = Field(..., description="s^2 * e(G)")
    within_bounds: bool


class ClosureReport(BaseModel):
    decided: bool
    arrows_induced: Optional[bool] = None
    skipped: Optional[str] = None
    sampled: int = 0
    sampled_with_copy: int = 0
    consistent: Optional[bool] = None


class PipelineSummary(BaseModel):
    kind: str = "summary"
    reduction: str
    config: PipelineConfig
    host: GraphModel
    host_arrows_verified: bool
    blowup: BlowupModel
    gadget_certificate: GadgetCertificate
    accounting: Accounting
    theory_constants: Dict[str, TheoryConstant]
    trials: int
    successes: int
    failures: int
    invariant_violations: int
    certified_trials: int = Field(
        0, description="Trials whose embedding ran under certified hypotheses"
    )
    law_enforced_trials: int = Field(
        0, description="Certified trials that kept the candidate-size law armed"
    )
    success_rate: float
    failure_stages: Dict[str, int]
    closure: Optional[ClosureReport] = None


class PipelineResponse(BaseModel):
    summary: PipelineSummary
    trials: List[TrialReport]


# HTTP request bodies
class GadgetRequest(BaseModel):
    a: int = Field(..., ge=1)
    b: int = Field(..., ge=1)
    p: Rational
    target_L: Optional[int] = Field(None, ge=1)
    max_attempts: int = Field(50, ge=1)
    seed: int = 0
    source: GadgetSource = GadgetSource.DIRECT
    mode: RegularityMode = RegularityMode.TWO_SIDED
    refute_trials: int = Field(200, ge=0)


class BlowupRequest(BaseModel):
    base: GraphModel
    gadget: GadgetSpec = Field(default_factory=GadgetSpec)
    bipartite: bool = Field(
        False, description="Parts of size s on side A, s0 on side B"
    )
    seed: int = 0


class BlowupResponse(BaseModel):
    blowup: BlowupModel
    certificate: GadgetCertificate
    accounting: Accounting
    a_side: Optional[List[int]] = None
    seed: int


class EmbedResponse(BaseModel):
    base_copy: Optional[List[int]] = None
    base_color: Optional[int] = None
    embedding: Optional[EmbeddingModel] = None
    trace: Optional[EmbedTrace] = None
    feasibility: Optional[FeasibilityReport] = None
    success: bool = False
    failure_reason: Optional[str] = None
    seed: int


class VerifyBlowupRequest(BaseModel):
    blowup: BlowupModel
    s: int = Field(..., ge=0)


class ErrorResponse(BaseModel):
    error: str
    message: str
    detail: Dict[str, Any] = Field(default_factory=dict)


class HealthResponse(BaseModel):
    status: str
    timestamp: str
    uptime_seconds: float
    version: str
