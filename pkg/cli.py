#!/usr/bin/env python3
"""
Command-line surface of the Induced Ramsey Workbench

Every command reads JSON documents from files (or "-" for stdin), writes
canonical JSON to stdout and logs to stderr. Exit codes: 0 no invariant
violation, 1 a bug guard fired, 2 usage, schema or budget error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, List, Optional, Sequence, Type

from pydantic import BaseModel, ValidationError

import models
from errors import RamseyError, SearchExhaustedError, schema_errors
from graph_core import graph_from_model
from models import (
    AdversaryStrategy,
    ArrowQuery,
    BipartiteBlockModel,
    BlowupModel,
    BlowupRequest,
    CleaningOutcomeModel,
    CleaningSpec,
    ColoringModel,
    CopyMode,
    EmbeddingSpec,
    ErrorResponse,
    GadgetRequest,
    GadgetSource,
    GadgetSpec,
    GraphModel,
    HostSearchRequest,
    PipelineConfig,
    RegularityMode,
    RegularityParams,
    VerifyBlowupRequest,
    canonical_json,
    parse_rational,
)
from services import (
    ArrowService,
    BlowupService,
    CleaningService,
    ColoringService,
    EmbeddingService,
    GadgetService,
    HostService,
    PipelineService,
)
from settings import configure_logging, get_logger, report_dir

logger = get_logger("cli")


class UsageError(RamseyError):
    """Bad command-line arguments or unreadable input files"""

    kind = "usage"


def _rational(value: str):
    try:
        return parse_rational(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _read(path: str) -> Any:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
        return json.loads(text)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not JSON: {e}") from e


def load(path: str, model: Type[BaseModel], key: Optional[str] = None) -> Any:
    """
    Validate a JSON document against a model

    Outputs of earlier commands chain directly: when key is given and the
    document wraps the model under that key, the wrapped value is used.
    """
    data = _read(path)
    if key is not None and isinstance(data, dict) and isinstance(data.get(key), dict):
        data = data[key]
    return model.model_validate(data)


def emit(obj: Any) -> None:
    sys.stdout.write(canonical_json(obj) + "\n")


# Commands
def cmd_gadget(args: argparse.Namespace) -> int:
    if args.dense:
        if args.n is None or args.t is None or args.eps is None:
            raise UsageError("--dense needs --n, --t and --eps")
        emit(
            GadgetService.dense_graph(
                args.n,
                args.p,
                args.t,
                args.eps,
                seed=args.seed,
                max_attempts=args.max_attempts,
            )
        )
        return 0
    if args.file is not None:
        if args.L is None:
            raise UsageError("--file needs the regularity threshold --L")
        params = RegularityParams(L=args.L, p=args.p, mode=args.mode)
        emit(
            GadgetService.load(
                Path(args.file),
                params,
                refute_trials=args.refute_trials,
                seed=args.seed,
                jobs=args.jobs,
            )
        )
        return 0
    if args.a is None or args.b is None:
        raise UsageError("gadget needs --a and --b, --file or --dense")
    request = GadgetRequest(
        a=args.a,
        b=args.b,
        p=args.p,
        target_L=args.L,
        max_attempts=args.max_attempts,
        seed=args.seed,
        source=args.source,
        mode=args.mode,
        refute_trials=args.refute_trials,
    )
    emit(GadgetService.generate(request, jobs=args.jobs))
    return 0


def cmd_blowup(args: argparse.Namespace) -> int:
    request = BlowupRequest(
        base=load(args.base, GraphModel),
        gadget=GadgetSpec(
            p=args.p,
            target_L=args.L,
            s=args.s,
            s0=args.s0,
            source=args.source,
            max_attempts=args.max_attempts,
            refute_trials=args.refute_trials,
        ),
        bipartite=args.bipartite,
        seed=args.seed,
    )
    emit(BlowupService.build(request))
    return 0


def cmd_color(args: argparse.Namespace) -> int:
    if args.method == "adversary":
        if args.blowup is None:
            raise UsageError("adversary colorings need --blowup")
        blowup = load(args.blowup, BlowupModel, key="blowup")
        emit(ColoringService.adversary(blowup, args.strategy, args.q, seed=args.seed))
        return 0
    if args.graph is None:
        raise UsageError(f"{args.method} colorings need --graph")
    graph = load(args.graph, GraphModel)
    if args.method == "vizing":
        emit(ColoringService.vizing(graph))
    else:
        emit(
            ColoringService.avoid_biclique(
                graph, args.w, max_resample=args.max_resample, seed=args.seed
            )
        )
    return 0


def cmd_clean(args: argparse.Namespace) -> int:
    blowup = load(args.blowup, BlowupModel, key="blowup")
    coloring = load(args.coloring, ColoringModel, key="coloring")
    k = 1
    if args.pattern is not None:
        k = graph_from_model(load(args.pattern, GraphModel)).max_degree
    spec = CleaningSpec(
        eta=args.eta,
        shrink=args.shrink,
        r=args.r,
        h=args.h,
        L=args.L,
        max_attempts=args.max_attempts,
    )
    emit(
        CleaningService.clean(
            blowup,
            coloring,
            kind=args.kind,
            p=args.p,
            spec=spec,
            w=args.w,
            pattern_degree=k,
            seed=args.seed,
        )
    )
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    spec = EmbeddingSpec(
        s_star=args.s_star,
        rho=args.rho,
        max_resample=args.max_resample,
    )
    response = EmbeddingService.embed(
        load(args.blowup, BlowupModel, key="blowup"),
        load(args.coloring, ColoringModel, key="coloring"),
        load(args.cleaning, CleaningOutcomeModel),
        load(args.pattern, GraphModel),
        kind=args.kind,
        spec=spec,
        p=args.p,
        L=args.L,
        w=args.w,
        seed=args.seed,
    )
    emit(response)
    return 0


def cmd_arrows(args: argparse.Namespace) -> int:
    if (args.q is None) == (args.gamma is None):
        raise UsageError("arrows needs exactly one of --q and --gamma")
    query = ArrowQuery(
        host=load(args.host, GraphModel),
        pattern=load(args.pattern, GraphModel),
        q=args.q,
        gamma=args.gamma,
        mode=args.mode,
    )
    emit(ArrowService.check(query, jobs=args.jobs))
    return 0


def cmd_host_search(args: argparse.Namespace) -> int:
    request = HostSearchRequest(
        pattern=load(args.pattern, GraphModel),
        q=args.q,
        mode=args.mode,
        max_vertices=args.max_vertices,
        degree_cap=args.degree_cap,
        seeds_per_size=args.seeds_per_size,
        seed=args.seed,
        bipartite=args.bipartite,
    )
    emit(HostService.search(request))
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = load(args.config, PipelineConfig)
    if args.timings:
        config.include_timings = True
    try:
        response = PipelineService.run(config, jobs=args.jobs)
    except SearchExhaustedError as e:
        # an unsuccessful search is an empirical outcome, not a failure
        emit(ErrorResponse(**e.to_dict()))
        return 0

    lines = [canonical_json(response.summary)]
    lines.extend(canonical_json(t) for t in response.trials)
    sys.stdout.write("\n".join(lines) + "\n")

    directory = report_dir(args.report_dir)
    if directory is not None:
        (directory / "summary.json").write_text(lines[0] + "\n")
        trials = "".join(line + "\n" for line in lines[1:])
        (directory / "trials.jsonl").write_text(trials)
        logger.info("reports written to %s", directory)

    violations = response.summary.invariant_violations
    if violations:
        logger.error("%d invariant violations", violations)
    return 1 if violations else 0


def cmd_verify(args: argparse.Namespace) -> int:
    if (args.blowup is None) == (args.gadget is None):
        raise UsageError("verify needs exactly one of --blowup and --gadget")
    if args.blowup is not None:
        if args.s is None:
            raise UsageError("blowup verification needs --s")
        request = VerifyBlowupRequest(
            blowup=load(args.blowup, BlowupModel, key="blowup"), s=args.s
        )
        emit(BlowupService.verify(request))
        return 0
    if args.L is None or args.p is None:
        raise UsageError("gadget verification needs --L and --p")
    block = load(args.gadget, BipartiteBlockModel, key="gadget")
    params = RegularityParams(L=args.L, p=args.p, mode=args.mode)
    emit(
        GadgetService.verify(
            block, params, refute_trials=args.refute_trials, seed=args.seed
        )
    )
    return 0


def cmd_schema(args: argparse.Namespace) -> int:
    model = getattr(models, args.model, None)
    if not (isinstance(model, type) and issubclass(model, BaseModel)):
        raise UsageError(f"unknown schema {args.model!r}")
    emit(model.model_json_schema())
    return 0


# Parser
def _seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="Root seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cli.py",
        description="Certified constructions of induced Ramsey hosts",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument(
        "--jobs", type=int, default=1, help="Worker processes for independent jobs"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gadget = commands.add_parser("gadget", help="Sample and certify a regular gadget")
    gadget.add_argument("--a", type=int, help="Rows (X side)")
    gadget.add_argument("--b", type=int, help="Columns (Y side)")
    gadget.add_argument("--p", type=_rational, default="4/5", help="Edge probability")
    gadget.add_argument("--L", type=int, help="Target regularity threshold")
    gadget.add_argument("--max-attempts", type=int, default=50)
    gadget.add_argument(
        "--source",
        type=GadgetSource,
        default=GadgetSource.DIRECT,
        choices=[GadgetSource.DIRECT, GadgetSource.AMBIENT],
    )
    gadget.add_argument(
        "--mode", type=RegularityMode, default=RegularityMode.TWO_SIDED
    )
    gadget.add_argument("--refute-trials", type=int, default=200)
    gadget.add_argument("--file", help="Certify a gadget block from this file instead")
    gadget.add_argument(
        "--dense", action="store_true", help="Dense pseudorandom G(n, p) instead"
    )
    gadget.add_argument("--n", type=int, help="Vertex count for --dense")
    gadget.add_argument("--t", type=int, help="Set size for --dense")
    gadget.add_argument("--eps", type=_rational, help="Relative tolerance for --dense")
    _seed(gadget)
    gadget.set_defaults(handler=cmd_gadget)

    blowup = commands.add_parser("blowup", help="Build a gadget blowup of a base graph")
    blowup.add_argument("--base", required=True, help="Base graph JSON")
    blowup.add_argument("--s", type=int, default=16, help="Part size (side A)")
    blowup.add_argument("--s0", type=int, help="Side B part size with --bipartite")
    blowup.add_argument("--p", type=_rational, default="4/5")
    blowup.add_argument("--L", type=int, help="Target regularity threshold")
    blowup.add_argument(
        "--source",
        type=GadgetSource,
        default=GadgetSource.DIRECT,
        choices=[GadgetSource.DIRECT, GadgetSource.AMBIENT],
    )
    blowup.add_argument("--max-attempts", type=int, default=50)
    blowup.add_argument("--refute-trials", type=int, default=200)
    blowup.add_argument(
        "--bipartite", action="store_true", help="Asymmetric parts, bipartite base"
    )
    _seed(blowup)
    blowup.set_defaults(handler=cmd_blowup)

    color = commands.add_parser("color", help="Adversary, proper or LLL colorings")
    color.add_argument(
        "--method", choices=["adversary", "vizing", "lll"], default="adversary"
    )
    color.add_argument("--blowup", help="Blowup JSON for adversary colorings")
    color.add_argument("--graph", help="Graph JSON for vizing and lll")
    color.add_argument(
        "--strategy", type=AdversaryStrategy, default=AdversaryStrategy.UNIFORM
    )
    color.add_argument("--q", type=int, default=2)
    color.add_argument("--w", type=int, default=2, help="Biclique side for lll")
    color.add_argument("--max-resample", type=int, default=1000)
    _seed(color)
    color.set_defaults(handler=cmd_color)

    clean = commands.add_parser("clean", help="Clean a colored blowup")
    clean.add_argument("--blowup", required=True)
    clean.add_argument("--coloring", required=True)
    clean.add_argument("--kind", choices=["regularity", "drc"], default="regularity")
    clean.add_argument("--pattern", help="Pattern JSON, for r = k*w in DRC cleaning")
    clean.add_argument("--p", type=_rational, default="4/5", help="Gadget density")
    clean.add_argument("--eta", type=_rational, default="1/2")
    clean.add_argument("--shrink", type=_rational, default="1/2")
    clean.add_argument("--r", type=int)
    clean.add_argument("--h", type=int)
    clean.add_argument("--L", type=int, help="Block regularity threshold for DRC")
    clean.add_argument("--w", type=int, default=1)
    clean.add_argument("--max-attempts", type=int, default=200)
    _seed(clean)
    clean.set_defaults(handler=cmd_clean)

    embed = commands.add_parser("embed", help="Embed the pattern into a cleaned blowup")
    embed.add_argument("--blowup", required=True)
    embed.add_argument("--coloring", required=True)
    embed.add_argument("--cleaning", required=True, help="Output of the clean command")
    embed.add_argument("--pattern", required=True)
    embed.add_argument("--kind", choices=["greedy", "lll"], default="greedy")
    embed.add_argument("--p", type=_rational, default="4/5")
    embed.add_argument("--L", type=int, default=1, help="Gadget regularity threshold")
    embed.add_argument("--w", type=int, help="Blowup width for --kind lll")
    embed.add_argument("--s-star", type=int)
    embed.add_argument("--rho", type=_rational)
    embed.add_argument("--max-resample", type=int, default=1000)
    _seed(embed)
    embed.set_defaults(handler=cmd_embed)

    arrows = commands.add_parser("arrows", help="Decide host -> (pattern)_q")
    arrows.add_argument("--host", required=True)
    arrows.add_argument("--pattern", required=True)
    arrows.add_argument("--q", type=int)
    arrows.add_argument("--gamma", type=_rational, help="Density arrow instead")
    arrows.add_argument("--mode", type=CopyMode, default=CopyMode.SUBGRAPH)
    arrows.set_defaults(handler=cmd_arrows)

    host = commands.add_parser("host-search", help="Search a small arrowing host")
    host.add_argument("--pattern", required=True)
    host.add_argument("--q", type=int, default=2)
    host.add_argument("--mode", type=CopyMode, default=CopyMode.SUBGRAPH)
    host.add_argument("--max-vertices", type=int, default=6)
    host.add_argument("--degree-cap", type=int)
    host.add_argument("--seeds-per-size", type=int, default=3)
    host.add_argument("--bipartite", action="store_true")
    _seed(host)
    host.set_defaults(handler=cmd_host_search)

    pipeline = commands.add_parser("pipeline", help="Run a reduction end to end")
    pipeline.add_argument("--config", required=True, help="PipelineConfig JSON or -")
    pipeline.add_argument("--report-dir", help="Also write summary.json, trials.jsonl")
    pipeline.add_argument(
        "--timings", action="store_true", help="Attach stage timings to trials"
    )
    pipeline.set_defaults(handler=cmd_pipeline)

    verify = commands.add_parser("verify", help="Verify a blowup or a gadget")
    verify.add_argument("--blowup", help="Blowup JSON")
    verify.add_argument("--s", type=int, help="Part-size bound")
    verify.add_argument("--gadget", help="Gadget block JSON")
    verify.add_argument("--L", type=int)
    verify.add_argument("--p", type=_rational)
    verify.add_argument("--mode", type=RegularityMode, default=RegularityMode.TWO_SIDED)
    verify.add_argument("--refute-trials", type=int, default=200)
    _seed(verify)
    verify.set_defaults(handler=cmd_verify)

    schema = commands.add_parser("schema", help="Print the JSON schema of a document")
    schema.add_argument("model", help="Model name, e.g. PipelineConfig")
    schema.set_defaults(handler=cmd_schema)
    return parser


def _fail(body: ErrorResponse, code: int) -> int:
    sys.stderr.write(canonical_json(body) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.handler(args)
    except ValidationError as e:
        errors: List[dict] = schema_errors(e.errors())
        return _fail(
            ErrorResponse(
                error="invalid_input",
                message=f"{e.title} failed schema validation",
                detail={"errors": errors},
            ),
            2,
        )
    except RamseyError as e:
        if e.exit_code == 1:
            logger.error("%s: %s", e.kind, e.message)
        return _fail(ErrorResponse(**e.to_dict()), e.exit_code)


if __name__ == "__main__":
    sys.exit(main())
