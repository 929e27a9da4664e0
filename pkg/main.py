import time
from contextlib import asynccontextmanager
from datetime import datetime

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from errors import RamseyError, schema_errors
from models import (
    ArrowQuery,
    ArrowResult,
    BlowupRequest,
    BlowupResponse,
    BlowupVerdict,
    ErrorResponse,
    GadgetRequest,
    GadgetResponse,
    HealthResponse,
    HostSearchRequest,
    HostSearchResult,
    PipelineConfig,
    PipelineResponse,
    VerifyBlowupRequest,
)
from services import (
    ArrowService,
    BlowupService,
    GadgetService,
    HostService,
    PipelineService,
)
from settings import (
    VERSION,
    configure_logging,
    get_logger,
    get_stage_stats,
    reset_stage_stats,
)

logger = get_logger("api")

start_time = time.time()


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Manage application lifespan events"""
    configure_logging()
    logger.info("Induced Ramsey Workbench API %s starting", VERSION)

    yield


# Initialize FastAPI app
app = FastAPI(
    title="Induced Ramsey Workbench API",
    description="Gadget blowups, cleaning and induced embeddings for Ramsey hosts",
    version=VERSION,
    docs_url="/docs",
    redoc_url="/redoc",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.get("/", response_model=dict)
async def root():
    """Root endpoint with API information"""
    return {
        "message": "Induced Ramsey Workbench API",
        "version": VERSION,
        "description": "Certified constructions of induced Ramsey hosts at desk scale",
        "endpoints": [
            "/arrows - Decide a coloring or density arrow",
            "/gadgets - Sample and certify a regular gadget",
            "/blowups - Build a gadget blowup of a base graph",
            "/blowups/verify - Check an s-blowup",
            "/host-search - Search a small arrowing host",
            "/pipeline - Run a reduction end to end",
            "/health - Health check",
        ],
        "documentation": "/docs",
    }


@app.get("/health", response_model=HealthResponse, tags=["System"])
async def health_check():
    """
    Health check endpoint to monitor API status
    """
    return HealthResponse(
        status="healthy",
        timestamp=datetime.now().isoformat(),
        uptime_seconds=round(time.time() - start_time, 2),
        version=VERSION,
    )


# CPU-bound endpoints are plain functions so they run in the threadpool
@app.post("/arrows", response_model=ArrowResult, tags=["Oracles"])
def check_arrows(query: ArrowQuery):
    """
    Decide host -> (pattern)_q over all colorings, or the density arrow with gamma

    Returns a verified counterexample when the arrow fails
    """
    return ArrowService.check(query)


@app.post("/host-search", response_model=HostSearchResult, tags=["Oracles"])
def search_host(request: HostSearchRequest):
    """Smallest arrowing host among the candidate families, with the search log"""
    return HostService.search(request)


@app.post("/gadgets", response_model=GadgetResponse, tags=["Gadgets"])
def generate_gadget(request: GadgetRequest):
    """
    Sample an a x b bipartite gadget and certify it as (L, p)-regular

    Only an exact verdict marks the certificate valid
    """
    return GadgetService.generate(request)


@app.post("/blowups", response_model=BlowupResponse, tags=["Blowups"])
def build_blowup(request: BlowupRequest):
    """Install one certified gadget on every base edge"""
    return BlowupService.build(request)


@app.post("/blowups/verify", response_model=BlowupVerdict, tags=["Blowups"])
def verify_blowup(request: VerifyBlowupRequest):
    """Check part sizes, independent parts and edges lying over base edges"""
    return BlowupService.verify(request)


@app.post("/pipeline", response_model=PipelineResponse, tags=["Pipeline"])
def run_pipeline(
    config: PipelineConfig,
    jobs: int = Query(1, ge=1, le=64, description="Worker processes for the trials"),
):
    """
    Run the general reduction, or the bipartite one when w is set

    Every successful trial has been re-verified against the blowup and the
    adversary coloring
    """
    return PipelineService.run(config, jobs=jobs)


# Stage profiling endpoints
@app.get("/debug/stage-stats", response_model=dict, tags=["Debug"])
async def get_stage_performance_stats():
    """
    Get stage timing statistics

    Returns total stages run, per-stage wall times and the recent slow stages
    """
    return {
        "stage_performance": get_stage_stats(),
        "timestamp": datetime.now().isoformat(),
    }


@app.post("/debug/reset-stage-stats", response_model=dict, tags=["Debug"])
async def reset_stage_performance_stats():
    """Reset stage timing statistics"""
    reset_stage_stats()
    return {
        "message": "Stage performance statistics have been reset",
        "timestamp": datetime.now().isoformat(),
    }


# Error handlers
@app.exception_handler(RamseyError)
async def ramsey_error_handler(request: Request, exc: RamseyError):
    if exc.http_status >= 500:
        logger.error("%s on %s: %s", exc.kind, request.url.path, exc.message)
    return JSONResponse(
        status_code=exc.http_status,
        content=ErrorResponse(**exc.to_dict()).model_dump(mode="json"),
    )


@app.exception_handler(RequestValidationError)
async def validation_error_handler(request: Request, exc: RequestValidationError):
    return JSONResponse(
        status_code=422,
        content=ErrorResponse(
            error="invalid_input",
            message="request body failed schema validation",
            detail={"errors": schema_errors(exc.errors(), skip=1)},
        ).model_dump(mode="json"),
    )


@app.exception_handler(404)
async def not_found_handler(request, exc):
    return JSONResponse(
        status_code=404,
        content={
            "error": "Not Found",
            "message": "The requested resource was not found",
        },
    )


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
