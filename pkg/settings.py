"""
Configuration, budgets and stage profiling for the Induced Ramsey Workbench
"""

import logging
import os
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Optional report-directory override; the only environment configuration
REPORT_DIR = os.getenv("RAMSEY_REPORT_DIR")

# Enumeration caps
EXACT_REGULARITY_CAP = 20
DENSITY_PAIR_BUDGET = 10**7
DRC_TUPLE_BUDGET = 10**7
DRC_BAD_TUPLE_BUDGET = 10**6
ARROWS_BUDGET = 10**8
BLOWUP_SEARCH_CAP = 16
EXHAUSTIVE_PAIR_SEARCH_CAP = 12
EXHAUSTIVE_PAIR_SEARCH_BUDGET = 2 * 10**6
BICLIQUE_BUDGET = 10**6

# Stages slower than this are logged as slow
SLOW_STAGE_SECONDS = 5.0

LOGGER_NAMESPACE = "induced_ramsey"

VERSION = "1.0.0"

stage_logger = logging.getLogger(f"{LOGGER_NAMESPACE}.profiler")

# Stage performance tracking
stage_stats: Dict[str, Any] = {"total_stages": 0, "slow_stages": [], "stage_times": {}}


def get_logger(name: str) -> logging.Logger:
    """Module logger under the workbench namespace"""
    return logging.getLogger(f"{LOGGER_NAMESPACE}.{name}")


def configure_logging(verbose: bool = False) -> None:
    """Configure stderr logging once for CLI and server entry points"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger(LOGGER_NAMESPACE).setLevel(
        logging.DEBUG if verbose else logging.INFO
    )


def report_dir(override: Optional[str] = None) -> Optional[Path]:
    """Resolve the directory pipeline reports are written to, if any"""
    chosen = override or REPORT_DIR
    if not chosen:
        return None
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


@contextmanager
def stage_timer(name: str, sink: Optional[Dict[str, float]] = None) -> Iterator[None]:
    """Record stage wall time and log slow stages"""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        stage_stats["total_stages"] += 1
        stage_stats["stage_times"].setdefault(name, []).append(elapsed)
        if sink is not None:
            sink[name] = sink.get(name, 0.0) + elapsed

        if elapsed > SLOW_STAGE_SECONDS:
            stage_stats["slow_stages"].append(
                {"stage": name, "seconds": round(elapsed, 4), "timestamp": time.time()}
            )
            # Keep only the last 50 slow stages
            if len(stage_stats["slow_stages"]) > 50:
                stage_stats["slow_stages"] = stage_stats["slow_stages"][-50:]
            stage_logger.warning("SLOW STAGE (%.4fs): %s", elapsed, name)
        else:
            stage_logger.debug("STAGE (%.4fs): %s", elapsed, name)


def get_stage_stats() -> Dict[str, Any]:
    """Summary of recorded stage timings"""
    times = stage_stats["stage_times"]
    if not times:
        return {
            "total_stages": 0,
            "stages": {},
            "slow_stages_count": 0,
            "recent_slow_stages": [],
        }

    return {
        "total_stages": stage_stats["total_stages"],
        "stages": {
            name: {
                "count": len(values),
                "avg_seconds": round(sum(values) / len(values), 4),
                "max_seconds": round(max(values), 4),
            }
            for name, values in sorted(times.items())
        },
        "slow_stages_count": len(stage_stats["slow_stages"]),
        "recent_slow_stages": stage_stats["slow_stages"][-10:],
    }


def reset_stage_stats() -> None:
    """Reset stage performance statistics"""
    global stage_stats
    stage_stats = {"total_stages": 0, "slow_stages": [], "stage_times": {}}
