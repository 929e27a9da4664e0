"""
Tests for error bodies, stage profiling and report directories
"""

import pytest
from pydantic import ValidationError

import settings
from errors import (
    BudgetExceededError,
    CleaningError,
    InvalidInputError,
    InvariantViolation,
    SearchExhaustedError,
    json_pointer,
    schema_errors,
)
from models import PipelineConfig


@pytest.fixture(autouse=True)
def clean_stats():
    settings.reset_stage_stats()
    yield
    settings.reset_stage_stats()


def test_error_codes():
    """Test exit codes and HTTP statuses of the error family"""
    assert (InvalidInputError.exit_code, InvalidInputError.http_status) == (2, 422)
    assert (BudgetExceededError.exit_code, BudgetExceededError.http_status) == (
        2,
        413,
    )
    assert SearchExhaustedError.http_status == 409
    assert issubclass(CleaningError, SearchExhaustedError)
    assert (InvariantViolation.exit_code, InvariantViolation.http_status) == (1, 500)


def test_budget_error_body():
    """Test that a budget error carries what it needed"""
    body = BudgetExceededError("colorings", 2**20, 1000).to_dict()
    assert body["error"] == "budget_exceeded"
    assert body["detail"] == {"what": "colorings", "required": 2**20, "budget": 1000}


def test_json_pointer_escapes():
    """Test pointer escaping of ~ and /"""
    assert json_pointer(("gadget", "p")) == "/gadget/p"
    assert json_pointer(("edges", 0, 1)) == "/edges/0/1"
    assert json_pointer(("a/b", "c~d")) == "/a~1b/c~0d"
    assert json_pointer(()) == ""


def test_schema_errors_from_validation():
    """Test flattening pydantic errors to pointer paths"""
    with pytest.raises(ValidationError) as info:
        PipelineConfig.model_validate(
            {"pattern": {"n": 2, "edges": [[0, 1]]}, "gadget": {"s": 0}}
        )
    paths = [e["path"] for e in schema_errors(info.value.errors())]
    assert "/gadget/s" in paths

    skipped = schema_errors([{"loc": ("body", "q"), "msg": "bad"}], skip=1)
    assert skipped == [{"path": "/q", "message": "bad"}]


def test_stage_timer_records_and_sinks():
    """Test that stage times land in the stats and in the sink"""
    sink = {}
    with settings.stage_timer("blowup", sink):
        pass
    with settings.stage_timer("blowup", sink):
        pass
    stats = settings.get_stage_stats()
    assert stats["total_stages"] == 2
    assert stats["stages"]["blowup"]["count"] == 2
    assert set(sink) == {"blowup"}


def test_stage_timer_records_on_error():
    """Test that a failing stage is still timed"""
    with pytest.raises(InvalidInputError):
        with settings.stage_timer("cleaning"):
            raise InvalidInputError("bad")
    assert settings.get_stage_stats()["stages"]["cleaning"]["count"] == 1


def test_slow_stages_capped(monkeypatch):
    """Test that slow stages are kept, only the last 50"""
    monkeypatch.setattr(settings, "SLOW_STAGE_SECONDS", -1.0)
    for i in range(55):
        with settings.stage_timer(f"stage-{i}"):
            pass
    assert len(settings.stage_stats["slow_stages"]) == 50
    stats = settings.get_stage_stats()
    assert stats["slow_stages_count"] == 50
    assert stats["recent_slow_stages"][-1]["stage"] == "stage-54"


def test_reset_stage_stats():
    """Test that a reset empties the statistics"""
    with settings.stage_timer("embedding"):
        pass
    settings.reset_stage_stats()
    assert settings.get_stage_stats() == {
        "total_stages": 0,
        "stages": {},
        "slow_stages_count": 0,
        "recent_slow_stages": [],
    }


def test_report_dir(tmp_path, monkeypatch):
    """Test the override, the environment default and no directory at all"""
    monkeypatch.setattr(settings, "REPORT_DIR", None)
    assert settings.report_dir() is None

    target = tmp_path / "reports" / "run"
    assert settings.report_dir(str(target)) == target
    assert target.is_dir()

    monkeypatch.setattr(settings, "REPORT_DIR", str(tmp_path / "env"))
    assert settings.report_dir() == tmp_path / "env"
