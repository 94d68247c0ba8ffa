"""Tests for the exception hierarchy and exit-code mapping."""

import json

import pytest
from pydantic import BaseModel, ValidationError

from app.core.exceptions import (
    EXIT_IDENTITY_FAILURE,
    EXIT_NO_INPUT,
    EXIT_RUNTIME,
    EXIT_VALIDATION,
    ConfigError,
    ConvergenceError,
    CrossingNotFoundError,
    IdentityCheckError,
    IntegrationError,
    InvalidParameterError,
    InvalidStateError,
    PolytropeError,
    QuadratureError,
    RegimeError,
    exit_code_for,
)
from app.core.logging import setup_logging


class _Model(BaseModel):
    value: int


def test_parameter_errors_are_value_errors() -> None:
    """Test that parameter and state errors are catchable as ValueError."""
    assert issubclass(InvalidParameterError, ValueError)
    assert issubclass(InvalidStateError, ValueError)
    assert issubclass(InvalidParameterError, PolytropeError)


@pytest.mark.parametrize(
    ("exc", "code"),
    [
        (InvalidParameterError("k"), EXIT_VALIDATION),
        (InvalidStateError("f"), EXIT_VALIDATION),
        (QuadratureError("nan"), EXIT_VALIDATION),
        (RegimeError("same"), EXIT_VALIDATION),
        (IntegrationError("step"), EXIT_RUNTIME),
        (CrossingNotFoundError("none"), EXIT_RUNTIME),
        (ConvergenceError("cap"), EXIT_RUNTIME),
        (ConfigError("missing"), EXIT_NO_INPUT),
        (IdentityCheckError("virial"), EXIT_IDENTITY_FAILURE),
        (ValueError("plain"), EXIT_VALIDATION),
        (RuntimeError("other"), EXIT_RUNTIME),
    ],
)
def test_exit_code_for(exc: BaseException, code: int) -> None:
    """Test each exception maps to its documented exit code."""
    assert exit_code_for(exc) == code


def test_pydantic_validation_maps_to_validation() -> None:
    """Test pydantic ValidationError exits like any other ValueError."""
    with pytest.raises(ValidationError) as exc_info:
        _Model.model_validate({"value": "not a number"})
    assert exit_code_for(exc_info.value) == EXIT_VALIDATION


def test_identity_failures_are_kept() -> None:
    """Test IdentityCheckError carries its failure records."""
    error = IdentityCheckError("1 failed", failures=[{"name": "virial", "deviation": 0.5}])
    assert error.failures == [{"name": "virial", "deviation": 0.5}]
    assert IdentityCheckError("none").failures == []


def test_runtime_failures_log_traceback(capsys: pytest.CaptureFixture[str]) -> None:
    """Test solver failures carry their traceback in the failure event."""
    setup_logging(log_level="ERROR")
    try:
        raise IntegrationError("step size underflow")
    except IntegrationError as exc:
        assert exit_code_for(exc) == EXIT_RUNTIME

    log_data = json.loads(capsys.readouterr().err.strip())
    assert log_data["event"] == "cli.command_failed"
    assert "IntegrationError: step size underflow" in log_data["exception"]


def test_validation_failures_skip_traceback(capsys: pytest.CaptureFixture[str]) -> None:
    """Test rejected input is logged without a traceback."""
    setup_logging(log_level="ERROR")
    assert exit_code_for(InvalidParameterError("a >= 0")) == EXIT_VALIDATION

    log_data = json.loads(capsys.readouterr().err.strip())
    assert log_data["error_type"] == "InvalidParameterError"
    assert "exception" not in log_data
