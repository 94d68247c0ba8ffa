"""Structured logging configuration.

This module provides centralized logging setup with:
- JSON output on standard error (standard output stays free for results)
- Optional JSON-lines log file instead of standard error
- Run ID correlation using context variables
- Hybrid dotted namespace pattern (domain.component.action_state)
- Exception formatting with exc_info for stack traces

Event Naming Pattern:
    Format: {domain}.{component}.{action}_{state}

    Examples:
        - ode.integration_completed
        - sweep.row_completed
        - greens.iteration_converged
        - variational.descent_progress
"""

import logging
import sys
import uuid
from contextvars import ContextVar
from pathlib import Path
from typing import TextIO

import structlog
from structlog.typing import EventDict, WrappedLogger

# Context variable for run correlation ID
run_id_var: ContextVar[str] = ContextVar("run_id", default="")

_log_stream: TextIO | None = None


def get_run_id() -> str:
    """Get the current run ID from context.

    Returns:
        The current run ID, or empty string if not set.
    """
    return run_id_var.get()


def set_run_id(run_id: str | None = None) -> str:
    """Set run ID in context, generating one if not provided.

    Args:
        run_id: Optional run ID to set. If None, generates a new UUID.

    Returns:
        The run ID that was set.
    """
    if not run_id:
        run_id = str(uuid.uuid4())
    run_id_var.set(run_id)
    return run_id


def add_run_id(_logger: WrappedLogger, _method_name: str, event_dict: EventDict) -> EventDict:
    """Processor to add the run ID to all log entries.

    Args:
        _logger: The logger instance (unused, required by structlog).
        _method_name: The logging method name (unused, required by structlog).
        event_dict: The event dictionary to process.

    Returns:
        The modified event dictionary with run_id added.
    """
    run_id = get_run_id()
    if run_id:
        event_dict["run_id"] = run_id
    return event_dict


def setup_logging(log_level: str = "INFO", log_file: str | None = None) -> None:
    """Configure structured logging for the process.

    Sets up structlog with JSON output and the following processors:
    - Run ID correlation
    - Log level addition
    - ISO timestamp
    - Exception formatting with full tracebacks
    - JSON rendering

    Args:
        log_level: The logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL).
        log_file: Append JSON lines to this path instead of standard error.
    """
    global _log_stream

    level_int = getattr(logging, log_level.upper())

    if _log_stream is not None:
        _log_stream.close()
        _log_stream = None

    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        _log_stream = path.open("a", encoding="utf-8")
        factory: structlog.WriteLoggerFactory | structlog.PrintLoggerFactory = (
            structlog.WriteLoggerFactory(file=_log_stream)
        )
    else:
        factory = structlog.PrintLoggerFactory(file=sys.stderr)

    structlog.configure(
        processors=[
            add_run_id,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level_int),
        context_class=dict,
        logger_factory=factory,
        cache_logger_on_first_use=False,
    )


def get_logger(name: str) -> WrappedLogger:
    """Get a logger instance for a module.

    Use the hybrid dotted namespace pattern: domain.component.action_state

    Args:
        name: The logger name, typically __name__.

    Returns:
        A configured structlog logger instance.

    Example:
        >>> logger = get_logger(__name__)
        >>> logger.info("ode.integration_started", a=-1.0, k=1.0)
        >>> logger.info("ode.integration_completed", r0=4.12, steps=311)
    """
    return structlog.get_logger(name)
