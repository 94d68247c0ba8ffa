"""Domain exception hierarchy and exit-code mapping.

Every failure the numerical modules can signal derives from PolytropeError.
Parameter and state errors additionally derive from ValueError so callers that
only know the standard library still catch them.
"""

from app.core.logging import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_IDENTITY_FAILURE = 3
EXIT_USAGE = 64
EXIT_NO_INPUT = 66


class PolytropeError(Exception):
    """Base exception for all domain errors."""

    exit_code = EXIT_RUNTIME


class InvalidParameterError(PolytropeError, ValueError):
    """A scalar parameter lies outside its domain."""

    exit_code = EXIT_VALIDATION


class InvalidStateError(PolytropeError, ValueError):
    """A phase-space state violates its invariants."""

    exit_code = EXIT_VALIDATION


class QuadratureError(PolytropeError):
    """A quadrature met a non-finite or non-integrable integrand."""

    exit_code = EXIT_VALIDATION


class IntegrationError(PolytropeError):
    """The ODE step controller failed."""


class CrossingNotFoundError(PolytropeError):
    """The scaled potential never reached zero in the available range."""


class ConvergenceError(PolytropeError):
    """An iteration hit its cap before meeting its tolerance."""


class RegimeError(PolytropeError):
    """A threshold search was given a range without a regime change."""

    exit_code = EXIT_VALIDATION


class ConfigError(PolytropeError):
    """The configuration document is unreadable or invalid."""

    exit_code = EXIT_NO_INPUT


class IdentityCheckError(PolytropeError):
    """One or more identities of the verification battery failed.

    Attributes:
        failures: Machine-readable failure records.
    """

    exit_code = EXIT_IDENTITY_FAILURE

    def __init__(self, message: str, failures: list[dict[str, object]] | None = None) -> None:
        super().__init__(message)
        self.failures = failures or []


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the process exit code.

    Args:
        exc: The exception that ended the run.

    Returns:
        Exit code: the domain code for PolytropeError subclasses, 2 for other
        ValueErrors, 1 otherwise.
    """
    if isinstance(exc, PolytropeError):
        code = exc.exit_code
    elif isinstance(exc, ValueError):
        code = EXIT_VALIDATION
    else:
        code = EXIT_RUNTIME

    logger.error(
        "cli.command_failed",
        error_type=type(exc).__name__,
        error_message=str(exc),
        exit_code=code,
        exc_info=exc if code == EXIT_RUNTIME else None,
    )
    return code
