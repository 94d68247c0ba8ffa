"""Application configuration using pydantic-settings.

This module provides centralized configuration management:
- Typed config blocks for quadrature, the shooting solver, the Green's-function
  field solver, the variational verifier and parameter sweeps
- Environment variable loading (NVPOLY_ prefix, ``__`` for nested keys)
- A single JSON config document, located by ``--config`` or NVPOLY_CONFIG
- Cached settings instance with @lru_cache
- A stable configuration hash stamped on every emitted file
"""

import hashlib
import json
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.exceptions import ConfigError

CONFIG_ENV_VAR = "NVPOLY_CONFIG"


# ====================
# Config Blocks
# ====================


class QuadratureConfig(BaseModel):
    """Tolerances for the adaptive momentum-space quadrature."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    abs_tol: float = Field(default=1e-12, gt=0.0, description="Absolute tolerance")
    rel_tol: float = Field(default=1e-12, gt=0.0, description="Relative tolerance")
    max_depth: int = Field(
        default=5000,
        ge=50,
        le=1_000_000,
        description="Cap on adaptive interval subdivisions (QUADPACK allocates work "
        "arrays of this size on every call)",
    )
    jacobi_nodes: int = Field(
        default=48, ge=8, le=512, description="Gauss-Jacobi nodes for ansatz p-moments"
    )


class SolverConfig(BaseModel):
    """Step controller and horizon of the scaled shooting problem.

    The center cutoff ``epsilon`` replaces the singular point r = 0: integration
    starts at r = epsilon with (psi, psi') = (a, 0).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    epsilon: float = Field(default=1e-5, gt=0.0, description="Center cutoff radius")
    rel_tol: float = Field(default=1e-10, gt=0.0, description="Step controller rtol")
    abs_tol: float = Field(default=1e-12, gt=0.0, description="Step controller atol")
    r_max: float = Field(default=1e9, gt=0.0, description="Integration horizon")
    max_steps: int = Field(default=1_000_000, ge=10, description="Accepted step cap")
    method: Literal["RK45", "DOP853"] = Field(
        default="RK45", description="Embedded Runge-Kutta pair"
    )
    taylor_start: bool = Field(
        default=False, description="Start from the second-order Taylor expansion at epsilon"
    )
    use_mu_table: bool = Field(
        default=True, description="Evaluate the source from the tabulated interpolant"
    )
    table_nodes: int = Field(default=2000, ge=50, description="Source table nodes")
    exterior_factor: float = Field(
        default=4.0, gt=1.0, description="Vacuum extension stored up to factor * r0"
    )
    exterior_nodes: int = Field(default=200, ge=2, description="Stored vacuum nodes")
    pair_step: float = Field(
        default=5e-5, gt=0.0, description="Spacing of the pair used to classify a point"
    )
    threshold_width: float = Field(
        default=1e-4, gt=0.0, description="Bisection width for the regime threshold"
    )


class GreensConfig(BaseModel):
    """Damped fixed-point iteration for the integral form of the field equation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    damping: float = Field(default=0.5, gt=0.0, le=1.0, description="Relaxation factor")
    aitken_after: int = Field(
        default=10, ge=1, description="Iterations before vector Aitken extrapolation starts"
    )
    tol: float = Field(default=1e-10, gt=0.0, description="Sup-norm step tolerance")
    max_iter: int = Field(default=10_000, ge=1, description="Iteration cap")


class VariationalConfig(BaseModel):
    """Grid and stopping rules of the brute-force energy minimization."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_r: int = Field(default=64, ge=8, description="Radial nodes")
    n_p: int = Field(default=64, ge=8, description="Momentum nodes")
    p_max: float = Field(default=1.0, gt=0.0, description="Momentum grid extent")
    max_iter: int = Field(default=5000, ge=1, description="Descent iteration cap")
    stall_window: int = Field(default=50, ge=1, description="Iterations in the stall test")
    stall_tol: float = Field(
        default=1e-9, gt=0.0, description="Energy decrease over the window that ends descent"
    )
    initial_step: float = Field(default=1.0, gt=0.0, le=1.0, description="Line search first step")
    min_step: float = Field(default=1e-12, gt=0.0, description="Line search floor")
    direction: Literal["projected", "polytrope"] = Field(
        default="projected",
        description="Descent target: a clipped gradient step, or the linear minimizer over "
        "the constraint set",
    )
    support_fraction: float = Field(
        default=0.75, gt=0.0, lt=1.0, description="Radial grid is rescaled to put the support here"
    )
    support_band: tuple[float, float] = Field(
        default=(0.5, 0.92), description="Support fractions tolerated before regridding"
    )
    support_floor: float = Field(
        default=1e-10, gt=0.0, description="f / max f below which a node is off the support"
    )


class SweepConfig(BaseModel):
    """Shooting-parameter range for sweeps and threshold searches."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    a_min: float = Field(default=-3.0, lt=0.0, description="Deepest shooting parameter")
    a_max: float = Field(default=-0.05, lt=0.0, description="Shallowest shooting parameter")
    points: int = Field(default=50, ge=1, description="Number of sweep rows")


# ====================
# Settings
# ====================


class Settings(BaseSettings):
    """Run-wide configuration.

    All settings can be overridden via environment variables with the NVPOLY_
    prefix; nested blocks use a double underscore (NVPOLY_ODE__REL_TOL=1e-12).
    Values passed to the constructor (JSON config file, CLI flags) take precedence.
    """

    model_config = SettingsConfigDict(
        env_prefix="NVPOLY_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: str = "INFO"
    log_file: str | None = Field(
        default=None, description="Append JSON log lines to this file instead of stderr"
    )
    output_dir: str = Field(default="results", description="Directory for CSV/JSON outputs")
    jobs: int | None = Field(
        default=None, ge=1, description="Worker processes for sweeps (None = all processors)"
    )

    quadrature: QuadratureConfig = QuadratureConfig()
    ode: SolverConfig = SolverConfig()
    greens: GreensConfig = GreensConfig()
    variational: VariationalConfig = VariationalConfig()
    sweep: SweepConfig = SweepConfig()


def read_config_file(path: Path) -> dict[str, Any]:
    """Read a JSON config document.

    Args:
        path: Location of the JSON document.

    Returns:
        The parsed mapping.

    Raises:
        ConfigError: If the file cannot be read or is not a JSON object.
    """
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    return data


def _deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(
    config_path: Path | None = None, overrides: dict[str, Any] | None = None
) -> Settings:
    """Build an uncached Settings instance for one run.

    Precedence: overrides (CLI flags) > config file > environment > defaults.

    Args:
        config_path: JSON config document; falls back to NVPOLY_CONFIG when None.
        overrides: Nested mapping of explicitly given values.

    Returns:
        Validated settings.

    Raises:
        ConfigError: Unreadable config file.
        pydantic.ValidationError: Values outside their declared ranges.
    """
    if config_path is None and os.environ.get(CONFIG_ENV_VAR):
        config_path = Path(os.environ[CONFIG_ENV_VAR])

    data: dict[str, Any] = read_config_file(config_path) if config_path is not None else {}
    if overrides:
        data = _deep_merge(data, overrides)
    return Settings(**data)


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance.

    The @lru_cache decorator ensures settings are only loaded once
    and reused across the process.

    Returns:
        The settings instance.
    """
    try:
        return load_settings()
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc


def config_hash(
    settings: Settings, command: str = "", arguments: dict[str, Any] | None = None
) -> str:
    """Hash the effective configuration of a run.

    Args:
        settings: Effective settings.
        command: Subcommand name.
        arguments: Command-specific parameters.

    Returns:
        Hex SHA-256 of the canonical JSON document.
    """
    document = {
        "command": command,
        "arguments": arguments or {},
        "settings": settings.model_dump(
            mode="json", exclude={"log_level", "log_file", "output_dir"}
        ),
    }
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
