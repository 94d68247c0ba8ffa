"""Shared Pydantic schemas for JSON documents.

States and reports leave the process as JSON through these models; numpy
arrays become nested lists and non-finite floats become null.
"""

import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.polytrope.functionals import PhaseSpaceState
from app.polytrope.variational import KKTFit, MinimizerResult

Scalar = float | int | bool | str | None


def finite_or_none(value: float) -> float | None:
    """Map inf and nan to None so documents stay strict JSON."""
    return value if math.isfinite(value) else None


class PhaseSpaceDocument(BaseModel):
    """JSON form of a gridded phase-space state.

    Example:
        document = PhaseSpaceDocument.from_state(state)
        restored = PhaseSpaceDocument.model_validate_json(document.model_dump_json()).to_state()
    """

    model_config = ConfigDict(frozen=True)

    r_grid: list[float]
    p_grid: list[float]
    f: list[list[float]]
    phi: list[float]
    phi_t: list[float]
    vacuum_exterior: bool = False

    @classmethod
    def from_state(cls, state: PhaseSpaceState) -> "PhaseSpaceDocument":
        return cls(
            r_grid=state.r_grid.tolist(),
            p_grid=state.p_grid.tolist(),
            f=state.f.tolist(),
            phi=state.phi.tolist(),
            phi_t=state.phi_t.tolist(),
            vacuum_exterior=state.vacuum_exterior,
        )

    def to_state(self) -> PhaseSpaceState:
        """Rebuild the state; grid and shape invariants are checked there."""
        return PhaseSpaceState(
            r_grid=np.asarray(self.r_grid, dtype=np.float64),
            p_grid=np.asarray(self.p_grid, dtype=np.float64),
            f=np.asarray(self.f, dtype=np.float64),
            phi=np.asarray(self.phi, dtype=np.float64),
            phi_t=np.asarray(self.phi_t, dtype=np.float64),
            vacuum_exterior=self.vacuum_exterior,
        )


class KKTBlock(BaseModel):
    """Multiplier fit of a computed minimizer."""

    e0: float
    c: float
    residual: float
    slackness: float | None = Field(description="None when f is positive on every node")
    rank_correlation: float
    support_size: int

    @classmethod
    def from_fit(cls, fit: KKTFit) -> "KKTBlock":
        return cls(
            e0=fit.e0,
            c=fit.c,
            residual=fit.residual,
            slackness=finite_or_none(fit.slackness),
            rank_correlation=fit.rank_correlation,
            support_size=fit.support_size,
        )


class MinimizerDocument(BaseModel):
    """Final state of a descent run plus its multiplier fit."""

    state: PhaseSpaceDocument
    kkt: KKTBlock
    energy: float
    mass: float
    lq_norm: float
    k: float
    iterations: int
    converged: bool
    sub_threshold: bool

    @classmethod
    def from_result(cls, result: MinimizerResult) -> "MinimizerDocument":
        return cls(
            state=PhaseSpaceDocument.from_state(result.state),
            kkt=KKTBlock.from_fit(result.kkt),
            energy=result.energy,
            mass=result.mass,
            lq_norm=result.lq_norm,
            k=result.k,
            iterations=result.iterations,
            converged=result.converged,
            sub_threshold=result.sub_threshold,
        )


class CheckRecord(BaseModel):
    """One named identity check."""

    name: str
    passed: bool
    deviation: float | None
    tolerance: float | None = None


class RunDocument(BaseModel):
    """Summary document written next to the CSV output of a command."""

    command: str
    config_hash: str
    run_id: str
    passed: bool | None = None
    summary: dict[str, Scalar] = Field(default_factory=dict)
    checks: list[CheckRecord] = Field(default_factory=list)

    @staticmethod
    def clean(values: dict[str, Any]) -> dict[str, Scalar]:
        """Coerce numpy scalars and drop non-finite floats to None."""
        cleaned: dict[str, Scalar] = {}
        for key, value in values.items():
            if isinstance(value, np.generic):
                value = value.item()
            if isinstance(value, float):
                value = finite_or_none(value)
            cleaned[key] = value
        return cleaned


class ErrorResponse(BaseModel):
    """Machine-readable failure written to standard error.

    Example:
        ErrorResponse(
            error="2 identity check(s) failed",
            type="identity_check_error",
            failures=[{"name": "virial", "deviation": 0.5, "tolerance": 0.01}],
        ).model_dump_json()
    """

    error: str
    type: str
    detail: str | None = None
    failures: list[dict[str, Any]] = Field(default_factory=list)
