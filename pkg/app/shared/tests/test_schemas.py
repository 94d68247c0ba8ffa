"""Tests for shared Pydantic schemas."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import InvalidStateError
from app.polytrope.functionals import PhaseSpaceState
from app.polytrope.variational import KKTFit
from app.shared.schemas import (
    ErrorResponse,
    KKTBlock,
    PhaseSpaceDocument,
    RunDocument,
    finite_or_none,
)


def _state() -> PhaseSpaceState:
    r = np.linspace(0.0, 2.0, 9)[1:]
    p = np.linspace(0.0, 1.0, 5)[1:]
    f = np.outer(np.exp(-r), 1.0 - p**2)
    return PhaseSpaceState.static(r, p, f, -0.1 * np.exp(-r), vacuum_exterior=True)


class TestPhaseSpaceDocument:
    """Tests for the state document."""

    def test_json_round_trip(self) -> None:
        """States survive a JSON round trip exactly."""
        state = _state()
        text = PhaseSpaceDocument.from_state(state).model_dump_json()
        restored = PhaseSpaceDocument.model_validate_json(text).to_state()
        np.testing.assert_array_equal(restored.f, state.f)
        np.testing.assert_array_equal(restored.phi, state.phi)
        assert restored.vacuum_exterior

    def test_shape_mismatch(self) -> None:
        """A malformed document fails when rebuilt into a state."""
        document = PhaseSpaceDocument.from_state(_state()).model_copy(update={"f": [[1.0]]})
        with pytest.raises(InvalidStateError):
            document.to_state()

    def test_missing_field(self) -> None:
        """Documents need every grid."""
        with pytest.raises(ValidationError):
            PhaseSpaceDocument.model_validate({"r_grid": [1.0]})


class TestKKTBlock:
    """Tests for KKTBlock."""

    def test_infinite_slackness(self) -> None:
        """Full support serializes its slackness as null."""
        fit = KKTFit(e0=0.9, c=2.0, residual=1e-3, slackness=math.inf,
                     rank_correlation=1.0, support_size=64)
        block = KKTBlock.from_fit(fit)
        assert block.slackness is None
        assert '"slackness":null' in block.model_dump_json()


class TestRunDocument:
    """Tests for RunDocument."""

    def test_clean(self) -> None:
        """Numpy scalars become Python values and nan becomes None."""
        cleaned = RunDocument.clean({"a": np.float64(1.5), "b": math.nan, "c": np.bool_(True)})
        assert cleaned == {"a": 1.5, "b": None, "c": True}
        assert isinstance(cleaned["a"], float)

    def test_finite_or_none(self) -> None:
        """Finite values pass through."""
        assert finite_or_none(2.0) == 2.0
        assert finite_or_none(-math.inf) is None


class TestErrorResponse:
    """Tests for ErrorResponse."""

    def test_failures_default_empty(self) -> None:
        """Failure lists default to empty."""
        response = ErrorResponse(error="boom", type="config_error")
        assert response.failures == []
        assert response.detail is None
