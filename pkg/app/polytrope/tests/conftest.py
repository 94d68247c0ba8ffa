"""Pytest fixtures for polytrope tests.

Integrated profiles are session-scoped: several suites reuse the same
converged solution.
"""

import pytest

from app.core.config import SolverConfig
from app.polytrope.radial_ode import ScaledProfile, integrate_scaled
from app.polytrope.steady_state import PhysicalProfile, scale_to_physical


@pytest.fixture(scope="session")
def solver_config() -> SolverConfig:
    """Default shooting configuration."""
    return SolverConfig()


@pytest.fixture(scope="session")
def profile_k1(solver_config: SolverConfig) -> ScaledProfile:
    """Converged k = 1, a = -1 profile."""
    return integrate_scaled(-1.0, 1.0, solver_config)


@pytest.fixture(scope="session")
def physical_k1(profile_k1: ScaledProfile) -> PhysicalProfile:
    """Physical steady state of the k = 1, a = -1 profile with c = 1."""
    return scale_to_physical(profile_k1, c=1.0)
