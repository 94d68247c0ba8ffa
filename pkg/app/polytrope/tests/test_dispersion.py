"""Tests for the free-transport conformal-energy dispersion check."""

import math

import numpy as np
import pytest

from app.core.exceptions import InvalidParameterError, InvalidStateError, QuadratureError
from app.polytrope.dispersion import (
    REPORT_COLUMNS,
    MomentumKind,
    SeparableState,
    check_dispersion,
    conformal_coefficients,
    linear_coefficient_closed_form,
)

R_GRID = np.linspace(0.0, 10.0, 201)[1:]
P_GRID = np.linspace(0.0, 8.0, 161)[1:]


def _gaussian(grid: np.ndarray, width: float) -> np.ndarray:
    return np.exp(-((grid / width) ** 2))


def _gridded(x_shift: float = 0.0, p_shift: float = 0.0) -> SeparableState:
    return SeparableState(
        r_grid=R_GRID,
        spatial=_gaussian(R_GRID, 1.0),
        p_grid=P_GRID,
        momentum=_gaussian(P_GRID, 0.7),
        x_shift=x_shift,
        p_shift=p_shift,
    )


def _shell(p0: float, x_shift: float = 0.0, p_shift: float = 0.0) -> SeparableState:
    return SeparableState(
        r_grid=R_GRID,
        spatial=_gaussian(R_GRID, 1.0),
        kind=MomentumKind.SHELL,
        shell_radius=p0,
        momentum_mass=2.0,
        x_shift=x_shift,
        p_shift=p_shift,
    )


def _cold(x_shift: float = 0.0, p_shift: float = 0.0) -> SeparableState:
    return SeparableState(
        r_grid=R_GRID,
        spatial=_gaussian(R_GRID, 1.0),
        kind=MomentumKind.COLD,
        momentum_mass=1.5,
        x_shift=x_shift,
        p_shift=p_shift,
    )


class TestSeparableState:
    """Tests for SeparableState validation."""

    def test_negative_profile(self) -> None:
        """Negative spatial values are rejected."""
        with pytest.raises(InvalidStateError):
            SeparableState(r_grid=R_GRID, spatial=-_gaussian(R_GRID, 1.0), kind=MomentumKind.COLD)

    def test_gridded_needs_momentum(self) -> None:
        """A gridded momentum factor needs its profile."""
        with pytest.raises(InvalidStateError):
            SeparableState(r_grid=R_GRID, spatial=_gaussian(R_GRID, 1.0))

    def test_shell_radius(self) -> None:
        """Shells need a positive radius."""
        with pytest.raises(InvalidStateError):
            _shell(0.0)

    def test_gaussian_mass(self) -> None:
        """The spatial Gaussian carries pi^(3/2)."""
        assert _gridded().spatial_mass() == pytest.approx(math.pi**1.5, rel=1e-8)


class TestConformalCoefficients:
    """Tests for conformal_coefficients."""

    def test_even_data(self) -> None:
        """Data even in x or in p carries no linear term."""
        assert conformal_coefficients(_gridded()).c1 == 0.0
        coefficients = conformal_coefficients(_gridded(x_shift=1.0))
        assert abs(coefficients.c1) <= 1e-12 * coefficients.m

    def test_monokinetic_shell(self) -> None:
        """A shell at p0 gives c2 = m p0^2 / sqrt(1 + p0^2) and h = m sqrt(1 + p0^2)."""
        coefficients = conformal_coefficients(_shell(1.0))
        assert coefficients.c2 == pytest.approx(coefficients.m / math.sqrt(2.0), rel=1e-12)
        assert coefficients.h == pytest.approx(coefficients.m * math.sqrt(2.0), rel=1e-12)

    def test_cold_equality(self) -> None:
        """Cold data at rest has h = m and c2 = 0."""
        coefficients = conformal_coefficients(_cold())
        assert coefficients.h == coefficients.m
        assert coefficients.c2 == 0.0
        assert coefficients.dispersion_margin == 0.0

    def test_margin_nonnegative(self) -> None:
        """c2 >= h - m for gridded, shell and boosted data."""
        for state in (_gridded(), _shell(2.5), _gridded(0.5, 1.5), _shell(0.3, 1.0, -2.0)):
            assert conformal_coefficients(state).dispersion_margin >= 0.0

    def test_parity(self) -> None:
        """Reflecting the spatial shift negates the linear term."""
        forward = conformal_coefficients(_gridded(x_shift=1.2, p_shift=0.8))
        backward = conformal_coefficients(_gridded(x_shift=-1.2, p_shift=0.8))
        assert forward.c1 > 0.0
        assert backward.c1 == -forward.c1
        assert backward.c0 == pytest.approx(forward.c0, rel=1e-14)

    @pytest.mark.parametrize("kind", ["gridded", "shell", "cold"])
    def test_boosted_linear_term(self, kind: str) -> None:
        """Quadrature of c1 agrees with 2 x_s p_s m."""
        state = {
            "gridded": _gridded(1.3, 0.9),
            "shell": _shell(0.6, 1.3, 0.9),
            "cold": _cold(1.3, 0.9),
        }[kind]
        coefficients = conformal_coefficients(state)
        assert coefficients.c1 == pytest.approx(linear_coefficient_closed_form(state), rel=1e-12)
        assert coefficients.q0 == pytest.approx(0.5 * coefficients.c1, rel=1e-15)

    def test_cold_transport(self) -> None:
        """Cold data moves rigidly, so E_C(t) has a closed form."""
        x_s, p_s = 0.7, 1.1
        state = _cold(x_s, p_s)
        coefficients = conformal_coefficients(state)
        a_mass = state.spatial_mass()
        spread = state.spatial_second_moment() - x_s**2 * a_mass
        gamma = math.sqrt(1.0 + p_s**2)
        speed = p_s / gamma
        for t in (0.0, 0.5, 3.0, 10.0):
            expected = gamma * 1.5 * (spread + (x_s + speed * t) ** 2 * a_mass)
            assert float(coefficients.evaluate(t)) == pytest.approx(expected, rel=1e-12)

    def test_undecayed_profile(self) -> None:
        """A flat spatial profile is not integrable against |x|^2."""
        state = SeparableState(
            r_grid=R_GRID, spatial=np.ones_like(R_GRID), kind=MomentumKind.COLD
        )
        with pytest.raises(QuadratureError):
            conformal_coefficients(state)


class TestCheckDispersion:
    """Tests for check_dispersion."""

    T_GRID = np.linspace(0.0, 20.0, 41)

    def test_columns(self) -> None:
        """The report tabulates with the documented header."""
        report = check_dispersion(_gridded(), self.T_GRID)
        assert list(report.frame.columns) == REPORT_COLUMNS
        assert len(report.frame) == self.T_GRID.size

    def test_negative_time(self) -> None:
        """Times must be nonnegative."""
        with pytest.raises(InvalidParameterError):
            check_dispersion(_gridded(), [-1.0, 0.0])

    def test_cold_data_passes(self) -> None:
        """The equality case h = m passes without activating the quadratic bound."""
        report = check_dispersion(_cold(), self.T_GRID)
        assert report.passed
        assert report.t_activation is None
        assert report.violations == []

    def test_activation_time(self) -> None:
        """The quadratic bound reaches c0 at the reported time."""
        report = check_dispersion(_shell(1.0), self.T_GRID)
        coefficients = report.coefficients
        assert report.t_activation is not None
        assert (coefficients.h - coefficients.m) * report.t_activation**2 >= coefficients.c0

    def test_incoming_data(self) -> None:
        """Inward-moving data satisfies the bound from its hold time on."""
        report = check_dispersion(_gridded(x_shift=2.0, p_shift=-1.0), self.T_GRID)
        assert report.coefficients.c1 < 0.0
        assert report.passed
        late = report.frame[report.frame["t"] >= report.t_hold]
        assert bool(late["ok"].all())

    def test_randomized_family(self) -> None:
        """The bounds hold on 100 random outgoing states."""
        rng = np.random.default_rng(20240611)
        kinds = list(MomentumKind)
        for _ in range(100):
            weights = rng.uniform(0.1, 1.0, size=3)
            widths = rng.uniform(0.5, 1.5, size=3)
            spatial = sum(w * _gaussian(R_GRID, s) for w, s in zip(weights, widths, strict=True))
            kind = kinds[int(rng.integers(len(kinds)))]
            state = SeparableState(
                r_grid=R_GRID,
                spatial=spatial,
                kind=kind,
                p_grid=P_GRID,
                momentum=_gaussian(P_GRID, float(rng.uniform(0.3, 1.5))),
                shell_radius=float(rng.uniform(0.1, 3.0)),
                momentum_mass=float(rng.uniform(0.5, 2.0)),
                x_shift=float(rng.uniform(0.0, 3.0)),
                p_shift=float(rng.uniform(0.0, 2.0)),
            )
            report = check_dispersion(state, self.T_GRID)
            assert report.margin_ok
            assert report.passed, report.frame[~report.frame["ok"]]
            assert report.violations == []
