"""Unit tests for momentum-space integrals.

Covers the scaled source and its k = 1 closed form, the physical source and
its relation to the scaled one, vectorized ansatz moments, rho/mu profiles of
gridded states and the source table.
"""

import math

import numpy as np
import pytest

from app.core.exceptions import InvalidParameterError, QuadratureError
from app.polytrope.functionals import PhaseSpaceState
from app.polytrope.momentum_integrals import (
    Moment,
    MuTable,
    PolytropeParams,
    ansatz_moment,
    density_physical,
    density_scaled,
    lq_density_physical,
    mu_closed_k1,
    mu_scaled,
    poisson_rhs,
    rho_moments,
    scaled_moment,
    source_from_scaled,
    source_physical,
)


class TestPolytropeParams:
    """Tests for ansatz constant validation."""

    def test_valid_params(self) -> None:
        """Valid constants should expose q = 1 + 1/k."""
        params = PolytropeParams(k=0.5, e0=0.8, c=2.0)
        assert params.q == pytest.approx(3.0)

    @pytest.mark.parametrize(
        ("k", "e0", "c"), [(0.0, 0.5, 1.0), (2.0, 0.5, 1.0), (1.0, 1.0, 1.0), (1.0, 0.5, 0.0)]
    )
    def test_invalid_params_rejected(self, k: float, e0: float, c: float) -> None:
        """Constants outside their domains should fail validation."""
        with pytest.raises(ValueError):
            PolytropeParams(k=k, e0=e0, c=c)

    def test_params_are_frozen(self) -> None:
        """Params should be immutable."""
        params = PolytropeParams(k=1.0, e0=0.5)
        with pytest.raises(ValueError):
            params.k = 1.5  # type: ignore[misc]


class TestMuScaled:
    """Tests for the scaled source."""

    @pytest.mark.parametrize("k", [0.5, 1.0, 1.5, 2.0])
    def test_zero_at_empty_well(self, k: float) -> None:
        """psi >= 0 leaves no momentum range."""
        assert mu_scaled(0.0, k) == 0.0
        assert mu_scaled(0.3, k) == 0.0

    def test_deep_well_limit_k1(self) -> None:
        """Deep wells approach 2*pi/3 for k = 1."""
        assert mu_scaled(-20.0, 1.0) == pytest.approx(2.0 * math.pi / 3.0, abs=1e-6)

    @pytest.mark.parametrize("k", [0.5, 1.0, 1.5])
    def test_deep_well_limit_general_k(self, k: float) -> None:
        """Deep wells approach 4*pi/((k+1)(k+2))."""
        expected = 4.0 * math.pi / ((k + 1.0) * (k + 2.0))
        assert mu_scaled(-30.0, k) == pytest.approx(expected, rel=1e-8)

    def test_reference_value(self) -> None:
        """psi = -0.5, k = 1 should match the hand-integrated antiderivative."""
        assert mu_scaled(-0.5, 1.0) == pytest.approx(0.3823, abs=5e-4)

    def test_strictly_decreasing(self) -> None:
        """The source grows with well depth."""
        values = [mu_scaled(psi, 1.3) for psi in np.linspace(-5.0, -0.01, 30)]
        assert all(a > b for a, b in zip(values, values[1:], strict=False))

    def test_non_finite_psi_rejected(self) -> None:
        """NaN input should raise."""
        with pytest.raises(InvalidParameterError):
            mu_scaled(float("nan"), 1.0)

    def test_exponent_out_of_range(self) -> None:
        """k outside (0, 2] should raise."""
        with pytest.raises(InvalidParameterError):
            mu_scaled(-1.0, 2.5)


class TestMuClosedK1:
    """Tests for the k = 1 closed form."""

    def test_zero_at_psi_zero(self) -> None:
        """Both bracket terms vanish at psi = 0."""
        assert mu_closed_k1(0.0) == 0.0

    def test_agrees_with_quadrature(self) -> None:
        """Closed form should match adaptive quadrature to 1e-10 relative on [-20, 0)."""
        for psi in -np.logspace(-6.0, math.log10(20.0), 40):
            assert mu_closed_k1(float(psi)) == pytest.approx(
                mu_scaled(float(psi), 1.0), rel=1e-10
            )

    def test_series_branch_continuous(self) -> None:
        """Both sides of the series switch should agree."""
        psi_switch = 0.5 * math.log(1.0 - 0.25)
        below = mu_closed_k1(psi_switch + 1e-9)
        above = mu_closed_k1(psi_switch - 1e-9)
        assert below == pytest.approx(above, rel=1e-7)

    def test_deep_limit(self) -> None:
        """psi = -20 should approach 2*pi/3."""
        assert mu_closed_k1(-20.0) == pytest.approx(2.0 * math.pi / 3.0, abs=1e-6)

    def test_printed_variant_is_negative(self) -> None:
        """The published factor (1 - 2 e^{2 psi}) yields a negative value at psi = -0.5."""
        assert mu_closed_k1(-0.5, printed=True) < 0.0
        assert mu_closed_k1(-0.5) > 0.0


class TestSourcePhysical:
    """Tests for the physical source of the field equation."""

    def test_zero_at_cutoff(self) -> None:
        """phi = ln E0 leaves an empty energy range."""
        params = PolytropeParams(k=1.0, e0=0.6)
        assert source_physical(math.log(0.6), params) == 0.0
        assert source_physical(0.0, params) == 0.0

    def test_deep_limit(self) -> None:
        """phi -> -inf approaches 4*pi*E0^3/6 for k = 1, c = 1."""
        params = PolytropeParams(k=1.0, e0=0.8)
        assert source_physical(-40.0, params) == pytest.approx(
            4.0 * math.pi * 0.8**3 / 6.0, rel=1e-8
        )

    @pytest.mark.parametrize("phi", [-3.0, -1.0, -0.6, -0.4])
    def test_relation_to_scaled_source(self, phi: float) -> None:
        """Physical source equals c^{-k} E0^{k+2} mu(phi - ln E0)."""
        params = PolytropeParams(k=0.5, e0=0.7, c=1.3)
        assert source_physical(phi, params) == pytest.approx(
            source_from_scaled(phi, params), rel=1e-9
        )

    def test_nonincreasing_in_phi(self) -> None:
        """Shallower potentials carry less source."""
        params = PolytropeParams(k=1.5, e0=0.9, c=0.7)
        values = [source_physical(phi, params) for phi in np.linspace(-4.0, 0.0, 25)]
        assert all(a >= b for a, b in zip(values, values[1:], strict=False))

    def test_poisson_rhs_factor(self) -> None:
        """The field-equation source carries an extra exp(2 phi)."""
        params = PolytropeParams(k=1.0, e0=0.8)
        phi = -0.9
        assert poisson_rhs(phi, params) == pytest.approx(
            math.exp(2.0 * phi) * source_physical(phi, params), rel=1e-14
        )


class TestAnsatzMoments:
    """Tests for the Gauss-Jacobi moments."""

    def test_source_matches_adaptive(self) -> None:
        """Gauss-Jacobi source should match adaptive quadrature."""
        params = PolytropeParams(k=0.5, e0=0.75, c=1.1)
        phi = np.array([-2.5, -1.0, -0.5, -0.3])
        expected = [source_physical(float(value), params) for value in phi]
        np.testing.assert_allclose(ansatz_moment(phi, params, Moment.SOURCE), expected, rtol=1e-9)

    def test_scaled_density_matches_adaptive(self) -> None:
        """Scaled density by both rules should agree."""
        for psi in (-3.0, -1.0, -0.1):
            assert float(scaled_moment(psi, 1.2, Moment.DENSITY)) == pytest.approx(
                density_scaled(psi, 1.2), rel=1e-9
            )

    def test_zero_outside_well(self) -> None:
        """exp(phi) >= E0 gives vanishing moments."""
        params = PolytropeParams(k=1.0, e0=0.5)
        values = density_physical(np.array([math.log(0.5), 0.0, 0.5]), params)
        np.testing.assert_array_equal(values, np.zeros(3))

    @pytest.mark.parametrize("k", [0.5, 1.0, 1.5])
    def test_pressure_casimir_identity(self, k: float) -> None:
        """integral |p|^2/E f0 dp equals 3c/(k+1) * integral f0^(1+1/k) dp."""
        params = PolytropeParams(k=k, e0=0.85, c=1.4)
        phi = np.linspace(-2.0, -0.2, 7)
        pressure = ansatz_moment(phi, params, Moment.PRESSURE)
        casimir = lq_density_physical(phi, params)
        np.testing.assert_allclose(pressure, 3.0 * params.c / (k + 1.0) * casimir, rtol=1e-9)

    def test_non_finite_potential_rejected(self) -> None:
        """Non-finite potentials signal a corrupt state."""
        with pytest.raises(QuadratureError):
            ansatz_moment(np.array([np.inf]), PolytropeParams(k=1.0, e0=0.5), Moment.DENSITY)


class TestRhoMoments:
    """Tests for rho_f and mu_f of gridded states."""

    @staticmethod
    def _state(f_row: np.ndarray, p_grid: np.ndarray) -> PhaseSpaceState:
        r_grid = np.array([0.5, 1.0, 1.5])
        return PhaseSpaceState.static(r_grid, p_grid, np.tile(f_row, (3, 1)), np.zeros(3))

    def test_zero_state(self) -> None:
        """f = 0 gives zero profiles."""
        p_grid = np.linspace(0.0, 1.0, 65)[1:]
        rho, mu = rho_moments(self._state(np.zeros(64), p_grid))
        np.testing.assert_array_equal(rho, np.zeros(3))
        np.testing.assert_array_equal(mu, np.zeros(3))

    def test_indicator(self) -> None:
        """Indicator of the unit momentum ball gives 4*pi/3 and 2*pi."""
        p_grid = np.linspace(0.0, 1.0, 65)[1:]
        rho, mu = rho_moments(self._state(np.ones(64), p_grid))
        np.testing.assert_allclose(rho, 4.0 * math.pi / 3.0, rtol=1e-12)
        np.testing.assert_allclose(mu, 2.0 * math.pi, rtol=1e-12)

    def test_linearity(self) -> None:
        """Doubling f doubles both profiles."""
        p_grid = np.linspace(0.0, 2.0, 65)[1:]
        row = np.exp(-(p_grid**2))
        rho, mu = rho_moments(self._state(row, p_grid))
        rho2, mu2 = rho_moments(self._state(2.0 * row, p_grid))
        np.testing.assert_allclose(rho2, 2.0 * rho, rtol=1e-15)
        np.testing.assert_allclose(mu2, 2.0 * mu, rtol=1e-15)

    def test_singular_near_origin_reported(self) -> None:
        """f ~ 1/|p|^2 makes the 1/|p| weight non-integrable."""
        p_grid = np.linspace(0.0, 1.0, 65)[1:]
        with pytest.raises(QuadratureError):
            rho_moments(self._state(1.0 / p_grid**2, p_grid))


class TestMuTable:
    """Tests for the tabulated source."""

    def test_validation_error_small(self) -> None:
        """Table should match adaptive quadrature to 1e-9."""
        table = MuTable(k=1.0, psi_min=-2.0)
        assert table.validate(samples=60) < 1e-9

    def test_matches_closed_form(self) -> None:
        """Table values should match the k = 1 closed form."""
        table = MuTable(k=1.0, psi_min=-3.0)
        for psi in (-2.9, -1.234, -0.2, -1e-3):
            assert table.source(psi) == pytest.approx(mu_closed_k1(psi), rel=1e-8)

    def test_density_and_fallback(self) -> None:
        """Density from the table and below its range should match direct evaluation."""
        table = MuTable(k=0.5, psi_min=-1.0)
        assert table.density(-0.7) == pytest.approx(density_scaled(-0.7, 0.5), rel=1e-8)
        assert table.source(-1.5) == pytest.approx(mu_scaled(-1.5, 0.5), rel=1e-9)
        assert table.source(0.1) == 0.0

    def test_invalid_bound_rejected(self) -> None:
        """psi_min must be negative."""
        with pytest.raises(InvalidParameterError):
            MuTable(k=1.0, psi_min=0.0)
