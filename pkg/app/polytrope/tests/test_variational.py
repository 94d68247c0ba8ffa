"""Tests for the constrained minimization, trial family and mass transport."""

import numpy as np
import pytest

import app.polytrope.variational as variational
from app.core.config import VariationalConfig
from app.core.exceptions import InvalidParameterError, InvalidStateError
from app.polytrope.functionals import PhaseSpaceState, energy
from app.polytrope.steady_state import PhysicalProfile, polytrope_state


def _random_state(rng: np.random.Generator, n: int = 32) -> PhaseSpaceState:
    r = np.linspace(0.0, rng.uniform(1.0, 5.0), n + 1)[1:]
    p = np.linspace(0.0, rng.uniform(0.5, 2.0), n + 1)[1:]
    f = rng.uniform(0.0, 1.0, (n, n)) * np.exp(-(r[:, None] ** 2))
    phi = -rng.uniform(0.1, 1.0) * np.exp(-(r**2))
    return PhaseSpaceState.static(r, p, f, phi, vacuum_exterior=True)


class TestRenormalize:
    """Tests for renormalize and dilate."""

    def test_feasible_state_unchanged(self) -> None:
        """A state already on the constraint set is returned as is."""
        state = variational.box_state(2.0, 0.5, 1.0)
        mass, norm = variational.constraint_values(state, 2.0)
        again = variational.renormalize(state, mass, norm, 2.0)
        np.testing.assert_array_equal(again.f, state.f)
        np.testing.assert_array_equal(again.r_grid, state.r_grid)

    def test_doubled_mass(self) -> None:
        """Both constraints are restored to 1e-10 after doubling f."""
        state = variational.box_state(2.0, 0.5, 1.0)
        fixed = variational.renormalize(state.with_f(2.0 * state.f), 2.0, 0.5, 2.0)
        mass, norm = variational.constraint_values(fixed, 2.0)
        assert mass == pytest.approx(2.0, rel=1e-10)
        assert norm == pytest.approx(0.5, rel=1e-10)

    def test_dilation_keeps_mass(self) -> None:
        """alpha^3 f(alpha x, p) has the same mass and rescaled L^q norm."""
        rng = np.random.default_rng(3)
        state = _random_state(rng)
        q = 1.5
        mass, norm = variational.constraint_values(state, q)
        dilated_mass, dilated_norm = variational.constraint_values(
            variational.dilate(state, 1.7), q
        )
        assert dilated_mass == pytest.approx(mass, rel=1e-12)
        assert dilated_norm == pytest.approx(norm * 1.7 ** (3.0 * (q - 1.0) / q), rel=1e-12)

    def test_vanishing_state_rejected(self) -> None:
        """f = 0 cannot be renormalized."""
        r = np.linspace(0.0, 1.0, 9)[1:]
        state = PhaseSpaceState.static(r, r, np.zeros((8, 8)), np.zeros(8))
        with pytest.raises(InvalidStateError):
            variational.renormalize(state, 1.0, 1.0, 2.0)


class TestScalingTransport:
    """Tests for scaling_transport."""

    def test_same_mass_is_identity(self) -> None:
        """M2 = M1 leaves the state unchanged."""
        state = _random_state(np.random.default_rng(0))
        mass = variational.phase_integral(state.f, state)
        moved = variational.scaling_transport(state, mass)
        np.testing.assert_array_equal(moved.f, state.f)
        np.testing.assert_array_equal(moved.r_grid, state.r_grid)

    def test_energy_doubles(self, physical_k1: PhysicalProfile) -> None:
        """Doubling the mass doubles the energy of a steady state."""
        state = polytrope_state(physical_k1, 64, 64)
        mass = variational.phase_integral(state.f, state)
        moved = variational.scaling_transport(state, 2.0 * mass)
        assert variational.phase_integral(moved.f, moved) == pytest.approx(2.0 * mass, rel=1e-12)
        assert energy(moved) == pytest.approx(2.0 * energy(state), rel=1e-10)

    def test_randomized_energy_identity(self) -> None:
        """E(f~, phi~) = (M2/M1) E(f, phi) on randomized states."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            state = _random_state(rng)
            mass = variational.phase_integral(state.f, state)
            target = mass * rng.uniform(0.2, 5.0)
            moved = variational.scaling_transport(state, target)
            assert energy(moved) == pytest.approx(target / mass * energy(state), rel=1e-10)

    @pytest.mark.parametrize("k", [0.5, 1.0, 1.5])
    def test_lq_norm_exponent(self, k: float) -> None:
        """The L^(1+1/k) norm scales by (M1/M2)^((2-k)/(1+k))."""
        state = _random_state(np.random.default_rng(5))
        q = 1.0 + 1.0 / k
        mass, norm = variational.constraint_values(state, q)
        _, moved_norm = variational.constraint_values(
            variational.scaling_transport(state, 3.0 * mass), q
        )
        assert moved_norm == pytest.approx(norm * (1.0 / 3.0) ** ((2.0 - k) / (1.0 + k)), rel=1e-10)

    def test_nonpositive_target_rejected(self) -> None:
        """Target mass must be positive."""
        with pytest.raises(InvalidParameterError):
            variational.scaling_transport(_random_state(np.random.default_rng(1)), 0.0)


class TestReducedField:
    """Tests for reduced_field and energy_gap."""

    def test_zero_distribution(self) -> None:
        """f = 0 gives psi = 0."""
        r = np.linspace(0.0, 1.0, 17)[1:]
        state = PhaseSpaceState.static(r, r, np.zeros((16, 16)), np.zeros(16))
        np.testing.assert_array_equal(variational.reduced_field(state), np.zeros(16))

    def test_field_is_negative(self, physical_k1: PhysicalProfile) -> None:
        """psi_f < 0 wherever the distribution has mass inside."""
        state = polytrope_state(physical_k1, 64, 64)
        assert np.all(variational.reduced_field(state) < 0.0)

    def test_quadratic_gap(self, physical_k1: PhysicalProfile) -> None:
        """Candidates away from psi_f cost at least half their squared gradient distance."""
        state = polytrope_state(physical_k1, 64, 64)
        psi = variational.reduced_field(state)
        bump = variational.bump(state.r_grid / (0.3 * state.r_grid[-1]))
        depth = 0.2 * abs(float(psi[0]))
        for candidate in (0.5 * psi, 1.5 * psi, psi - depth * bump, psi + depth * bump):
            report = variational.energy_gap(state, candidate)
            assert report.gap > 0.0
            assert report.passed, report


class TestKKTFit:
    """Tests for kkt_fit."""

    def test_exact_polytrope(self) -> None:
        """f = ((E0 - E)/c)_+^k is fitted exactly."""
        r = np.linspace(0.0, 3.0, 41)[1:]
        p = np.linspace(0.0, 1.0, 41)[1:]
        phi = -0.8 * np.exp(-(r**2))
        energy_grid = np.sqrt(np.exp(2.0 * phi)[:, None] + p[None, :] ** 2)
        f = (np.clip(0.9 - energy_grid, 0.0, None) / 2.0) ** 1.5
        fit = variational.kkt_fit(PhaseSpaceState.static(r, p, f, phi), 1.5)
        assert fit.e0 == pytest.approx(0.9, rel=1e-8)
        assert fit.c == pytest.approx(2.0, rel=1e-8)
        assert fit.residual < 1e-10
        assert fit.rank_correlation == pytest.approx(1.0)
        assert fit.slackness > -1e-6

    def test_tiny_support_rejected(self) -> None:
        """Two supported nodes are not enough to fit two multipliers."""
        r = np.linspace(0.0, 1.0, 9)[1:]
        f = np.zeros((8, 8))
        f[0, 0] = f[0, 1] = 1.0
        with pytest.raises(InvalidStateError):
            variational.kkt_fit(PhaseSpaceState.static(r, r, f, np.zeros(8)), 1.0)


class TestMinimizeEnergy:
    """Tests for minimize_energy."""

    def test_exponent_rejected(self) -> None:
        """k must lie in (0, 2)."""
        with pytest.raises(InvalidParameterError):
            variational.minimize_energy(1.0, 1.0, 2.0)

    def test_mass_rejected(self) -> None:
        """Mass must be positive."""
        with pytest.raises(InvalidParameterError):
            variational.minimize_energy(0.0, 1.0, 1.0)

    def test_projected_steps_descend(self, physical_k1: PhysicalProfile) -> None:
        """Clipped gradient steps lower the energy and keep both constraints."""
        config = VariationalConfig(direction="projected", max_iter=15)
        result = variational.minimize_energy(
            physical_k1.mass, physical_k1.lq_norm, 1.0, config
        )
        assert result.energy < result.initial_energy
        assert result.mass == pytest.approx(physical_k1.mass, rel=1e-10)
        assert result.lq_norm == pytest.approx(physical_k1.lq_norm, rel=1e-10)
        assert (result.trace["energy"] > 0.0).all()

    @pytest.mark.slow
    def test_start_at_steady_state(self, physical_k1: PhysicalProfile) -> None:
        """Starting from the steady state the polytrope-target descent barely moves."""
        state = polytrope_state(physical_k1, 64, 64)
        mass, norm = variational.constraint_values(state, 2.0)
        config = VariationalConfig(direction="polytrope")
        result = variational.minimize_energy(mass, norm, 1.0, config, initial=state)
        drop = (result.initial_energy - result.energy) / result.initial_energy
        assert 0.0 <= drop < 1e-4
        assert result.kkt_residual < 1e-2
        assert result.mass == pytest.approx(mass, rel=1e-10)
        assert result.lq_norm == pytest.approx(norm, rel=1e-10)

    def test_default_direction_is_projected(self) -> None:
        """Clipped gradient steps are the default descent."""
        assert VariationalConfig().direction == "projected"

    @pytest.mark.slow
    def test_box_converges_to_steady_state(self, physical_k1: PhysicalProfile) -> None:
        """From a uniform box, clipped gradient steps reach the steady state."""
        config = VariationalConfig(direction="projected")
        result = variational.minimize_energy(
            physical_k1.mass, physical_k1.lq_norm, 1.0, config
        )
        assert result.converged
        assert result.energy == pytest.approx(physical_k1.i_estimate, rel=1e-2)
        assert result.kkt_residual < 1e-2
        assert result.kkt.rank_correlation > 0.999
        assert result.kkt.slackness > -1e-2
        assert result.kkt_e0 == pytest.approx(physical_k1.params.e0, rel=2e-2)
        assert not result.sub_threshold
        assert result.energy < physical_k1.mass
        assert list(result.trace.columns) == variational.TRACE_COLUMNS


class TestTrialFamily:
    """Tests for the box-plus-bump trial family."""

    def test_bump_shape(self) -> None:
        """1 inside the unit ball, 0 beyond radius 2, 1/2 halfway."""
        values = variational.bump(np.array([0.5, 1.0, 1.5, 2.0, 2.5]))
        np.testing.assert_allclose(values, [1.0, 1.0, 0.5, 0.0, 0.0], atol=1e-15)

    def test_dirichlet_energy_floor(self) -> None:
        """K respects the Sobolev lower bound."""
        assert variational.bump_dirichlet_energy() >= variational.BUMP_ENERGY_FLOOR

    def test_constraints_exact(self) -> None:
        """The box has mass M and L^q norm J."""
        family = variational.TrialFamily(gamma=0.3, mass=7.0, lq_norm=1.3, k=0.8)
        assert family.box_mass == pytest.approx(7.0, rel=1e-12)
        assert family.box_lq_norm == pytest.approx(1.3, rel=1e-12)

    def test_no_field_small_momenta(self) -> None:
        """alpha = 0 and gamma -> 0 give energy -> M."""
        value = variational.test_family_energy(1e-4, 0.0, 5.0, 2.0, 1.0)
        assert value == pytest.approx(5.0, rel=1e-7)

    @pytest.mark.parametrize("gamma", [0.01, 0.2, 1.0])
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 2.0])
    def test_energy_below_bound(self, gamma: float, alpha: float) -> None:
        """The exact trial energy never exceeds the explicit bound."""
        value = variational.test_family_energy(gamma, alpha, 3.0, 0.7, 1.0)
        bound = variational.test_family_bound(gamma, alpha, 3.0, 0.7, 1.0)
        assert 0.0 < value <= bound * (1.0 + 1e-12)

    @pytest.mark.parametrize("k", [0.5, 1.0, 1.5])
    def test_large_mass_below_mass(self, k: float) -> None:
        """Above the threshold the optimized family has energy below M."""
        mass = 10.0 * variational.large_mass_threshold(1.0, k)
        family = variational.optimized_family(mass, 1.0, k)
        assert family.a_factor > 1.0
        assert family.energy <= family.bound * (1.0 + 1e-12)
        assert family.bound < mass

    def test_below_threshold_rejected(self) -> None:
        """Below the threshold A <= 1 and the optimization is refused."""
        mass = 0.5 * variational.large_mass_threshold(1.0, 1.0)
        with pytest.raises(InvalidParameterError):
            variational.optimized_family(mass, 1.0, 1.0)

    def test_negative_alpha_rejected(self) -> None:
        """The bump amplitude must be nonnegative."""
        with pytest.raises(InvalidParameterError):
            variational.test_family_energy(0.1, -1.0, 1.0, 1.0, 1.0)
