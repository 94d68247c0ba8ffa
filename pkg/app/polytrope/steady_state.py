"""Physical steady states assembled from scaled shooting profiles.

A scaled profile with crossing data (r0, psi'(r0)) determines the cut-off
energy E0 = exp(-r0 psi'(r0)); the physical potential is then

    phi0(R) = psi(R / b) + ln E0,    b = c^(k/2) / E0^(2 + k/2)

and f0 = ((E0 - E)/c)_+^k is supported in R <= b r0. This module computes the
masses and energies of such states, the multiplier identities they satisfy,
the mass-E0 curve over a sweep, and an independent Green's-function solver
for the field equation.
"""

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from typing import Protocol

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.integrate import quad

from app.core.config import GreensConfig, QuadratureConfig, SolverConfig
from app.core.exceptions import (
    ConvergenceError,
    CrossingNotFoundError,
    InvalidParameterError,
    InvalidStateError,
    QuadratureError,
)
from app.core.logging import get_logger
from app.polytrope.functionals import PhaseSpaceState
from app.polytrope.momentum_integrals import (
    Moment,
    MuTable,
    PolytropeParams,
    ansatz_moment,
    scaled_moment,
)
from app.polytrope.radial_ode import (
    Regime,
    ScaledProfile,
    build_table,
    integrate_scaled,
    pair_regime,
)
from app.shared.quadrature import (
    FOUR_PI,
    cumulative_shell_integral,
    gauss_jacobi_unit,
    shell_integral,
)

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

MULTIPLIER_TOLERANCE = 1e-4

_RADIAL_RTOL = 1e-11
_RADIAL_LIMIT = 500


def _radial_quad(integrand: "_RadialIntegrand", upper: float) -> float:
    value, _ = quad(integrand, 0.0, upper, epsabs=0.0, epsrel=_RADIAL_RTOL, limit=_RADIAL_LIMIT)
    if not math.isfinite(value):
        raise QuadratureError("non-finite radial integral")
    return float(value)


class _RadialIntegrand(Protocol):
    def __call__(self, r: float) -> float: ...


# ====================
# Scaled quantities
# ====================


def _crossing(profile: ScaledProfile) -> tuple[float, float, float]:
    if profile.r0 is None or profile.dpsi_at_r0 is None or profile.v_inf is None:
        raise CrossingNotFoundError(f"profile a={profile.a} has no crossing")
    return profile.r0, profile.dpsi_at_r0, profile.v_inf


def _scaled_psi(profile: ScaledProfile, r: float) -> float:
    return profile.evaluate(max(r, float(profile.r_nodes[0])))[0]


def e0_from_profile(profile: ScaledProfile) -> float:
    """Cut-off energy exp(-r0 psi'(r0)) of a crossed profile.

    Raises:
        CrossingNotFoundError: The profile has no crossing.
        InvalidStateError: Nonpositive exterior slope.
    """
    r0, slope, _ = _crossing(profile)
    if slope <= 0.0:
        raise InvalidStateError(f"exterior slope {slope} must be positive")
    return math.exp(-r0 * slope)


def scaled_mass(profile: ScaledProfile) -> float:
    """Mass of the scaled distribution by nested quadrature over [0, r0]."""
    r0, _, _ = _crossing(profile)

    def integrand(r: float) -> float:
        psi = _scaled_psi(profile, r)
        return FOUR_PI * r * r * float(scaled_moment(psi, profile.k, Moment.DENSITY))

    return _radial_quad(integrand, r0)


def auxiliary_mass(profile: ScaledProfile) -> float:
    """Mass of the scaled distribution from the auxiliary potential, 4*pi*w(r0)."""
    _crossing(profile)
    if profile.mass_potential is None:
        raise InvalidStateError("profile carries no auxiliary mass potential")
    return FOUR_PI * profile.mass_potential


def scaled_field_energy(profile: ScaledProfile) -> float:
    """Integral of |grad psi|^2 over R^3, the vacuum exterior added in closed form."""
    r0, _, v0 = _crossing(profile)

    def integrand(r: float) -> float:
        slope = profile.evaluate(max(r, float(profile.r_nodes[0])))[1]
        return FOUR_PI * r * r * slope * slope

    return _radial_quad(integrand, r0) + FOUR_PI * v0 * v0 / r0


def scaled_virial_sides(profile: ScaledProfile) -> tuple[float, float]:
    """Both sides of the virial identity for the scaled pair (f, psi).

    Returns:
        Tuple ((1/2) integral |grad psi|^2, integral |p|^2/E f dp dx).
    """
    r0, _, _ = _crossing(profile)

    def integrand(r: float) -> float:
        psi = _scaled_psi(profile, r)
        return FOUR_PI * r * r * float(scaled_moment(psi, profile.k, Moment.PRESSURE))

    return 0.5 * scaled_field_energy(profile), _radial_quad(integrand, r0)


def exterior_field_residual(profile: ScaledProfile) -> float:
    """Largest relative deviation of r^2 psi' from its crossing value beyond r0."""
    r0, slope, _ = _crossing(profile)
    charge = r0 * r0 * slope
    outside = profile.r_nodes >= r0
    deviation = np.abs(profile.r_nodes[outside] ** 2 * profile.dpsi[outside] - charge)
    return float(np.max(deviation)) / charge if deviation.size else 0.0


# ====================
# Physical profiles
# ====================


@dataclass
class PhysicalProfile:
    """Steady state in physical variables.

    ``potential_scale`` multiplies the potential everywhere; it is 1 for the
    true steady state and differs only for deliberately corrupted copies.
    """

    params: PolytropeParams
    scaled: ScaledProfile
    b: float
    r_nodes: FloatArray
    phi: FloatArray
    support_radius: float
    mass: float
    lq_norm: float
    kinetic: float
    field_energy: float
    i_estimate: float
    potential_scale: float = 1.0
    jacobi_nodes: int = 48

    @property
    def exterior_charge(self) -> float:
        """R^2 phi0'(R) on the vacuum exterior."""
        return self.potential_scale * self.b * _crossing(self.scaled)[2]

    def phi_at(self, radius: float) -> float:
        psi = _scaled_psi(self.scaled, radius / self.b)
        return self.potential_scale * (psi + math.log(self.params.e0))

    def dphi_at(self, radius: float) -> float:
        scaled_r = max(radius / self.b, float(self.scaled.r_nodes[0]))
        return self.potential_scale * self.scaled.evaluate(scaled_r)[1] / self.b

    def with_potential_scaled(self, factor: float) -> "PhysicalProfile":
        """Copy with phi0 multiplied by ``factor`` (for negative checks)."""
        return replace(
            self, phi=factor * self.phi, potential_scale=self.potential_scale * factor
        )

    def to_frame(self) -> pd.DataFrame:
        """Stored nodes as columns r, phi, rho."""
        rho = ansatz_moment(self.phi, self.params, Moment.DENSITY, self.jacobi_nodes)
        return pd.DataFrame({"r": self.r_nodes, "phi": self.phi, "rho": rho})

    def summary(self) -> dict[str, float]:
        return {
            "k": self.params.k,
            "e0": self.params.e0,
            "c": self.params.c,
            "a": self.scaled.a,
            "b": self.b,
            "support_radius": self.support_radius,
            "mass": self.mass,
            "lq_norm": self.lq_norm,
            "kinetic": self.kinetic,
            "field_energy": self.field_energy,
            "i_estimate": self.i_estimate,
        }


@dataclass
class _Integrals:
    mass: float
    kinetic: float
    lq_norm: float
    field_energy: float

    @property
    def energy(self) -> float:
        return self.kinetic + 0.5 * self.field_energy


def _physical_integrals(phys: PhysicalProfile, nodes: int = 48) -> _Integrals:
    params = phys.params

    def moment_integral(moment: Moment) -> float:
        def integrand(radius: float) -> float:
            value = ansatz_moment(phys.phi_at(radius), params, moment, nodes)
            return FOUR_PI * radius * radius * float(value)

        return _radial_quad(integrand, phys.support_radius)

    def gradient_integrand(radius: float) -> float:
        return FOUR_PI * radius * radius * phys.dphi_at(radius) ** 2

    charge = phys.exterior_charge
    field_energy = (
        _radial_quad(gradient_integrand, phys.support_radius)
        + FOUR_PI * charge * charge / phys.support_radius
    )
    casimir = moment_integral(Moment.LQ)
    return _Integrals(
        mass=moment_integral(Moment.DENSITY),
        kinetic=moment_integral(Moment.KINETIC),
        lq_norm=casimir ** (params.k / (params.k + 1.0)),
        field_energy=field_energy,
    )


def scale_to_physical(
    profile: ScaledProfile, c: float = 1.0, nodes: int = 48
) -> PhysicalProfile:
    """Map a crossed scaled profile to the physical steady state.

    Args:
        profile: Scaled profile with a crossing.
        c: Scale constant of the ansatz, > 0.
        nodes: Gauss-Jacobi nodes of the momentum integrals.

    Returns:
        The physical profile with mass, L^q norm, kinetic and field energies
        and the energy estimate I = kinetic + field/2.
    """
    if not (math.isfinite(c) and c > 0.0):
        raise InvalidParameterError(f"scale constant c={c} must be positive")
    r0, _, _ = _crossing(profile)
    e0 = e0_from_profile(profile)
    params = PolytropeParams(k=profile.k, e0=e0, c=c)
    b = c ** (profile.k / 2.0) / e0 ** (2.0 + profile.k / 2.0)

    phys = PhysicalProfile(
        params=params,
        scaled=profile,
        b=b,
        r_nodes=b * profile.r_nodes,
        phi=profile.psi + math.log(e0),
        support_radius=b * r0,
        mass=0.0,
        lq_norm=0.0,
        kinetic=0.0,
        field_energy=0.0,
        i_estimate=0.0,
        jacobi_nodes=nodes,
    )
    integrals = _physical_integrals(phys, nodes)
    phys = replace(
        phys,
        mass=integrals.mass,
        lq_norm=integrals.lq_norm,
        kinetic=integrals.kinetic,
        field_energy=integrals.field_energy,
        i_estimate=integrals.energy,
    )
    logger.debug(
        "steady_state.physical_profile_completed",
        a=profile.a,
        e0=e0,
        b=b,
        mass=phys.mass,
        i_estimate=phys.i_estimate,
    )
    return phys


@dataclass
class MassRelation:
    """Physical mass computed directly and through the scaled mass."""

    direct: float
    via_scaled: float
    scaled_mass: float
    rel_error: float


def physical_mass_relation(phys: PhysicalProfile) -> MassRelation:
    """Compare the direct mass with (b/E0) times the scaled mass.

    The factor combines the spatial dilation b^3 with the momentum factor
    c^(-k) E0^(3+k); both reduce to b/E0.
    """
    m_scaled = scaled_mass(phys.scaled)
    via_scaled = phys.b / phys.params.e0 * m_scaled
    rel_error = abs(phys.mass - via_scaled) / phys.mass
    logger.info(
        "steady_state.mass_relation_checked",
        direct=phys.mass,
        via_scaled=via_scaled,
        rel_error=rel_error,
    )
    return MassRelation(
        direct=phys.mass, via_scaled=via_scaled, scaled_mass=m_scaled, rel_error=rel_error
    )


def field_bound_margin(phys: PhysicalProfile, samples: int = 200) -> float:
    """M/(4*pi) - max R^2 phi0'(R); nonnegative since exp(2 phi)/E <= 1 inside the source."""
    radii = np.linspace(0.0, 2.0 * phys.support_radius, samples + 1)[1:]
    enclosed = max(radius * radius * phys.dphi_at(float(radius)) for radius in radii)
    return phys.mass / FOUR_PI - enclosed


def polytrope_state(
    phys: PhysicalProfile, n_r: int = 64, n_p: int = 64
) -> PhaseSpaceState:
    """Gridded phase-space state of a steady state.

    The radial grid ends at the support radius and the potential is marked
    as vacuum-continued beyond it; the momentum grid ends at the largest
    momentum in the support.
    """
    if n_r < 3 or n_p < 3:
        raise InvalidParameterError("polytrope grids need at least three nodes each")
    params = phys.params
    r_grid = np.linspace(0.0, phys.support_radius, n_r + 1)[1:]
    phi = np.array([phys.phi_at(float(radius)) for radius in r_grid])
    p_top = math.sqrt(max(params.e0**2 - math.exp(2.0 * phys.phi_at(0.0)), 0.0))
    p_grid = np.linspace(0.0, p_top, n_p + 1)[1:]
    energy = np.sqrt(np.exp(2.0 * phi)[:, None] + p_grid[None, :] ** 2)
    f = (np.clip(params.e0 - energy, 0.0, None) / params.c) ** params.k
    return PhaseSpaceState.static(r_grid, p_grid, f, phi, vacuum_exterior=True)


# ====================
# Multiplier identities
# ====================


@dataclass
class MultiplierCheck:
    """One identity of the multiplier battery."""

    name: str
    computed: float
    expected: float
    rel_error: float
    passed: bool


@dataclass
class MultiplierReport:
    """Outcome of every multiplier identity for one steady state."""

    checks: list[MultiplierCheck] = field(default_factory=list)
    tolerance: float = MULTIPLIER_TOLERANCE

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed]

    def by_name(self, name: str) -> MultiplierCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_records(self) -> list[dict[str, float | str | bool]]:
        return [asdict(check) for check in self.checks]


def _relative(computed: float, expected: float) -> float:
    return abs(computed - expected) / max(abs(expected), 1e-300)


def multiplier_consistency(
    phys: PhysicalProfile, tolerance: float = MULTIPLIER_TOLERANCE
) -> MultiplierReport:
    """Check the Lagrange-multiplier identities of a steady state.

    M, J, I and D = integral |grad phi0|^2 are recomputed from
    the profile's potential, so a corrupted potential shows up in every
    identity that involves them:

    - e0_formula: E0 = (I - (2-k)/6 D) / M
    - c_formula: c = (k+1)/(2-k) (I - E0 M) / J^(1+1/k)
    - e0_interval: (k+4)/6 I/M < E0 < I/M
    - support_radius: r0 = -Q / (4 pi ln E0), Q = (6/(2-k)) E0 M - ((k+4)/(2-k)) I
    - slope_at_support: phi0'(r0) = 4 pi (ln E0)^2 / Q
    - exterior_charge: R^2 phi0'(R) constant for R >= r0 on the integrated
      continuation of the field equation past the support
    """
    params = phys.params
    k, e0, c = params.k, params.e0, params.c
    integrals = _physical_integrals(phys, phys.jacobi_nodes)
    mass, lq_norm = integrals.mass, integrals.lq_norm
    d_field = integrals.field_energy
    energy = integrals.energy
    log_e0 = math.log(e0)
    report = MultiplierReport(tolerance=tolerance)

    def add(name: str, computed: float, expected: float) -> None:
        rel = _relative(computed, expected)
        report.checks.append(MultiplierCheck(name, computed, expected, rel, rel <= tolerance))

    add("e0_formula", e0, (energy - (2.0 - k) / 6.0 * d_field) / mass)
    add("c_formula", c, (k + 1.0) / (2.0 - k) * (energy - e0 * mass) / lq_norm ** (1.0 + 1.0 / k))

    lower, upper = (k + 4.0) / 6.0 * energy / mass, energy / mass
    inside = lower < e0 < upper
    report.checks.append(
        MultiplierCheck("e0_interval", e0, 0.5 * (lower + upper), 0.0 if inside else 1.0, inside)
    )

    enclosed = 6.0 / (2.0 - k) * e0 * mass - (k + 4.0) / (2.0 - k) * energy
    add("support_radius", phys.support_radius, -enclosed / (FOUR_PI * log_e0))
    add("slope_at_support", phys.dphi_at(phys.support_radius), FOUR_PI * log_e0**2 / enclosed)

    scaled = phys.scaled
    outside = scaled.r_nodes >= _crossing(scaled)[0]
    charges = (
        phys.potential_scale * phys.b * scaled.r_nodes[outside] ** 2 * scaled.dpsi[outside]
    )
    spread = float(np.max(np.abs(charges - charges[0])))
    add("exterior_charge", float(charges[0]) + spread, float(charges[0]))

    if not report.passed:
        logger.warning("steady_state.multiplier_check_failed", failures=report.failures, k=k)
    return report


# ====================
# Mass curve
# ====================


@dataclass
class SweepRow:
    """Crossing data, cut-off energy and masses for one shooting parameter."""

    a: float
    r0: float
    dpsi_r0: float
    e0: float
    scaled_mass: float
    physical_mass: float


SWEEP_COLUMNS = ["a", "r0", "dpsi_r0", "e0", "scaled_mass", "physical_mass"]


@dataclass
class SweepResult:
    """Rows of a shooting-parameter sweep, sorted by a."""

    k: float
    c: float
    rows: list[SweepRow] = field(default_factory=list)
    missing: list[float] = field(default_factory=list)
    violations: list[tuple[float, float]] = field(default_factory=list)
    threshold: float | None = None

    @property
    def monotone(self) -> bool:
        return not self.violations

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=SWEEP_COLUMNS)


def sweep_row(
    a: float,
    k: float,
    c: float,
    config: SolverConfig,
    table: MuTable | None = None,
    quadrature: QuadratureConfig | None = None,
) -> SweepRow | None:
    """Integrate, scale and weigh one shooting parameter; None when psi never crosses."""
    quadrature = quadrature or QuadratureConfig()
    profile = integrate_scaled(a, k, config, table, quadrature)
    if not profile.crossed:
        return None
    phys = scale_to_physical(profile, c, quadrature.jacobi_nodes)
    r0, slope, _ = _crossing(profile)
    return SweepRow(
        a=a,
        r0=r0,
        dpsi_r0=slope,
        e0=phys.params.e0,
        scaled_mass=auxiliary_mass(profile),
        physical_mass=phys.mass,
    )


def row_regimes(rows: Sequence[SweepRow]) -> list[Regime]:
    """Regime of each row, sorted by a, from the pair it forms with the next deeper row.

    The deepest row takes the regime of the pair it starts; a single row is
    Indeterminate.
    """
    ordered = sorted(rows, key=lambda row: row.a)
    pairs = [
        pair_regime(deep.r0, deep.dpsi_r0, shallow.r0, shallow.dpsi_r0)
        for deep, shallow in zip(ordered, ordered[1:], strict=False)
    ]
    return [pairs[0], *pairs] if pairs else [Regime.INDETERMINATE] * len(ordered)


def mass_violations(rows: Sequence[SweepRow]) -> list[tuple[float, float]]:
    """Pairs of admissible shooting parameters whose physical mass fails to decrease with E0.

    Only rows in the Crossing regime belong to the admissible family.
    """
    by_a = sorted(rows, key=lambda row: row.a)
    admissible = [
        row
        for row, regime in zip(by_a, row_regimes(by_a), strict=True)
        if regime is Regime.CROSSING
    ]
    ordered = sorted(admissible, key=lambda row: row.e0)
    return [
        (low.a, high.a)
        for low, high in zip(ordered, ordered[1:], strict=False)
        if not high.physical_mass < low.physical_mass
    ]


def assemble_sweep(
    k: float, c: float, a_values: Sequence[float], rows: Sequence[SweepRow | None]
) -> SweepResult:
    """Merge per-row results (in any order) into a sorted SweepResult."""
    found = sorted((row for row in rows if row is not None), key=lambda row: row.a)
    present = {row.a for row in found}
    result = SweepResult(
        k=k,
        c=c,
        rows=found,
        missing=sorted(a for a in a_values if a not in present),
        violations=mass_violations(found) if len(found) > 1 else [],
    )
    if result.violations:
        logger.warning("steady_state.mass_curve_not_monotone", violations=result.violations)
    return result


def mass_curve(
    k: float,
    a_list: Sequence[float],
    c: float = 1.0,
    config: SolverConfig | None = None,
    quadrature: QuadratureConfig | None = None,
) -> SweepResult:
    """Sequential mass-E0 curve over shooting parameters."""
    config = config or SolverConfig()
    if not a_list:
        raise InvalidParameterError("mass curve needs at least one shooting parameter")
    if any(a >= 0.0 for a in a_list):
        raise InvalidParameterError("shooting parameters must be negative")
    table = build_table(k, min(a_list), config) if config.use_mu_table else None
    rows = [sweep_row(a, k, c, config, table, quadrature) for a in a_list]
    return assemble_sweep(k, c, a_list, rows)


# ====================
# Green's-function field solver
# ====================


class FieldSource(Protocol):
    """Momentum integral of f/sqrt(exp(2 psi) + |p|^2) at every radial node."""

    def __call__(self, psi: FloatArray) -> FloatArray: ...


class GriddedSource:
    """Source of a gridded distribution, Simpson quadrature in |p|."""

    def __init__(self, state: PhaseSpaceState) -> None:
        self.state = state

    def __call__(self, psi: FloatArray) -> FloatArray:
        energy = np.sqrt(np.exp(2.0 * psi)[:, None] + self.state.p_grid[None, :] ** 2)
        values = shell_integral(self.state.f / energy, self.state.p_grid, power=2, axis=1)
        return np.asarray(values, dtype=np.float64)


class PolytropeSource:
    """Source of the fixed distribution ((E0 - E(phi0))/c)_+^k.

    The distribution is frozen at the potential ``phi0``; only the 1/E weight
    follows the iterate. Gauss-Jacobi in |p| on [0, P(r)] absorbs the
    (P - p)^k edge.
    """

    def __init__(self, params: PolytropeParams, phi0: FloatArray, nodes: int = 48) -> None:
        t, w = gauss_jacobi_unit(nodes, params.k)
        m2 = np.exp(2.0 * np.asarray(phi0, dtype=np.float64))[:, None]
        s = np.clip(params.e0**2 - m2, 0.0, None)
        width = np.sqrt(s)
        self._p2 = (width * t) ** 2
        energy = np.sqrt(m2 + self._p2)
        gap = (s * (1.0 + t) / (params.e0 + energy)) ** params.k
        self._weights = FOUR_PI * params.c ** (-params.k) * w * width * self._p2 * gap

    def __call__(self, psi: FloatArray) -> FloatArray:
        energy = np.sqrt(np.exp(2.0 * psi)[:, None] + self._p2)
        return np.asarray(np.sum(self._weights / energy, axis=1), dtype=np.float64)


@dataclass
class GreensSolution:
    """Fixed point of the integral form of the field equation."""

    r_grid: FloatArray
    psi: FloatArray
    iterations: int
    step: float
    accelerated: int


def _greens_map(source: FieldSource, r_grid: FloatArray, psi: FloatArray) -> FloatArray:
    g = np.exp(2.0 * psi) * source(psi)
    inner = cumulative_shell_integral(g, r_grid, power=2) / FOUR_PI
    running = cumulative_shell_integral(g, r_grid, power=1) / FOUR_PI
    outer = running[-1] - running
    return np.asarray(-inner / r_grid - outer, dtype=np.float64)


def greens_solve(
    source: FieldSource,
    r_grid: FloatArray,
    config: GreensConfig | None = None,
    initial: FloatArray | None = None,
) -> GreensSolution:
    """Solve psi = -(1/r) int_0^r s^2 g - int_r^inf s g with g = exp(2 psi) * source(psi).

    Damped fixed-point iteration; after ``aitken_after`` iterations a vector
    Aitken extrapolation is tried every third step and kept only when it
    shrinks the step. The source must vanish beyond the grid.

    Raises:
        ConvergenceError: Iteration cap reached.
    """
    config = config or GreensConfig()
    r_grid = np.asarray(r_grid, dtype=np.float64)
    psi = np.zeros_like(r_grid) if initial is None else np.minimum(initial, 0.0)
    theta = config.damping

    def damped(values: FloatArray) -> FloatArray:
        return (1.0 - theta) * values + theta * _greens_map(source, r_grid, values)

    history: list[FloatArray] = []
    accelerated = 0
    step = math.inf
    for iteration in range(1, config.max_iter + 1):
        nxt = damped(psi)
        step = float(np.max(np.abs(nxt - psi)))
        psi = nxt
        if step < config.tol:
            logger.info(
                "greens.iteration_converged",
                iterations=iteration,
                step=step,
                accelerated=accelerated,
            )
            return GreensSolution(r_grid, psi, iteration, step, accelerated)

        history.append(psi)
        if iteration >= config.aitken_after and len(history) >= 3:
            x0, x1, x2 = history[-3], history[-2], history[-1]
            d1, d2 = x1 - x0, x2 - x1
            dd = d2 - d1
            denom = float(np.dot(dd, dd))
            if denom > 0.0:
                candidate = x2 - float(np.dot(d2, dd)) / denom * d2
                if np.all(candidate <= 0.0):
                    trial_step = float(np.max(np.abs(damped(candidate) - candidate)))
                    if trial_step < step:
                        psi = candidate
                        accelerated += 1
            history.clear()

    logger.warning("greens.iteration_capped", iterations=config.max_iter, step=step)
    raise ConvergenceError(f"field iteration did not converge: last step {step:.3e}")


def greens_crosscheck(
    phys: PhysicalProfile, n_r: int = 2000, config: GreensConfig | None = None
) -> float:
    """Sup-norm distance between the Green's-function field and phi0 on the support."""
    r_grid = np.linspace(0.0, phys.support_radius, n_r + 1)[1:]
    phi0 = np.array([phys.phi_at(float(radius)) for radius in r_grid])
    solution = greens_solve(PolytropeSource(phys.params, phi0), r_grid, config)
    distance = float(np.max(np.abs(solution.psi - phi0)))
    logger.info("steady_state.greens_crosscheck_completed", sup_distance=distance, n_r=n_r)
    return distance
