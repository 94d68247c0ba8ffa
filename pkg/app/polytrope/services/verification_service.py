"""Identity battery over one converged steady state.

Each check compares a computed deviation with its tolerance and records the
outcome under a stable name. Failures are collected, never raised one by one;
``VerificationService.run`` raises IdentityCheckError only after the whole
battery has been evaluated.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from app.core.config import GreensConfig, QuadratureConfig, SolverConfig
from app.core.exceptions import IdentityCheckError
from app.core.logging import get_logger
from app.polytrope.functionals import energy, virial_residual
from app.polytrope.momentum_integrals import mu_closed_k1, mu_scaled
from app.polytrope.radial_ode import ScaledProfile, integrate_scaled
from app.polytrope.steady_state import (
    MULTIPLIER_TOLERANCE,
    PhysicalProfile,
    exterior_field_residual,
    field_bound_margin,
    greens_crosscheck,
    multiplier_consistency,
    physical_mass_relation,
    polytrope_state,
    scale_to_physical,
    scaled_virial_sides,
)
from app.polytrope.variational import constraint_values, scaling_transport

logger = get_logger(__name__)

VIRIAL_TOLERANCE = 1e-2
EXTERIOR_TOLERANCE = 1e-8
GREENS_TOLERANCE = 1e-6
CLOSED_FORM_TOLERANCE = 1e-10
TRANSPORT_TOLERANCE = 1e-10
MASS_RELATION_TOLERANCE = 1e-6


@dataclass
class IdentityCheck:
    """One named identity: deviation against tolerance."""

    name: str
    deviation: float
    tolerance: float
    passed: bool


@dataclass
class VerificationReport:
    """Outcome of the identity battery for one (k, a, c)."""

    k: float
    a: float
    c: float
    checks: list[IdentityCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[dict[str, object]]:
        return [asdict(check) for check in self.checks if not check.passed]

    def by_name(self, name: str) -> IdentityCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_records(self) -> list[dict[str, object]]:
        return [asdict(check) for check in self.checks]

    def add(self, name: str, deviation: float, tolerance: float) -> None:
        passed = bool(np.isfinite(deviation) and deviation <= tolerance)
        self.checks.append(IdentityCheck(name, float(deviation), tolerance, passed))


def closed_form_deviation(
    samples: int = 400, psi_min: float = -20.0, quadrature: QuadratureConfig | None = None
) -> float:
    """Largest relative gap between the k = 1 closed form and the quadrature source."""
    worst = 0.0
    for psi in np.linspace(psi_min, 0.0, samples + 1)[:-1]:
        direct = mu_scaled(float(psi), 1.0, quadrature)
        worst = max(worst, abs(mu_closed_k1(float(psi)) - direct) / direct)
    return worst


def transport_deviation(phys: PhysicalProfile, n_r: int, n_p: int) -> float:
    """Relative gap of the energy under mass-doubling transport from the factor 2."""
    state = polytrope_state(phys, n_r, n_p)
    mass, _ = constraint_values(state, phys.params.q)
    moved = scaling_transport(state, 2.0 * mass)
    return abs(energy(moved) / energy(state) - 2.0) / 2.0


class VerificationService:
    """Runs the identity battery on a steady state."""

    def __init__(
        self,
        solver: SolverConfig | None = None,
        greens: GreensConfig | None = None,
        n_r: int = 64,
        n_p: int = 64,
        greens_nodes: int = 2000,
        quadrature: QuadratureConfig | None = None,
    ) -> None:
        self.solver = solver or SolverConfig()
        self.greens = greens or GreensConfig()
        self.quadrature = quadrature or QuadratureConfig()
        self.n_r = n_r
        self.n_p = n_p
        self.greens_nodes = greens_nodes

    def battery(self, profile: ScaledProfile, c: float = 1.0) -> VerificationReport:
        """Evaluate every identity on an integrated profile."""
        phys = scale_to_physical(profile, c, self.quadrature.jacobi_nodes)
        report = VerificationReport(k=profile.k, a=profile.a, c=c)

        report.add("exterior_law", exterior_field_residual(profile), EXTERIOR_TOLERANCE)
        lhs, rhs = scaled_virial_sides(profile)
        report.add("scaled_virial", abs(lhs - rhs) / abs(rhs), MULTIPLIER_TOLERANCE)
        report.add(
            "mass_relation", physical_mass_relation(phys).rel_error, MASS_RELATION_TOLERANCE
        )
        report.add("field_bound", max(0.0, -field_bound_margin(phys)), 0.0)
        report.add(
            "virial",
            virial_residual(polytrope_state(phys, self.n_r, self.n_p)),
            VIRIAL_TOLERANCE,
        )
        for check in multiplier_consistency(phys).checks:
            report.add(f"multiplier_{check.name}", check.rel_error, MULTIPLIER_TOLERANCE)
        report.add(
            "greens_agreement",
            greens_crosscheck(phys, self.greens_nodes, self.greens),
            GREENS_TOLERANCE,
        )
        report.add(
            "scaling_transport",
            transport_deviation(phys, self.n_r, self.n_p),
            TRANSPORT_TOLERANCE,
        )
        if profile.k == 1.0:
            report.add(
                "closed_form_source",
                closed_form_deviation(quadrature=self.quadrature),
                CLOSED_FORM_TOLERANCE,
            )

        log = logger.info if report.passed else logger.warning
        log(
            "verification.battery_completed",
            k=profile.k,
            a=profile.a,
            checks=len(report.checks),
            failures=[failure["name"] for failure in report.failures],
        )
        return report

    def run(self, k: float, a: float, c: float = 1.0) -> VerificationReport:
        """Integrate, scale and verify one steady state.

        Raises:
            IdentityCheckError: Any identity failed; ``failures`` lists them.
        """
        profile = integrate_scaled(a, k, self.solver, quadrature=self.quadrature)
        report = self.battery(profile, c)
        if not report.passed:
            raise IdentityCheckError(
                f"{len(report.failures)} identity check(s) failed for k={k}, a={a}",
                failures=report.failures,
            )
        return report
