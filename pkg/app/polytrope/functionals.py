"""Gridded phase-space states and the scalar functionals evaluated on them.

A state is spherically symmetric in x and isotropic in p, so f lives on an
(r, |p|) grid and every integral is a nested shell quadrature. Functionals:

- mass, kinetic energy, field energies and the Hamiltonian
- the L^q norm of f (power-law Casimir)
- conformal energy and the constant Q0 of the dispersion estimate
- both sides of the virial identity

States whose potential continues beyond the grid as a vacuum field
(r^2 phi' constant) carry ``vacuum_exterior=True``; the exterior part of the
field energy is then added analytically.
"""

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.core.exceptions import InvalidParameterError, InvalidStateError
from app.core.logging import get_logger
from app.shared.quadrature import FOUR_PI, shell_integral

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

# Sharp-enough Sobolev bound ||u||_6 <= eta ||grad u||_2 on R^3
SOBOLEV_ETA = 2.0 / math.sqrt(3.0) * math.pi ** (-2.0 / 3.0)

# Relative size of f on the outer boundary that counts as truncated support
_TRUNCATION_LEVEL = 1e-12


def _as_grid(values: ArrayLike, name: str) -> FloatArray:
    grid = np.asarray(values, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidStateError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(grid)):
        raise InvalidStateError(f"{name} contains non-finite values")
    if grid[0] <= 0.0:
        raise InvalidStateError(f"{name} must be strictly positive")
    if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
        raise InvalidStateError(f"{name} must be strictly increasing")
    return grid


def radial_gradient(values: FloatArray, r_grid: FloatArray) -> FloatArray:
    """Second-order finite-difference derivative along the radial grid."""
    if r_grid.size < 3:
        raise InvalidStateError("radial derivative needs at least three nodes")
    return np.asarray(np.gradient(values, r_grid, edge_order=2), dtype=np.float64)


# ====================
# State and reports
# ====================


@dataclass(frozen=True)
class PhaseSpaceState:
    """Spherically symmetric, momentum-isotropic state (f, phi, phi_t) on a grid.

    Attributes:
        r_grid: Strictly increasing positive radii.
        p_grid: Strictly increasing positive momentum magnitudes.
        f: Nonnegative values of shape (len(r_grid), len(p_grid)).
        phi: Potential on r_grid.
        phi_t: Time derivative of the potential on r_grid.
        vacuum_exterior: The potential continues beyond the grid with
            r^2 phi' constant.
    """

    r_grid: FloatArray
    p_grid: FloatArray
    f: FloatArray
    phi: FloatArray
    phi_t: FloatArray
    vacuum_exterior: bool = False

    def __post_init__(self) -> None:
        r_grid = _as_grid(self.r_grid, "r_grid")
        p_grid = _as_grid(self.p_grid, "p_grid")
        f = np.asarray(self.f, dtype=np.float64)
        phi = np.asarray(self.phi, dtype=np.float64)
        phi_t = np.asarray(self.phi_t, dtype=np.float64)

        if f.shape != (r_grid.size, p_grid.size):
            raise InvalidStateError(
                f"f has shape {f.shape}, expected {(r_grid.size, p_grid.size)}"
            )
        if not np.all(np.isfinite(f)):
            raise InvalidStateError("f contains non-finite values")
        if np.any(f < 0.0):
            raise InvalidStateError("f must be nonnegative")
        for name, values in (("phi", phi), ("phi_t", phi_t)):
            if values.shape != r_grid.shape:
                raise InvalidStateError(f"{name} must have one value per radial node")
            if not np.all(np.isfinite(values)):
                raise InvalidStateError(f"{name} contains non-finite values")

        object.__setattr__(self, "r_grid", r_grid)
        object.__setattr__(self, "p_grid", p_grid)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "phi_t", phi_t)

    @classmethod
    def static(
        cls,
        r_grid: ArrayLike,
        p_grid: ArrayLike,
        f: ArrayLike,
        phi: ArrayLike,
        vacuum_exterior: bool = False,
    ) -> "PhaseSpaceState":
        """Build a state with phi_t = 0."""
        r = np.asarray(r_grid, dtype=np.float64)
        return cls(
            r_grid=r,
            p_grid=np.asarray(p_grid, dtype=np.float64),
            f=np.asarray(f, dtype=np.float64),
            phi=np.asarray(phi, dtype=np.float64),
            phi_t=np.zeros_like(r),
            vacuum_exterior=vacuum_exterior,
        )

    @property
    def is_static(self) -> bool:
        return not np.any(self.phi_t)

    def with_f(self, f: ArrayLike) -> "PhaseSpaceState":
        return replace(self, f=np.asarray(f, dtype=np.float64))

    def with_phi(self, phi: ArrayLike) -> "PhaseSpaceState":
        return replace(self, phi=np.asarray(phi, dtype=np.float64))

    def energy_grid(self) -> FloatArray:
        """Particle energy sqrt(exp(2 phi) + |p|^2) on the (r, p) grid."""
        return np.sqrt(np.exp(2.0 * self.phi)[:, None] + self.p_grid[None, :] ** 2)


@dataclass
class FunctionalReport:
    """Conserved and diagnostic scalars of a state.

    ``e_field`` includes ``e_field_tail``, the analytic exterior contribution
    of a vacuum-continued potential. ``conformal_truncated`` marks a
    conformal energy that depends on where the grid ends.
    """

    mass: float
    e_kin: float
    e_field: float
    e_field_t: float
    hamiltonian: float
    lq_norm: float
    q: float
    conformal: float
    q0: float
    virial_lhs: float
    virial_rhs: float
    e_field_tail: float = 0.0
    conformal_truncated: bool = False

    def to_dict(self) -> dict[str, float | bool]:
        return asdict(self)


@dataclass
class LocalDensities:
    """Pointwise densities on the radial grid."""

    e: FloatArray
    q_r: FloatArray
    tau_trace: FloatArray


# ====================
# Functionals
# ====================


def _momentum_moment(state: PhaseSpaceState, weight: FloatArray | None = None) -> FloatArray:
    integrand = state.f if weight is None else state.f * weight
    result = shell_integral(integrand, state.p_grid, power=2, axis=1)
    return np.asarray(result, dtype=np.float64)


def _exterior_tail(state: PhaseSpaceState, dphi: FloatArray) -> float:
    if not state.vacuum_exterior:
        return 0.0
    radius = float(state.r_grid[-1])
    charge = radius**2 * float(dphi[-1])
    return 0.5 * FOUR_PI * charge**2 / radius


def _warn_if_truncated(state: PhaseSpaceState) -> None:
    peak = float(np.max(state.f))
    if peak == 0.0:
        return
    edge = max(float(np.max(state.f[-1, :])), float(np.max(state.f[:, -1])))
    if edge > _TRUNCATION_LEVEL * peak:
        logger.warning(
            "functionals.support_truncated",
            edge_ratio=edge / peak,
            r_max=float(state.r_grid[-1]),
            p_max=float(state.p_grid[-1]),
        )


def compute_functionals(state: PhaseSpaceState, q: float) -> FunctionalReport:
    """Evaluate every scalar functional of a state.

    Args:
        state: Gridded state.
        q: Exponent of the L^q norm, > 1.

    Returns:
        The report; ``hamiltonian`` is the exact float sum of its parts.

    Raises:
        InvalidParameterError: q <= 1.
        QuadratureError: Non-finite integrand.
    """
    if not (math.isfinite(q) and q > 1.0):
        raise InvalidParameterError(f"L^q exponent q={q} must exceed 1")
    _warn_if_truncated(state)

    energy = state.energy_grid()
    dphi = radial_gradient(state.phi, state.r_grid)

    rho = _momentum_moment(state)
    kinetic = _momentum_moment(state, energy)
    pressure = _momentum_moment(state, state.p_grid[None, :] ** 2 / energy)
    casimir = shell_integral(state.f**q, state.p_grid, power=2, axis=1)

    mass = float(shell_integral(rho, state.r_grid))
    e_kin = float(shell_integral(kinetic, state.r_grid))
    tail = _exterior_tail(state, dphi)
    e_field = 0.5 * float(shell_integral(dphi**2, state.r_grid)) + tail
    e_field_t = 0.5 * float(shell_integral(state.phi_t**2, state.r_grid))
    hamiltonian = e_kin + e_field + e_field_t
    lq_norm = float(shell_integral(np.asarray(casimir), state.r_grid)) ** (1.0 / q)

    local_energy = kinetic + 0.5 * dphi**2 + 0.5 * state.phi_t**2
    conformal = float(shell_integral(local_energy, state.r_grid, power=4))
    radial_momentum = -state.r_grid * state.phi_t * dphi
    q0 = float(shell_integral(radial_momentum - state.phi * state.phi_t, state.r_grid))

    report = FunctionalReport(
        mass=mass,
        e_kin=e_kin,
        e_field=e_field,
        e_field_t=e_field_t,
        hamiltonian=hamiltonian,
        lq_norm=lq_norm,
        q=q,
        conformal=conformal,
        q0=q0,
        virial_lhs=e_field,
        virial_rhs=float(shell_integral(pressure, state.r_grid)),
        e_field_tail=tail,
        conformal_truncated=tail > 0.0,
    )
    logger.debug("functionals.report_completed", mass=mass, hamiltonian=hamiltonian)
    return report


def energy(state: PhaseSpaceState) -> float:
    """Energy functional kinetic + (1/2) integral |grad phi|^2 of the pair (f, phi)."""
    kinetic = _momentum_moment(state, state.energy_grid())
    dphi = radial_gradient(state.phi, state.r_grid)
    field = 0.5 * float(shell_integral(dphi**2, state.r_grid)) + _exterior_tail(state, dphi)
    return float(shell_integral(kinetic, state.r_grid)) + field


def local_densities(state: PhaseSpaceState) -> LocalDensities:
    """Local energy, radial momentum and stress trace at every radial node.

    For isotropic f the momentum integral of p f vanishes, so the radial
    momentum density reduces to its field part -phi_t phi'.
    """
    energy_grid = state.energy_grid()
    dphi = radial_gradient(state.phi, state.r_grid)
    kinetic = _momentum_moment(state, energy_grid)
    pressure = _momentum_moment(state, state.p_grid[None, :] ** 2 / energy_grid)
    return LocalDensities(
        e=kinetic + 0.5 * state.phi_t**2 + 0.5 * dphi**2,
        q_r=-state.phi_t * dphi,
        tau_trace=pressure - 0.5 * dphi**2 + 1.5 * state.phi_t**2,
    )


def virial_residual(state: PhaseSpaceState) -> float:
    """Relative mismatch of the two sides of the virial identity.

    Returns |lhs - rhs| / max(lhs, rhs) with lhs = (1/2) integral |grad phi|^2
    and rhs the |p|^2/E-weighted kinetic integral; 0 when both vanish.

    Raises:
        InvalidStateError: The state is not static.
    """
    if not state.is_static:
        raise InvalidStateError("virial identity applies to static states only")
    energy_grid = state.energy_grid()
    dphi = radial_gradient(state.phi, state.r_grid)
    lhs = 0.5 * float(shell_integral(dphi**2, state.r_grid)) + _exterior_tail(state, dphi)
    pressure = _momentum_moment(state, state.p_grid[None, :] ** 2 / energy_grid)
    rhs = float(shell_integral(pressure, state.r_grid))
    scale = max(lhs, rhs)
    if scale == 0.0:
        return 0.0
    return abs(lhs - rhs) / scale


def positivity_floor(state: PhaseSpaceState) -> float:
    """e_kin - M exp(min phi), nonnegative because E >= exp(phi) pointwise."""
    report_mass = float(shell_integral(_momentum_moment(state), state.r_grid))
    kinetic = float(shell_integral(_momentum_moment(state, state.energy_grid()), state.r_grid))
    return kinetic - report_mass * math.exp(float(np.min(state.phi)))


def sobolev_ratio(r_grid: ArrayLike, phi: ArrayLike) -> float:
    """Ratio ||phi||_{L^6} / ||grad phi||_{L^2} of a radial profile.

    Raises:
        InvalidParameterError: Zero gradient norm.
    """
    r = _as_grid(r_grid, "r_grid")
    values = np.asarray(phi, dtype=np.float64)
    if values.shape != r.shape:
        raise InvalidParameterError("phi must have one value per radial node")
    peak = float(np.max(np.abs(values)))
    if peak > 0.0 and abs(float(values[-1])) > 1e-2 * peak:
        logger.warning("functionals.sobolev_tail_not_decayed", edge_ratio=abs(values[-1]) / peak)
    gradient_sq = float(shell_integral(radial_gradient(values, r) ** 2, r))
    if gradient_sq <= 0.0:
        raise InvalidParameterError("profile has zero gradient norm")
    l6 = float(shell_integral(values**6, r)) ** (1.0 / 6.0)
    return l6 / math.sqrt(gradient_sq)
