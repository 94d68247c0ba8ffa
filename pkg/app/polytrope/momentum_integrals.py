"""Momentum-space integrals of the isotropic polytrope ansatz.

f0 = ((E0 - E)/c)_+^k with E = sqrt(exp(2*phi) + |p|^2). Everything the field
equations need reduces to one-dimensional integrals in |p|:

- mu_scaled: the scaled source of the shooting ODE, by adaptive quadrature
- mu_closed_k1: the same source for k = 1 in closed form
- source_physical: the momentum integral of f0/E in physical variables
- ansatz_moment: vectorized Gauss-Jacobi moments (density, kinetic, source,
  pressure, L^q) used by the steady-state assembly
- rho_moments: rho_f and mu_f of a gridded state
- MuTable: spline table of the scaled source and density for the ODE RHS

Substituting p = P*t with P = sqrt(E0^2 - exp(2*phi)) turns E0 - E into
P^2 (1 - t^2)/(E0 + E), which removes the cancellation near the edge of the
well and isolates the (1 - t)^k endpoint factor.
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import BSpline, make_interp_spline

from app.core.config import QuadratureConfig
from app.core.exceptions import InvalidParameterError, QuadratureError
from app.core.logging import get_logger
from app.shared.quadrature import FOUR_PI, gauss_jacobi_unit, shell_integral

if TYPE_CHECKING:
    from app.polytrope.functionals import PhaseSpaceState

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

# Below this well width the k = 1 closed form loses digits to cancellation
_SERIES_WIDTH = 0.5


# ====================
# Parameters
# ====================


class PolytropeParams(BaseModel):
    """Ansatz constants (k, E0, c) of the isotropic polytrope."""

    model_config = ConfigDict(frozen=True)

    k: float = Field(gt=0.0, lt=2.0, description="Polytrope exponent")
    e0: float = Field(gt=0.0, lt=1.0, description="Cut-off energy E0")
    c: float = Field(default=1.0, gt=0.0, description="Scale constant")

    @property
    def q(self) -> float:
        """Exponent of the conserved L^q norm, 1 + 1/k."""
        return 1.0 + 1.0 / self.k


def check_exponent(k: float, upper_inclusive: bool = True) -> None:
    """Validate the polytrope exponent.

    Raises:
        InvalidParameterError: k outside (0, 2] (or (0, 2) when not inclusive).
    """
    ok = 0.0 < k <= 2.0 if upper_inclusive else 0.0 < k < 2.0
    if not (math.isfinite(k) and ok):
        bound = "(0, 2]" if upper_inclusive else "(0, 2)"
        raise InvalidParameterError(f"polytrope exponent k={k} outside {bound}")


# ====================
# Scaled source
# ====================


def well_width_squared(psi: float) -> float:
    """L^2 = 1 - exp(2*psi), the squared momentum radius of the scaled well."""
    return -math.expm1(2.0 * psi)


def _check_psi(psi: float) -> None:
    if not math.isfinite(psi):
        raise InvalidParameterError(f"psi={psi} is not finite")


def _adaptive(integrand: "_Integrand", quadrature: QuadratureConfig) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(
                integrand,
                0.0,
                1.0,
                epsabs=quadrature.abs_tol,
                epsrel=quadrature.rel_tol,
                limit=quadrature.max_depth,
            )
        except IntegrationWarning as exc:
            raise QuadratureError(f"adaptive quadrature did not converge: {exc}") from exc
    if not math.isfinite(value):
        raise QuadratureError("non-finite value from adaptive quadrature")
    return float(value)


class _Integrand:
    """Picklable scalar integrand on t in [0, 1]."""

    def __init__(self, kind: str, k: float, m2: float, s: float, e0: float = 1.0) -> None:
        self.kind = kind
        self.k = k
        self.m2 = m2
        self.s = s
        self.e0 = e0

    def __call__(self, t: float) -> float:
        energy = math.sqrt(self.m2 + self.s * t * t)
        one_minus = 1.0 - t * t
        if self.kind == "mu":
            return (one_minus / (1.0 + energy)) ** (self.k + 1.0)
        if self.kind == "density":
            return t * t * (one_minus / (1.0 + energy)) ** self.k
        # physical source
        return t * t * (one_minus / (self.e0 + energy)) ** self.k / energy


def mu_scaled(psi: float, k: float, quadrature: QuadratureConfig | None = None) -> float:
    """Scaled source (4*pi/(k+1)) * integral_0^L (1 - sqrt(e^{2 psi} + xi^2))^{k+1} dxi.

    Args:
        psi: Scaled potential value.
        k: Polytrope exponent in (0, 2].
        quadrature: Tolerances; defaults to abs/rel 1e-12.

    Returns:
        The source value; 0 for psi >= 0.

    Raises:
        InvalidParameterError: Non-finite psi or k out of range.
    """
    _check_psi(psi)
    check_exponent(k)
    if psi >= 0.0:
        return 0.0
    s = well_width_squared(psi)
    integral = _adaptive(
        _Integrand("mu", k, math.exp(2.0 * psi), s), quadrature or QuadratureConfig()
    )
    return FOUR_PI / (k + 1.0) * s ** (k + 1.5) * integral


def density_scaled(psi: float, k: float, quadrature: QuadratureConfig | None = None) -> float:
    """Scaled rest-mass density 4*pi * integral_0^L eta^2 (1 - sqrt(e^{2 psi} + eta^2))^k deta."""
    _check_psi(psi)
    check_exponent(k)
    if psi >= 0.0:
        return 0.0
    s = well_width_squared(psi)
    integral = _adaptive(
        _Integrand("density", k, math.exp(2.0 * psi), s), quadrature or QuadratureConfig()
    )
    return FOUR_PI * s ** (k + 1.5) * integral


def _closed_bracket(width: float) -> float:
    """L - (2/3)L^3 - (1 - L^2) atanh(L), evaluated without cancellation."""
    if width < _SERIES_WIDTH:
        w2 = width * width
        term = width**5
        total = 0.0
        n = 0
        while True:
            increment = 2.0 * term / ((2 * n + 3) * (2 * n + 5))
            total += increment
            if increment <= 1e-18 * total:
                return total
            term *= w2
            n += 1
    return width - 2.0 / 3.0 * width**3 - (1.0 - width * width) * math.atanh(width)


def mu_closed_k1(psi: float, printed: bool = False) -> float:
    """Closed form of the scaled source for k = 1.

    The antiderivative is (2*pi/3)[L(1 + 2 e^{2 psi}) - 3 e^{2 psi} ln((1 + L)/e^psi)]
    with L = sqrt(1 - e^{2 psi}); ln((1 + L)/e^psi) equals atanh(L).

    Args:
        psi: Scaled potential value (<= 0 for a nonzero source).
        printed: Evaluate the published variant with the (1 - 2 e^{2 psi})
            factor instead. It turns negative inside the well and is kept only
            for documenting the discrepancy.

    Returns:
        The source value; 0 for psi >= 0.
    """
    _check_psi(psi)
    if psi >= 0.0:
        return 0.0
    s = well_width_squared(psi)
    width = math.sqrt(s)
    if printed:
        m2 = math.exp(2.0 * psi)
        return 2.0 * math.pi / 3.0 * (width * (1.0 - 2.0 * m2) - 3.0 * m2 * math.atanh(width))
    return 2.0 * math.pi * _closed_bracket(width)


# ====================
# Physical source
# ====================


def source_physical(
    phi: float, params: PolytropeParams, quadrature: QuadratureConfig | None = None
) -> float:
    """Momentum integral of f0/E at potential phi.

    Equals 4*pi*c^{-k} * integral_{e^phi}^{E0} sqrt(E^2 - e^{2 phi}) (E0 - E)^k dE,
    evaluated after xi = sqrt(E^2 - e^{2 phi}). The right-hand side of the field
    equation is exp(2*phi) times this value (see poisson_rhs).

    Returns:
        The integral; 0 when e^phi >= E0.
    """
    _check_psi(phi)
    m2 = math.exp(2.0 * phi)
    s = params.e0**2 - m2
    if s <= 0.0:
        return 0.0
    integral = _adaptive(
        _Integrand("source", params.k, m2, s, params.e0), quadrature or QuadratureConfig()
    )
    return FOUR_PI * params.c ** (-params.k) * s ** (params.k + 1.5) * integral


def poisson_rhs(phi: float, params: PolytropeParams) -> float:
    """exp(2*phi) * integral f0/E dp, the source of the nonlinear Poisson equation."""
    return math.exp(2.0 * phi) * source_physical(phi, params)


def source_from_scaled(phi: float, params: PolytropeParams) -> float:
    """Physical source recovered from the scaled one: c^{-k} E0^{k+2} mu(phi - ln E0)."""
    return (
        params.c ** (-params.k)
        * params.e0 ** (params.k + 2.0)
        * mu_scaled(phi - math.log(params.e0), params.k)
    )


# ====================
# Vectorized ansatz moments
# ====================


class Moment(StrEnum):
    """Momentum moments of the polytrope ansatz."""

    DENSITY = "density"  # integral f0 dp
    KINETIC = "kinetic"  # integral E f0 dp
    SOURCE = "source"  # integral f0 / E dp
    PRESSURE = "pressure"  # integral |p|^2 / E f0 dp
    LQ = "lq"  # integral f0^(1 + 1/k) dp


def _moment(
    phi: FloatArray, k: float, e0: float, c: float, moment: Moment, nodes: int
) -> FloatArray:
    power = k + 1.0 if moment is Moment.LQ else k
    t, w = gauss_jacobi_unit(nodes, power)
    m2 = np.exp(2.0 * phi)[..., None]
    s = np.clip(e0 * e0 - m2, 0.0, None)
    width = np.sqrt(s)
    p = width * t
    energy = np.sqrt(m2 + p * p)
    gap = (s * (1.0 + t) / (e0 + energy)) ** power
    base = FOUR_PI * width * p * p * gap
    if moment is Moment.KINETIC:
        base = base * energy
    elif moment is Moment.SOURCE:
        base = base / energy
    elif moment is Moment.PRESSURE:
        base = base * p * p / energy
    scale = c ** (-(k + 1.0)) if moment is Moment.LQ else c ** (-k)
    return np.asarray(scale * np.sum(w * base, axis=-1), dtype=np.float64)


def ansatz_moment(
    phi: ArrayLike, params: PolytropeParams, moment: Moment, nodes: int = 48
) -> FloatArray:
    """Momentum moment of f0 at each potential value.

    Gauss-Jacobi quadrature with weight (1 - t)^k absorbs the endpoint
    behavior of f0, so the rule is spectrally accurate for every k.

    Args:
        phi: Potential values (any shape).
        params: Ansatz constants.
        moment: Which moment to integrate.
        nodes: Quadrature nodes.

    Returns:
        Array of the same shape as ``phi``; zero where e^phi >= E0.
    """
    values = np.asarray(phi, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise QuadratureError("non-finite potential passed to ansatz_moment")
    return _moment(values, params.k, params.e0, params.c, moment, nodes)


def density_physical(phi: ArrayLike, params: PolytropeParams, nodes: int = 48) -> FloatArray:
    """Rest-mass density integral f0 dp."""
    return ansatz_moment(phi, params, Moment.DENSITY, nodes)


def kinetic_density_physical(
    phi: ArrayLike, params: PolytropeParams, nodes: int = 48
) -> FloatArray:
    """Kinetic energy density integral E f0 dp."""
    return ansatz_moment(phi, params, Moment.KINETIC, nodes)


def lq_density_physical(phi: ArrayLike, params: PolytropeParams, nodes: int = 48) -> FloatArray:
    """Casimir density integral f0^(1 + 1/k) dp."""
    return ansatz_moment(phi, params, Moment.LQ, nodes)


def scaled_moment(psi: ArrayLike, k: float, moment: Moment, nodes: int = 48) -> FloatArray:
    """Moments of the scaled ansatz (1 - E)_+^k, i.e. E0 = c = 1."""
    check_exponent(k)
    values = np.asarray(psi, dtype=np.float64)
    return _moment(values, k, 1.0, 1.0, moment, nodes)


# ====================
# Moments of gridded states
# ====================


def rho_moments(state: "PhaseSpaceState") -> tuple[FloatArray, FloatArray]:
    """Radial profiles rho_f = integral f dp and mu_f = integral f/|p| dp.

    Raises:
        QuadratureError: The 1/|p|-weighted integrand grows toward p = 0 on
            some radial node, i.e. f is too singular at the origin of momentum
            space for the grid to resolve.
    """
    f = state.f
    weighted = f * state.p_grid[None, :]
    if state.p_grid.size > 1:
        growing = (weighted[:, 0] > weighted[:, 1] * (1.0 + 1e-12)) & (f[:, 0] > 0.0)
        if np.any(growing):
            rows = np.flatnonzero(growing)
            logger.warning(
                "momentum.rho_moments.integrability_violated",
                rows=rows[:10].tolist(),
                count=int(rows.size),
            )
            raise QuadratureError(
                f"f/|p| not integrable on the grid near p = 0 at {rows.size} radial nodes"
            )
    rho = shell_integral(f, state.p_grid, power=2, axis=1)
    mu = shell_integral(f, state.p_grid, power=1, axis=1)
    return np.asarray(rho, dtype=np.float64), np.asarray(mu, dtype=np.float64)


# ====================
# Source table
# ====================


@dataclass
class MuTable:
    """Cubic-spline table of the scaled source and density.

    Both quantities factor as L^(2k+3) * G(L^2) with G smooth on [0, 1), so
    the table interpolates G in s = L^2 and multiplies the power back in.
    Values below ``psi_min`` fall back to direct Gauss-Jacobi evaluation.
    """

    k: float
    psi_min: float
    nodes: int = 2000
    _source: BSpline = field(init=False, repr=False)
    _density: BSpline = field(init=False, repr=False)

    def __post_init__(self) -> None:
        check_exponent(self.k)
        if not (math.isfinite(self.psi_min) and self.psi_min < 0.0):
            raise InvalidParameterError(f"table lower bound psi_min={self.psi_min} must be < 0")
        psi = np.linspace(self.psi_min, 0.0, self.nodes)[::-1]
        s = -np.expm1(2.0 * psi)
        power = s ** (self.k + 1.5)
        with np.errstate(divide="ignore", invalid="ignore"):
            source = scaled_moment(psi, self.k, Moment.SOURCE, nodes=64) / power
            density = scaled_moment(psi, self.k, Moment.DENSITY, nodes=64) / power
        # limits at s = 0 from the leading term of the expansion
        source[0] = self._leading(Moment.SOURCE)
        density[0] = self._leading(Moment.DENSITY)
        self._source = make_interp_spline(s, source, k=3)
        self._density = make_interp_spline(s, density, k=3)
        logger.debug(
            "momentum.table.build_completed", k=self.k, psi_min=self.psi_min, nodes=self.nodes
        )

    def _leading(self, moment: Moment) -> float:
        # E -> 1 in both integrands, so source and density share the limit
        del moment
        t, w = gauss_jacobi_unit(64, self.k)
        return float(FOUR_PI * np.sum(w * t * t * ((1.0 + t) / 2.0) ** self.k))

    def source(self, psi: float) -> float:
        """Scaled source at psi (0 for psi >= 0)."""
        if psi >= 0.0:
            return 0.0
        if psi < self.psi_min:
            return float(scaled_moment(psi, self.k, Moment.SOURCE)[()])
        s = -math.expm1(2.0 * psi)
        return s ** (self.k + 1.5) * float(self._source(s))

    def density(self, psi: float) -> float:
        """Scaled rest-mass density at psi (0 for psi >= 0)."""
        if psi >= 0.0:
            return 0.0
        if psi < self.psi_min:
            return float(scaled_moment(psi, self.k, Moment.DENSITY)[()])
        s = -math.expm1(2.0 * psi)
        return s ** (self.k + 1.5) * float(self._density(s))

    def validate(self, samples: int = 200) -> float:
        """Largest absolute deviation from direct adaptive quadrature at off-node points."""
        psi = np.linspace(self.psi_min, 0.0, samples + 2)[1:-1]
        psi = psi + 0.37 * (psi[1] - psi[0]) if samples > 1 else psi
        worst = 0.0
        for value in psi:
            if value >= 0.0:
                continue
            worst = max(worst, abs(self.source(float(value)) - mu_scaled(float(value), self.k)))
        logger.info("momentum.table.validation_completed", k=self.k, max_abs_error=worst)
        return worst
