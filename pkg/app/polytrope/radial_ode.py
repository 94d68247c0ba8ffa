"""Shooting solver for the scaled radial field equation.

Integrates (r^2 psi')' = r^2 exp(2 psi) mu(psi) from a small center cutoff as
the first-order system

    u' = v / r^2,    v' = r^2 exp(2u) mu(u),    w' = r^2 n(u)

with (u, v) = (psi, r^2 psi') and w the auxiliary mass potential
(n is the scaled rest-mass density). Integration stops at the first zero of
psi; beyond it the source vanishes and the vacuum solution
psi = v0 (1/r0 - 1/r) is attached analytically.

Also here: crossing detection on stored profiles, the two-regime classifier
for pairs of shooting parameters, the threshold bisection and the small-well
Lane-Emden asymptotics.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.integrate import OdeSolution, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.special import beta

from app.core.config import QuadratureConfig, SolverConfig
from app.core.exceptions import (
    CrossingNotFoundError,
    IntegrationError,
    InvalidParameterError,
    RegimeError,
)
from app.core.logging import get_logger
from app.polytrope.momentum_integrals import MuTable, check_exponent, density_scaled, mu_scaled

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

# Stages per accepted step, used to turn the step cap into an evaluation cap
_STAGES = {"RK45": 6, "DOP853": 12}


class Regime(StrEnum):
    """Ordering pattern of the crossing data of two nearby profiles."""

    CROSSING = "crossing"
    ORDERED = "ordered"
    INDETERMINATE = "indeterminate"


# ====================
# Profiles
# ====================


@dataclass
class ScaledProfile:
    """Numerical solution of the scaled field equation for one shooting parameter.

    Attributes:
        k: Polytrope exponent.
        a: Shooting parameter psi(epsilon).
        r_nodes: Stored radii: accepted solver steps up to r0, then the solution
            continued past r0 (where the source vanishes) on geometric nodes.
        psi: psi at r_nodes.
        dpsi: psi' at r_nodes.
        r0: First zero of psi, None when not reached before r_max.
        dpsi_at_r0: psi'(r0).
        v_inf: r^2 psi' on the vacuum exterior.
        mass_potential: Auxiliary mass w(r0); the scaled mass is 4*pi*w(r0).
        n_interior: Number of stored nodes in [epsilon, r0].
        nfev: Right-hand-side evaluations spent.
    """

    k: float
    a: float
    r_nodes: FloatArray
    psi: FloatArray
    dpsi: FloatArray
    r0: float | None = None
    dpsi_at_r0: float | None = None
    v_inf: float | None = None
    mass_potential: float | None = None
    n_interior: int = 0
    nfev: int = 0
    dense: OdeSolution | None = field(default=None, repr=False)
    _spline: CubicHermiteSpline | None = field(default=None, init=False, repr=False)

    @property
    def crossed(self) -> bool:
        return self.r0 is not None

    def evaluate(self, r: float) -> tuple[float, float]:
        """psi and psi' at radius r.

        Uses the solver's dense output inside the crossing, the analytic
        vacuum solution beyond it, and a cubic Hermite interpolant of the
        stored nodes for profiles without dense output.
        """
        if self.r0 is not None and self.v_inf is not None and r >= self.r0:
            return self.v_inf * (1.0 / self.r0 - 1.0 / r), self.v_inf / r**2
        if self.dense is not None:
            state = self.dense(r)
            return float(state[0]), float(state[1]) / r**2
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.r_nodes, self.psi, self.dpsi)
        return float(self._spline(r)), float(self._spline(r, 1))

    def to_frame(self) -> pd.DataFrame:
        """Stored nodes as columns r, psi, dpsi."""
        return pd.DataFrame({"r": self.r_nodes, "psi": self.psi, "dpsi": self.dpsi})

    def metadata(self) -> dict[str, float | int | bool | None]:
        return {
            "k": self.k,
            "a": self.a,
            "r0": self.r0,
            "dpsi_at_r0": self.dpsi_at_r0,
            "v_inf": self.v_inf,
            "mass_potential": self.mass_potential,
            "crossed": self.crossed,
            "n_interior": self.n_interior,
            "nfev": self.nfev,
        }


@dataclass
class RegimeClassification:
    """Crossing data of an ordered pair a1 < a2 and the resulting regime."""

    regime: Regime
    a1: float
    a2: float
    r0_1: float | None
    r0_2: float | None
    dpsi_1: float | None
    dpsi_2: float | None


@dataclass
class ThresholdResult:
    """Boundary between the two regimes found by bisection."""

    a_star: float
    lower_regime: Regime
    upper_regime: Regime
    bracket: tuple[float, float]
    iterations: int

    @property
    def abs_a_star(self) -> float:
        """Threshold on the well-depth axis |a|."""
        return abs(self.a_star)


# ====================
# Integration
# ====================


class _FieldEquation:
    """Right-hand side of the scaled system with an evaluation budget."""

    def __init__(
        self,
        source: Callable[[float], float],
        density: Callable[[float], float],
        max_calls: int,
    ) -> None:
        self.source = source
        self.density = density
        self.max_calls = max_calls
        self.calls = 0

    def __call__(self, r: float, y: FloatArray) -> list[float]:
        self.calls += 1
        if self.calls > self.max_calls:
            raise IntegrationError(f"step budget exhausted after {self.calls} evaluations")
        u, v = float(y[0]), float(y[1])
        if u >= 0.0:
            return [v / r**2, 0.0, 0.0]
        r2 = r * r
        return [v / r2, r2 * math.exp(2.0 * u) * self.source(u), r2 * self.density(u)]


def _crossing_event(_r: float, y: FloatArray) -> float:
    return float(y[0])


_crossing_event.terminal = True  # type: ignore[attr-defined]
_crossing_event.direction = 1.0  # type: ignore[attr-defined]


def build_table(k: float, a: float, config: SolverConfig) -> MuTable:
    """Source table covering [a - 1, 0]."""
    return MuTable(k=k, psi_min=a - 1.0, nodes=config.table_nodes)


def _check_shooting(a: float, k: float) -> None:
    check_exponent(k)
    if not (math.isfinite(a) and a < 0.0):
        raise InvalidParameterError(f"shooting parameter a={a} must be negative")


def integrate_scaled(
    a: float,
    k: float,
    config: SolverConfig | None = None,
    table: MuTable | None = None,
    quadrature: QuadratureConfig | None = None,
) -> ScaledProfile:
    """Integrate the scaled field equation from the center cutoff to the first zero.

    Args:
        a: Shooting parameter psi(epsilon), < 0.
        k: Polytrope exponent in (0, 2].
        config: Step controller settings; defaults to SolverConfig().
        table: Prebuilt source table; built over [a - 1, 0] when needed.
        quadrature: Tolerances for the direct-quadrature source mode.

    Returns:
        The profile. ``r0`` is None when psi stays negative up to r_max.

    Raises:
        InvalidParameterError: a >= 0 or k out of range.
        IntegrationError: Step controller failure or exhausted step budget.
    """
    _check_shooting(a, k)
    config = config or SolverConfig()
    if config.epsilon >= config.r_max:
        raise InvalidParameterError("center cutoff must lie below r_max")

    if config.use_mu_table:
        if table is None or table.k != k or table.psi_min > a:
            table = build_table(k, a, config)
        source, density = table.source, table.density
    else:
        quad_cfg = quadrature or QuadratureConfig()

        def source(psi: float) -> float:
            return mu_scaled(psi, k, quad_cfg)

        def density(psi: float) -> float:
            return density_scaled(psi, k, quad_cfg)

    rhs = _FieldEquation(source, density, config.max_steps * _STAGES[config.method])
    eps = config.epsilon
    if config.taylor_start:
        s0 = math.exp(2.0 * a) * source(a)
        y0 = [a + s0 * eps**2 / 6.0, s0 * eps**3 / 3.0, density(a) * eps**3 / 3.0]
    else:
        y0 = [a, 0.0, 0.0]

    logger.debug("ode.integration_started", a=a, k=k, method=config.method)
    sol = solve_ivp(
        rhs,
        (eps, config.r_max),
        y0,
        method=config.method,
        rtol=config.rel_tol,
        atol=config.abs_tol,
        dense_output=True,
        events=_crossing_event,
    )
    if sol.status == -1:
        raise IntegrationError(f"integration failed at a={a}: {sol.message}")

    r_nodes = np.asarray(sol.t, dtype=np.float64)
    psi = np.asarray(sol.y[0], dtype=np.float64)
    dpsi = np.asarray(sol.y[1], dtype=np.float64) / r_nodes**2

    if sol.t_events[0].size == 0:
        logger.warning("ode.crossing_missing", a=a, k=k, r_max=config.r_max, psi_end=psi[-1])
        return ScaledProfile(
            k=k,
            a=a,
            r_nodes=r_nodes,
            psi=psi,
            dpsi=dpsi,
            n_interior=r_nodes.size,
            nfev=rhs.calls,
            dense=sol.sol,
        )

    r0 = float(sol.t_events[0][0])
    v0 = float(sol.y_events[0][0][1])
    w0 = float(sol.y_events[0][0][2])
    exterior = np.geomspace(r0, config.exterior_factor * r0, config.exterior_nodes)[1:]
    outside = solve_ivp(
        rhs,
        (r0, float(exterior[-1])),
        sol.y_events[0][0],
        method=config.method,
        t_eval=exterior,
        rtol=config.rel_tol,
        atol=config.abs_tol,
    )
    if outside.status == -1:
        raise IntegrationError(f"exterior integration failed at a={a}: {outside.message}")

    profile = ScaledProfile(
        k=k,
        a=a,
        r_nodes=np.concatenate((r_nodes, exterior)),
        psi=np.concatenate((psi, outside.y[0])),
        dpsi=np.concatenate((dpsi, outside.y[1] / exterior**2)),
        r0=r0,
        dpsi_at_r0=v0 / r0**2,
        v_inf=v0,
        mass_potential=w0,
        n_interior=r_nodes.size,
        nfev=rhs.calls,
        dense=sol.sol,
    )
    logger.debug(
        "ode.integration_completed",
        a=a,
        k=k,
        r0=r0,
        dpsi_at_r0=profile.dpsi_at_r0,
        nfev=rhs.calls,
    )
    return profile


def detect_crossing(profile: ScaledProfile) -> tuple[float, float]:
    """Locate the first zero of psi on a stored profile.

    The sign change is bracketed on the stored nodes and the root polished
    with Brent's method on the profile's interpolant.

    Returns:
        Tuple (r0, psi'(r0)).

    Raises:
        CrossingNotFoundError: psi has no sign change in the stored range.
    """
    psi = profile.psi
    hits = np.flatnonzero(psi >= 0.0)
    if hits.size == 0:
        raise CrossingNotFoundError(f"psi stays negative on the stored range (a={profile.a})")
    i = int(hits[0])
    if psi[i] == 0.0 or i == 0:
        r = float(profile.r_nodes[i])
        return r, float(profile.evaluate(r)[1])

    lo, hi = float(profile.r_nodes[i - 1]), float(profile.r_nodes[i])
    r0 = float(brentq(lambda r: profile.evaluate(r)[0], lo, hi, xtol=1e-14, rtol=4e-16))
    return r0, profile.evaluate(r0)[1]


def profile_family(
    k: float,
    a_values: Sequence[float],
    config: SolverConfig | None = None,
    quadrature: QuadratureConfig | None = None,
) -> pd.DataFrame:
    """Profiles for several shooting parameters in long format (a, r, psi, dpsi)."""
    config = config or SolverConfig()
    if not a_values:
        raise InvalidParameterError("profile family needs at least one shooting parameter")
    table = build_table(k, min(a_values), config) if config.use_mu_table else None
    frames = []
    for a in a_values:
        frame = integrate_scaled(a, k, config, table, quadrature).to_frame()
        frame.insert(0, "a", a)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


# ====================
# Regimes
# ====================


def pair_regime(r1: float, d1: float, r2: float, d2: float) -> Regime:
    """Regime of the crossing data (r1, d1) of a1 and (r2, d2) of a2, with a1 < a2."""
    if r1 < r2 and d1 > d2:
        return Regime.CROSSING
    if r2 < r1 and d2 < d1:
        return Regime.ORDERED
    return Regime.INDETERMINATE


def classify_regime(
    k: float,
    a1: float,
    a2: float,
    config: SolverConfig | None = None,
    table: MuTable | None = None,
    quadrature: QuadratureConfig | None = None,
) -> RegimeClassification:
    """Classify how the crossing data of two shooting parameters a1 < a2 are ordered.

    Crossing: r0(a1) < r0(a2) and psi'(r0; a1) > psi'(r0; a2), the pattern
    compatible with psi'(r0) decreasing in r0. Ordered: r0(a2) < r0(a1) and
    psi'(r0; a2) < psi'(r0; a1). Anything else, including a profile without
    a crossing, is Indeterminate.

    Raises:
        InvalidParameterError: Degenerate or unordered pair.
    """
    if a1 == a2:
        raise InvalidParameterError(f"degenerate pair a1 = a2 = {a1}")
    if not a1 < a2 < 0.0:
        raise InvalidParameterError(f"pair must satisfy a1 < a2 < 0, got ({a1}, {a2})")
    config = config or SolverConfig()
    if config.use_mu_table and (table is None or table.psi_min > a1):
        table = build_table(k, a1, config)

    first = integrate_scaled(a1, k, config, table, quadrature)
    second = integrate_scaled(a2, k, config, table, quadrature)

    regime = Regime.INDETERMINATE
    r1, r2 = first.r0, second.r0
    d1, d2 = first.dpsi_at_r0, second.dpsi_at_r0
    if r1 is not None and r2 is not None and d1 is not None and d2 is not None:
        regime = pair_regime(r1, d1, r2, d2)

    if regime is Regime.INDETERMINATE:
        logger.warning("ode.regime_indeterminate", k=k, a1=a1, a2=a2)
    return RegimeClassification(
        regime=regime,
        a1=a1,
        a2=a2,
        r0_1=first.r0,
        r0_2=second.r0,
        dpsi_1=first.dpsi_at_r0,
        dpsi_2=second.dpsi_at_r0,
    )


def local_regime(
    k: float,
    a: float,
    config: SolverConfig,
    table: MuTable | None = None,
    quadrature: QuadratureConfig | None = None,
) -> Regime:
    """Regime of the pair (a - pair_step, a)."""
    return classify_regime(k, a - config.pair_step, a, config, table, quadrature).regime


def find_threshold(
    k: float,
    a_range: tuple[float, float],
    config: SolverConfig | None = None,
    quadrature: QuadratureConfig | None = None,
) -> ThresholdResult:
    """Bisect for the shooting parameter separating the two regimes.

    Args:
        k: Polytrope exponent.
        a_range: Interval of negative shooting parameters.
        config: Solver settings; ``pair_step`` and ``threshold_width`` apply.
        quadrature: Tolerances for the direct-quadrature source mode.

    Returns:
        The threshold a* (negative); ``abs_a_star`` gives |a*|.

    Raises:
        RegimeError: Both endpoints classify to the same (or an indeterminate) regime.
    """
    config = config or SolverConfig()
    lo, hi = sorted(a_range)
    if not hi < 0.0 or lo == hi:
        raise InvalidParameterError(f"threshold range {a_range} must be a negative interval")
    table = build_table(k, lo - config.pair_step, config) if config.use_mu_table else None

    lo_regime = local_regime(k, lo, config, table, quadrature)
    hi_regime = local_regime(k, hi, config, table, quadrature)
    if lo_regime == hi_regime or Regime.INDETERMINATE in (lo_regime, hi_regime):
        raise RegimeError(
            f"range {a_range} does not bracket a regime change ({lo_regime} / {hi_regime})"
        )

    iterations = 0
    while hi - lo > config.threshold_width:
        mid = 0.5 * (lo + hi)
        if local_regime(k, mid, config, table, quadrature) == lo_regime:
            lo = mid
        else:
            hi = mid
        iterations += 1
        logger.debug("ode.threshold_bisection_step", lo=lo, hi=hi, iteration=iterations)

    result = ThresholdResult(
        a_star=0.5 * (lo + hi),
        lower_regime=lo_regime,
        upper_regime=hi_regime,
        bracket=(lo, hi),
        iterations=iterations,
    )
    logger.info("ode.threshold_found", k=k, a_star=result.a_star, iterations=iterations)
    return result


# ====================
# Small-well asymptotics
# ====================


@dataclass
class LaneEmdenEstimate:
    """Leading-order crossing data as the well depth |a| tends to zero."""

    polytropic_index: float
    xi1: float
    dtheta_xi1: float
    length_scale: float
    r0: float
    dpsi_at_r0: float


@lru_cache(maxsize=16)
def lane_emden_zero(n: float) -> tuple[float, float]:
    """First zero xi1 of the Lane-Emden solution of index n and theta'(xi1)."""
    start = 1e-4
    theta0 = 1.0 - start**2 / 6.0 + n * start**4 / 120.0
    dtheta0 = -start / 3.0 + n * start**3 / 30.0

    def rhs(xi: float, y: FloatArray) -> list[float]:
        theta = max(float(y[0]), 0.0)
        return [float(y[1]), -(theta**n) - 2.0 * float(y[1]) / xi]

    def surface(_xi: float, y: FloatArray) -> float:
        return float(y[0])

    surface.terminal = True  # type: ignore[attr-defined]
    sol = solve_ivp(
        rhs, (start, 1e3), [theta0, dtheta0], rtol=1e-12, atol=1e-14, events=surface
    )
    if sol.t_events[0].size == 0:
        raise CrossingNotFoundError(f"Lane-Emden index {n} has no finite surface")
    return float(sol.t_events[0][0]), float(sol.y_events[0][0][1])


def lane_emden_limit(a: float, k: float) -> LaneEmdenEstimate:
    """Crossing data of the scaled equation in the limit a -> 0-.

    Near psi = 0 the source behaves as C |psi|^(k + 3/2) with
    C = 2^(5/2) pi B(3/2, k + 1), so psi = a theta(r / lambda) with the
    Lane-Emden function of index k + 3/2 and lambda^-2 = C |a|^(k + 1/2).
    """
    _check_shooting(a, k)
    n = k + 1.5
    coefficient = 2.0**2.5 * math.pi * float(beta(1.5, k + 1.0))
    length = (coefficient * abs(a) ** (k + 0.5)) ** -0.5
    xi1, dtheta = lane_emden_zero(n)
    return LaneEmdenEstimate(
        polytropic_index=n,
        xi1=xi1,
        dtheta_xi1=dtheta,
        length_scale=length,
        r0=length * xi1,
        dpsi_at_r0=abs(a) * abs(dtheta) / length,
    )
