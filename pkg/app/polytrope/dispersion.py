"""Conformal-energy dispersion on the free-transport family.

With phi = 0 the distribution is transported freely,
f(t, x, p) = f0(x - v t, p) with v = p / sqrt(1 + |p|^2), and the conformal
energy E_C(t) = integral |x|^2 sqrt(1 + |p|^2) f dp dx is exactly quadratic:

    E_C(t) = c0 + c1 t + c2 t^2
    c0 = integral |x|^2 sqrt(1 + |p|^2) f0
    c1 = 2 integral x . p f0
    c2 = integral |p|^2 / sqrt(1 + |p|^2) f0

Since sqrt(1 + s^2) - 1 <= s^2 / sqrt(1 + s^2), c2 >= H - M, so the quadratic
dispersion bound E_C(t) >= (H - M) t^2 holds once t passes the largest root
of (c2 - H + M) t^2 + c1 t + c0; for outgoing data (c1 >= 0) it holds for
every t >= 0. Field-dependent terms of the general estimate need the coupled
evolution and are not evaluated here.
"""

import math
from collections.abc import Callable
from dataclasses import asdict, dataclass
from enum import StrEnum

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from app.core.exceptions import InvalidParameterError, InvalidStateError, QuadratureError
from app.core.logging import get_logger
from app.shared.quadrature import gauss_legendre_sym, shell_integral

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

REPORT_COLUMNS = ["t", "ec", "bound_quadratic", "bound_linear", "ok"]

# Relative size of a profile on its last node that counts as not decayed
_TAIL_LEVEL = 1e-8


class MomentumKind(StrEnum):
    """Shape of the momentum factor of a separable state."""

    GRIDDED = "gridded"
    SHELL = "shell"
    COLD = "cold"


def _profile(values: ArrayLike, name: str) -> FloatArray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1 or array.size < 3:
        raise InvalidStateError(f"{name} must be a 1-D array with at least three nodes")
    if not np.all(np.isfinite(array)):
        raise InvalidStateError(f"{name} contains non-finite values")
    return array


@dataclass(frozen=True)
class SeparableState:
    """f0(x, p) = A(|x - x_shift z|) B(|p - p_shift z|).

    A is a radial profile on ``r_grid``. B is a radial profile on ``p_grid``
    (GRIDDED), a uniform shell |u| = ``shell_radius`` carrying
    ``momentum_mass`` (SHELL), or a point mass at u = 0 (COLD). Shifts along
    the z axis give boosted data with a nonzero x.p correlation.
    """

    r_grid: FloatArray
    spatial: FloatArray
    kind: MomentumKind = MomentumKind.GRIDDED
    p_grid: FloatArray | None = None
    momentum: FloatArray | None = None
    shell_radius: float = 0.0
    momentum_mass: float = 1.0
    x_shift: float = 0.0
    p_shift: float = 0.0
    angular_nodes: int = 32

    def __post_init__(self) -> None:
        r_grid = _profile(self.r_grid, "r_grid")
        spatial = _profile(self.spatial, "spatial")
        if r_grid[0] <= 0.0 or np.any(np.diff(r_grid) <= 0.0):
            raise InvalidStateError("r_grid must be strictly positive and increasing")
        if spatial.shape != r_grid.shape or np.any(spatial < 0.0):
            raise InvalidStateError("spatial profile must be nonnegative on r_grid")
        object.__setattr__(self, "r_grid", r_grid)
        object.__setattr__(self, "spatial", spatial)

        if self.kind is MomentumKind.GRIDDED:
            if self.p_grid is None or self.momentum is None:
                raise InvalidStateError("gridded momentum factor needs p_grid and momentum")
            p_grid = _profile(self.p_grid, "p_grid")
            momentum = _profile(self.momentum, "momentum")
            if p_grid[0] <= 0.0 or np.any(np.diff(p_grid) <= 0.0):
                raise InvalidStateError("p_grid must be strictly positive and increasing")
            if momentum.shape != p_grid.shape or np.any(momentum < 0.0):
                raise InvalidStateError("momentum profile must be nonnegative on p_grid")
            object.__setattr__(self, "p_grid", p_grid)
            object.__setattr__(self, "momentum", momentum)
        else:
            if not (math.isfinite(self.momentum_mass) and self.momentum_mass >= 0.0):
                raise InvalidStateError("momentum_mass must be nonnegative")
            if self.kind is MomentumKind.SHELL and not self.shell_radius > 0.0:
                raise InvalidStateError("shell radius must be positive")
        for name in ("x_shift", "p_shift"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidStateError(f"{name} must be finite")
        if self.angular_nodes < 2:
            raise InvalidStateError("need at least two angular nodes")

    def spatial_mass(self) -> float:
        return float(shell_integral(self.spatial, self.r_grid))

    def spatial_second_moment(self) -> float:
        """integral |x|^2 A(|x - x_shift z|) dx; the cross term is odd and drops."""
        weight = self.x_shift**2 + self.r_grid**2
        return float(shell_integral(self.spatial * weight, self.r_grid))

    def momentum_average(self, g: Callable[[FloatArray, FloatArray], FloatArray]) -> float:
        """integral g(p_z, |p|) B(|p - p_shift z|) dp by Gauss-Legendre in the polar angle."""
        mu, weights = gauss_legendre_sym(self.angular_nodes)
        if self.kind is MomentumKind.COLD:
            p_z = np.array([self.p_shift])
            return self.momentum_mass * float(g(p_z, np.abs(p_z))[0])

        def sphere_mean(radius: FloatArray) -> FloatArray:
            u = np.asarray(radius, dtype=np.float64)[:, None]
            p_z = self.p_shift + u * mu[None, :]
            norm = np.sqrt(self.p_shift**2 + u**2 + 2.0 * self.p_shift * u * mu[None, :])
            return np.asarray(0.5 * np.sum(weights * g(p_z, norm), axis=1), dtype=np.float64)

        if self.kind is MomentumKind.SHELL:
            return self.momentum_mass * float(sphere_mean(np.array([self.shell_radius]))[0])
        assert self.p_grid is not None and self.momentum is not None
        return float(shell_integral(self.momentum * sphere_mean(self.p_grid), self.p_grid))

    def momentum_mass_total(self) -> float:
        return self.momentum_average(lambda _pz, norm: np.ones_like(norm))

    def check_decay(self) -> None:
        """Raise when a profile has not decayed enough for the |x|^2 and |p| weights.

        Raises:
            QuadratureError: The weighted profile is still large on the last node.
        """
        weighted = self.spatial * self.r_grid**4
        peak = float(np.max(weighted))
        if peak > 0.0 and weighted[-1] > _TAIL_LEVEL * peak:
            raise QuadratureError("spatial profile times |x|^2 has not decayed on the grid")
        if self.kind is MomentumKind.GRIDDED:
            assert self.p_grid is not None and self.momentum is not None
            weighted = self.momentum * self.p_grid**3
            peak = float(np.max(weighted))
            if peak > 0.0 and weighted[-1] > _TAIL_LEVEL * peak:
                raise QuadratureError("momentum profile times |p| has not decayed on the grid")


@dataclass(frozen=True)
class ConformalCoefficients:
    """E_C(t) = c0 + c1 t + c2 t^2 under free transport; h and m at phi = 0."""

    c0: float
    c1: float
    c2: float
    h: float
    m: float

    @property
    def q0(self) -> float:
        """Conserved radial-momentum constant Q0 = c1 / 2 of free-transport data."""
        return 0.5 * self.c1

    @property
    def dispersion_margin(self) -> float:
        """c2 - (h - m), nonnegative for every nonnegative f0."""
        return self.c2 - (self.h - self.m)

    def evaluate(self, t: ArrayLike) -> FloatArray:
        times = np.asarray(t, dtype=np.float64)
        return np.asarray(self.c0 + self.c1 * times + self.c2 * times**2, dtype=np.float64)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def conformal_coefficients(state: SeparableState) -> ConformalCoefficients:
    """Free-transport conformal-energy coefficients of a separable f0.

    Raises:
        QuadratureError: The profiles are not integrable against |x|^2 and |p|.
    """
    state.check_decay()
    a_mass = state.spatial_mass()
    second = state.spatial_second_moment()
    energy_avg = state.momentum_average(lambda _pz, norm: np.sqrt(1.0 + norm**2))
    speed_avg = state.momentum_average(lambda _pz, norm: norm**2 / np.sqrt(1.0 + norm**2))
    pz_avg = state.momentum_average(lambda pz, _norm: pz)
    coefficients = ConformalCoefficients(
        c0=second * energy_avg,
        c1=2.0 * state.x_shift * a_mass * pz_avg,
        c2=a_mass * speed_avg,
        h=a_mass * energy_avg,
        m=a_mass * state.momentum_mass_total(),
    )
    for name, value in coefficients.to_dict().items():
        if not math.isfinite(value):
            raise QuadratureError(f"non-finite coefficient {name}")
    logger.debug("dispersion.coefficients_completed", **coefficients.to_dict())
    return coefficients


def linear_coefficient_closed_form(state: SeparableState) -> float:
    """c1 = 2 x_shift p_shift m: isotropic factors carry no x.p correlation."""
    return 2.0 * state.x_shift * state.p_shift * state.spatial_mass() * state.momentum_mass_total()


@dataclass
class DispersionReport:
    """Dispersion bounds tabulated on a time grid.

    Attributes:
        coefficients: The conformal-energy coefficients.
        frame: Columns t, ec, bound_quadratic, bound_linear, ok.
        margin_ok: c2 >= h - m up to rounding.
        t_hold: Time after which the quadratic bound holds for all later t.
        t_activation: First grid time with (h - m) t^2 >= c0, None if never.
        passed: margin_ok and every row at or after t_hold is ok.
    """

    coefficients: ConformalCoefficients
    frame: pd.DataFrame
    margin_ok: bool
    t_hold: float
    t_activation: float | None
    passed: bool

    @property
    def violations(self) -> list[float]:
        return [float(t) for t in self.frame.loc[~self.frame["ok"], "t"]]


def _hold_time(coefficients: ConformalCoefficients) -> float:
    """Largest nonnegative root of (c2 - h + m) t^2 + c1 t + c0, 0 if none."""
    a = coefficients.dispersion_margin
    b, c = coefficients.c1, coefficients.c0
    if a <= 0.0:
        return 0.0 if b >= 0.0 else math.inf
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return 0.0
    return max(0.0, (-b + math.sqrt(disc)) / (2.0 * a))


def check_dispersion(
    state: SeparableState, t_grid: ArrayLike, tolerance: float = 1e-12
) -> DispersionReport:
    """Tabulate E_C(t) against (h - m) t^2 and, for outgoing data, c1 t.

    Args:
        state: Initial data.
        t_grid: Nonnegative, nondecreasing times.
        tolerance: Relative slack on each comparison.

    Returns:
        The report; failures are rows with ok = False, never exceptions.
    """
    times = np.asarray(t_grid, dtype=np.float64)
    if times.ndim != 1 or times.size == 0:
        raise InvalidParameterError("t_grid must be a non-empty 1-D array")
    if np.any(times < 0.0) or np.any(np.diff(times) < 0.0):
        raise InvalidParameterError("t_grid must be nonnegative and nondecreasing")

    coefficients = conformal_coefficients(state)
    ec = coefficients.evaluate(times)
    quadratic = (coefficients.h - coefficients.m) * times**2
    linear = max(coefficients.c1, 0.0) * times
    slack = tolerance * np.maximum(1.0, np.abs(ec))
    ok = (ec >= quadratic - slack) & (ec >= linear - slack)

    scale = max(coefficients.h, 1.0)
    margin_ok = coefficients.dispersion_margin >= -tolerance * scale
    t_hold = _hold_time(coefficients)
    reached = np.flatnonzero((quadratic >= coefficients.c0) & (quadratic > 0.0))
    t_activation = float(times[reached[0]]) if reached.size else None
    passed = bool(margin_ok and np.all(ok[times >= t_hold]))

    frame = pd.DataFrame(
        {
            "t": times,
            "ec": ec,
            "bound_quadratic": quadratic,
            "bound_linear": linear,
            "ok": ok,
        },
        columns=REPORT_COLUMNS,
    )
    if not passed:
        logger.warning(
            "dispersion.bound_violated",
            margin=coefficients.dispersion_margin,
            violations=int(np.count_nonzero(~ok)),
        )
    return DispersionReport(
        coefficients=coefficients,
        frame=frame,
        margin_ok=margin_ok,
        t_hold=t_hold,
        t_activation=t_activation,
        passed=passed,
    )
