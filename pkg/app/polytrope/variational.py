"""Brute-force verification of minimality on a coarse phase-space grid.

For fixed f the field equation has a unique solution psi_f (computed with the
Green's-function solver), and the reduced energy f -> E(f, psi_f) has first
variation sqrt(exp(2 psi_f) + |p|^2). ``minimize_energy`` descends the reduced
energy over the set {f >= 0, ||f||_1 = M, ||f||_q = J}, q = 1 + 1/k, and
reports how well the result fits the polytrope form f = ((E0 - E)/c)_+^k.

The module also carries the explicit trial family behind the bound I <= M
(box distribution plus a bump potential) and the mass-scaling transport that
relates minimization problems of different mass.
"""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import expit
from scipy.stats import spearmanr

from app.core.config import GreensConfig, VariationalConfig
from app.core.exceptions import ConvergenceError, InvalidParameterError, InvalidStateError
from app.core.logging import get_logger
from app.polytrope.functionals import PhaseSpaceState, energy
from app.polytrope.momentum_integrals import check_exponent
from app.polytrope.steady_state import GriddedSource, greens_solve
from app.shared.quadrature import FOUR_PI, shell_integral, shell_weights

logger = get_logger(__name__)

FloatArray = NDArray[np.float64]

TRACE_COLUMNS = ["iter", "energy", "kkt_residual"]

# Stand-in for +inf while bracketing the cut-off energy
_EXCESS_CAP = 1e6

# Dirichlet energy of any bump equal to 1 on the unit ball is at least this
BUMP_ENERGY_FLOOR = (3.0 / 4.0) ** (2.0 / 3.0) * math.pi ** (5.0 / 3.0)


def _lq_exponent(k: float) -> float:
    check_exponent(k, upper_inclusive=False)
    return 1.0 + 1.0 / k


def _check_positive(value: float, name: str) -> None:
    if not (math.isfinite(value) and value > 0.0):
        raise InvalidParameterError(f"{name}={value} must be positive")


# ====================
# Constraints
# ====================


def phase_integral(values: FloatArray, state: PhaseSpaceState) -> float:
    """Integral of ``values`` over (x, p) on the state's grid."""
    inner = shell_integral(values, state.p_grid, power=2, axis=1)
    return float(shell_integral(np.asarray(inner), state.r_grid))


def constraint_values(state: PhaseSpaceState, q: float) -> tuple[float, float]:
    """Mass ||f||_1 and L^q norm ||f||_q of a gridded distribution."""
    return phase_integral(state.f, state), phase_integral(state.f**q, state) ** (1.0 / q)


def dilate(state: PhaseSpaceState, alpha: float) -> PhaseSpaceState:
    """alpha^3 f(alpha x, p) with phi(alpha x); mass is unchanged.

    On the grid this divides the radii by alpha, so the quadrature of the
    dilated state is exactly the rescaled quadrature of the original.
    """
    _check_positive(alpha, "dilation factor")
    return replace(state, r_grid=state.r_grid / alpha, f=alpha**3 * state.f)


def renormalize(
    state: PhaseSpaceState, mass: float, lq_norm: float, q: float
) -> PhaseSpaceState:
    """Project onto ||f||_1 = mass, ||f||_q = lq_norm.

    Multiplies f to fix the mass, then dilates in x by
    alpha = (lq_norm / ||f||_q)^(q / (3q - 3)), which leaves the mass alone.

    Raises:
        InvalidStateError: f vanishes identically.
    """
    _check_positive(mass, "mass")
    _check_positive(lq_norm, "L^q norm")
    if not q > 1.0:
        raise InvalidParameterError(f"L^q exponent q={q} must exceed 1")
    current_mass, _ = constraint_values(state, q)
    if current_mass <= 0.0:
        raise InvalidStateError("cannot renormalize a vanishing distribution")
    if current_mass != mass:
        state = state.with_f(state.f * (mass / current_mass))
    _, current_norm = constraint_values(state, q)
    if current_norm == lq_norm:
        return state
    return dilate(state, (lq_norm / current_norm) ** (q / (3.0 * q - 3.0)))


def scaling_transport(state: PhaseSpaceState, target_mass: float) -> PhaseSpaceState:
    """Carry a pair (f, phi) of mass M1 to mass M2.

    f~(x, p) = beta^2 f(beta x, p), phi~(x) = phi(beta x) with beta = M1/M2:
    the mass becomes M2, the L^(1+1/k) norm scales by beta^((2-k)/(1+k)) and
    the energy by M2/M1 exactly.
    """
    _check_positive(target_mass, "target mass")
    mass = phase_integral(state.f, state)
    if mass <= 0.0:
        raise InvalidStateError("cannot transport a vanishing distribution")
    beta = mass / target_mass
    return replace(state, r_grid=state.r_grid / beta, f=beta**2 * state.f)


# ====================
# Reduced field
# ====================


def reduced_field(
    state: PhaseSpaceState,
    config: GreensConfig | None = None,
    initial: FloatArray | None = None,
) -> FloatArray:
    """Field psi_f of a gridded distribution; vacuum continuation beyond the grid."""
    return greens_solve(GriddedSource(state), state.r_grid, config, initial).psi


def reduced_state(
    state: PhaseSpaceState,
    config: GreensConfig | None = None,
    initial: FloatArray | None = None,
) -> PhaseSpaceState:
    """The state with its potential replaced by psi_f."""
    psi = reduced_field(state, config, initial)
    return replace(state, phi=psi, phi_t=np.zeros_like(psi), vacuum_exterior=True)


def reduced_energy(state: PhaseSpaceState, config: GreensConfig | None = None) -> float:
    return energy(reduced_state(state, config))


def _dirichlet_energy(state: PhaseSpaceState, phi: FloatArray) -> float:
    empty = replace(state, f=np.zeros_like(state.f), phi=phi, vacuum_exterior=True)
    return energy(empty)


@dataclass
class EnergyGap:
    """Comparison of a candidate potential with the reduced field."""

    reduced: float
    candidate: float
    gap: float
    quadratic: float
    passed: bool


def energy_gap(
    state: PhaseSpaceState,
    candidate: ArrayLike,
    config: GreensConfig | None = None,
    tolerance: float = 1e-3,
) -> EnergyGap:
    """Check E(f, candidate) - E(f, psi_f) >= (1/2) ||grad(candidate - psi_f)||^2.

    The candidate is taken as vacuum-continued beyond the grid, like psi_f.
    """
    candidate_phi = np.asarray(candidate, dtype=np.float64)
    reduced = reduced_state(state, config)
    candidate_state = reduced.with_phi(candidate_phi)
    reduced_value = energy(reduced)
    candidate_value = energy(candidate_state)
    gap = candidate_value - reduced_value
    quadratic = _dirichlet_energy(state, candidate_phi - reduced.phi)
    return EnergyGap(
        reduced=reduced_value,
        candidate=candidate_value,
        gap=gap,
        quadratic=quadratic,
        passed=gap >= (1.0 - tolerance) * quadratic,
    )


# ====================
# KKT fit
# ====================


@dataclass
class KKTFit:
    """Fit of E = E0 - c f^(1/k) on the support of f.

    Attributes:
        e0: Fitted cut-off energy.
        c: Fitted scale constant.
        residual: sup over the support of |E + c f^(1/k) - E0|.
        slackness: min of E - E0 off the support (inf when f > 0 everywhere).
        rank_correlation: Spearman correlation of f with -E on the support.
        support_size: Number of grid nodes on the support.
    """

    e0: float
    c: float
    residual: float
    slackness: float
    rank_correlation: float
    support_size: int


def _support(state: PhaseSpaceState, floor: float) -> NDArray[np.bool_]:
    peak = float(np.max(state.f))
    return state.f > floor * peak


def kkt_fit(state: PhaseSpaceState, k: float, support_floor: float = 1e-10) -> KKTFit:
    """Fit the multiplier relation on a state whose potential is psi_f.

    Raises:
        InvalidStateError: Fewer than three nodes carry f.
    """
    support = _support(state, support_floor)
    size = int(np.count_nonzero(support))
    if size < 3:
        raise InvalidStateError("KKT fit needs at least three supported nodes")
    energy_grid = state.energy_grid()
    x = state.f[support] ** (1.0 / k)
    y = energy_grid[support]
    slope, intercept = np.polyfit(x, y, 1)
    c, e0 = -float(slope), float(intercept)
    residual = float(np.max(np.abs(y + c * x - e0)))
    outside = energy_grid[~support]
    slackness = float(np.min(outside)) - e0 if outside.size else math.inf
    rank = float(spearmanr(state.f[support], -y).statistic)
    return KKTFit(
        e0=e0,
        c=c,
        residual=residual,
        slackness=slackness,
        rank_correlation=rank,
        support_size=size,
    )


# ====================
# Descent
# ====================


def box_state(
    mass: float, lq_norm: float, k: float, config: VariationalConfig | None = None
) -> PhaseSpaceState:
    """Uniform feasible box filling half the momentum grid.

    Before renormalization the box value is (J^q/M)^(1/(q-1)) and its radius
    sits at ``support_fraction`` of the radial grid.
    """
    config = config or VariationalConfig()
    q = _lq_exponent(k)
    _check_positive(mass, "mass")
    _check_positive(lq_norm, "L^q norm")
    value = (lq_norm**q / mass) ** (1.0 / (q - 1.0))
    p_box = 0.5 * config.p_max
    radius = (mass / (value * (FOUR_PI / 3.0) ** 2 * p_box**3)) ** (1.0 / 3.0)
    r_grid = np.linspace(0.0, radius / config.support_fraction, config.n_r + 1)[1:]
    p_grid = np.linspace(0.0, config.p_max, config.n_p + 1)[1:]
    inside = (r_grid[:, None] <= radius) & (p_grid[None, :] <= p_box)
    f = np.where(inside, value, 0.0)
    state = PhaseSpaceState.static(r_grid, p_grid, f, np.zeros_like(r_grid))
    return renormalize(state, mass, lq_norm, q)


def support_fraction(state: PhaseSpaceState, floor: float = 1e-10) -> float:
    """Outermost supported radius over the grid radius."""
    rows = np.flatnonzero(np.any(_support(state, floor), axis=1))
    if rows.size == 0:
        return 0.0
    return float(state.r_grid[rows[-1]] / state.r_grid[-1])


def regrid(state: PhaseSpaceState, radius: float) -> PhaseSpaceState:
    """Resample f and phi on a uniform radial grid of the same size ending at ``radius``.

    Shape-preserving cubic interpolation in r; f is zero beyond the old grid
    and the potential continues as a vacuum field.
    """
    _check_positive(radius, "grid radius")
    old = np.concatenate(([0.0], state.r_grid))
    new = np.linspace(0.0, radius, state.r_grid.size + 1)[1:]
    f_old = np.vstack([state.f[:1], state.f])
    f_new = PchipInterpolator(old, f_old, axis=0, extrapolate=False)(new)
    f_new = np.clip(np.nan_to_num(f_new, nan=0.0), 0.0, None)

    edge = float(state.r_grid[-1])
    inside = new <= edge
    phi_new = np.empty_like(new)
    phi_new[inside] = PchipInterpolator(
        old, np.concatenate(([state.phi[0]], state.phi))
    )(new[inside])
    charge = edge * edge * float(np.gradient(state.phi, state.r_grid)[-1])
    phi_new[~inside] = state.phi[-1] + charge * (1.0 / edge - 1.0 / new[~inside])
    return replace(
        state, r_grid=new, f=f_new, phi=phi_new, phi_t=np.zeros_like(new)
    )


def _polytrope_target(
    state: PhaseSpaceState, mass: float, lq_norm: float, k: float
) -> FloatArray:
    """Minimizer of integral E f over {f >= 0, ||f||_1 = M, ||f||_q <= J}.

    The minimizer is (M/m) (E0 - E)_+^k with m = integral (E0 - E)_+^k and E0
    fixed by the L^q constraint.
    """
    q = 1.0 + 1.0 / k
    energy_grid = state.energy_grid()
    low, high = float(np.min(energy_grid)), float(np.max(energy_grid))

    def excess(e0: float) -> float:
        gap = np.clip(e0 - energy_grid, 0.0, None)
        m = phase_integral(gap**k, state)
        n = phase_integral(gap ** (k + 1.0), state)
        if m <= 0.0 or n <= 0.0:
            return _EXCESS_CAP
        return q * math.log(mass / m) + math.log(n) - q * math.log(lq_norm)

    cell = high - low if high > low else 1.0
    lower = low + 1e-9 * cell
    if excess(lower) <= 0.0:
        raise ConvergenceError("phase-space cells too coarse for the L^q constraint")
    upper = high + cell
    for _ in range(60):
        if excess(upper) < 0.0:
            break
        upper = high + 2.0 * (upper - high)
    else:
        raise ConvergenceError("radial grid too small for the constraints")

    e0 = brentq(excess, lower, upper, xtol=1e-15 * max(1.0, abs(upper)), rtol=1e-14)
    gap = np.clip(e0 - energy_grid, 0.0, None) ** k
    return np.asarray(gap * (mass / phase_integral(gap, state)), dtype=np.float64)


def _projected_target(state: PhaseSpaceState, k: float, floor: float) -> FloatArray:
    """Clipped step of f against the constraint-projected first variation."""
    q = 1.0 + 1.0 / k
    support = _support(state, floor)
    energy_grid = state.energy_grid()
    weights = np.outer(shell_weights(state.r_grid), shell_weights(state.p_grid))
    basis = np.stack([np.ones(np.count_nonzero(support)), q * state.f[support] ** (q - 1.0)])
    root = np.sqrt(np.abs(weights[support]))
    coeffs, *_ = np.linalg.lstsq((basis * root).T, energy_grid[support] * root, rcond=None)
    gradient = energy_grid - coeffs[0] - coeffs[1] * q * state.f ** (q - 1.0)
    scale = float(np.max(np.abs(gradient[support])))
    if scale == 0.0:
        return state.f.copy()
    step = float(np.max(state.f)) / scale
    return np.clip(state.f - step * gradient, 0.0, None)


@dataclass
class MinimizerResult:
    """Outcome of a descent run.

    ``state`` carries the final distribution with its reduced field as
    potential; ``mass`` and ``lq_norm`` are its constraint values.
    """

    state: PhaseSpaceState
    energy: float
    mass: float
    lq_norm: float
    k: float
    kkt: KKTFit
    iterations: int
    converged: bool
    sub_threshold: bool
    regrids: int
    initial_energy: float
    trace: pd.DataFrame = field(repr=False)

    @property
    def psi(self) -> FloatArray:
        return self.state.phi

    @property
    def kkt_e0(self) -> float:
        return self.kkt.e0

    @property
    def kkt_c(self) -> float:
        return self.kkt.c

    @property
    def kkt_residual(self) -> float:
        return self.kkt.residual

    def summary(self) -> dict[str, float | int | bool]:
        return {
            "energy": self.energy,
            "mass": self.mass,
            "lq_norm": self.lq_norm,
            "k": self.k,
            "kkt_e0": self.kkt.e0,
            "kkt_c": self.kkt.c,
            "kkt_residual": self.kkt.residual,
            "slackness": self.kkt.slackness,
            "rank_correlation": self.kkt.rank_correlation,
            "iterations": self.iterations,
            "converged": self.converged,
            "sub_threshold": self.sub_threshold,
            "regrids": self.regrids,
        }


class _Descent:
    """Reduced-energy evaluations with a warm-started field."""

    def __init__(
        self, mass: float, lq_norm: float, k: float, greens: GreensConfig | None
    ) -> None:
        self.mass = mass
        self.lq_norm = lq_norm
        self.q = 1.0 + 1.0 / k
        self.greens = greens
        self.evaluations = 0

    def evaluate(self, state: PhaseSpaceState, warm: FloatArray | None) -> PhaseSpaceState:
        self.evaluations += 1
        return reduced_state(state, self.greens, warm)

    def project(self, state: PhaseSpaceState) -> PhaseSpaceState:
        return renormalize(state, self.mass, self.lq_norm, self.q)


def _needs_regrid(state: PhaseSpaceState, config: VariationalConfig) -> bool:
    low, high = config.support_band
    fraction = support_fraction(state, config.support_floor)
    return not low <= fraction <= high


def _regrid_to_support(
    descent: _Descent, state: PhaseSpaceState, config: VariationalConfig
) -> PhaseSpaceState:
    fraction = support_fraction(state, config.support_floor)
    radius = fraction * float(state.r_grid[-1]) / config.support_fraction
    resampled = descent.project(regrid(state, radius))
    logger.info(
        "variational.grid_rescaled",
        support_fraction=fraction,
        radius=radius,
    )
    return descent.evaluate(resampled, resampled.phi)


def minimize_energy(
    mass: float,
    lq_norm: float,
    k: float,
    config: VariationalConfig | None = None,
    greens: GreensConfig | None = None,
    initial: PhaseSpaceState | None = None,
) -> MinimizerResult:
    """Descend the reduced energy over {f >= 0, ||f||_1 = M, ||f||_q = J}.

    Each iteration builds a target from E = sqrt(exp(2 psi_f) + |p|^2) (the
    polytrope minimizer of integral E f over the constraint set, or a clipped
    gradient step), moves towards it with a backtracking line search halving
    from ``initial_step``, and renormalizes. The radial grid is rescaled when
    the support leaves ``support_band``. Descent stops when the relative
    energy decrease over ``stall_window`` iterations falls below
    ``stall_tol`` or no step decreases the energy.

    Args:
        mass: Target mass M > 0.
        lq_norm: Target norm J > 0 of f in L^(1+1/k).
        k: Polytrope exponent in (0, 2).
        config: Grid and stopping rules.
        greens: Field solver settings.
        initial: Starting distribution; a uniform box when omitted.

    Returns:
        The result; ``sub_threshold`` is set when the energy never dropped
        below M and ``converged`` is False when the iteration cap was hit.
    """
    config = config or VariationalConfig()
    q = _lq_exponent(k)
    _check_positive(mass, "mass")
    _check_positive(lq_norm, "L^q norm")
    descent = _Descent(mass, lq_norm, k, greens)

    start = box_state(mass, lq_norm, k, config) if initial is None else descent.project(initial)
    regrids = 0
    if _needs_regrid(start, config):
        current = _regrid_to_support(descent, start, config)
        regrids += 1
    else:
        current = descent.evaluate(start, None)
    current_energy = energy(current)
    initial_energy = current_energy
    history = [current_energy]
    rows: list[tuple[int, float, float]] = []
    converged = False
    iteration = 0

    for iteration in range(1, config.max_iter + 1):
        if config.direction == "polytrope":
            target = _polytrope_target(current, mass, lq_norm, k)
        else:
            target = _projected_target(current, k, config.support_floor)
        direction = target - current.f

        step = config.initial_step
        accepted: PhaseSpaceState | None = None
        accepted_energy = current_energy
        while step >= config.min_step:
            trial_f = np.clip(current.f + step * direction, 0.0, None)
            if np.any(trial_f > 0.0):
                trial = descent.evaluate(descent.project(current.with_f(trial_f)), current.phi)
                trial_energy = energy(trial)
                if trial_energy < current_energy:
                    accepted, accepted_energy = trial, trial_energy
                    break
            step *= 0.5

        if accepted is None:
            converged = True
            logger.info("variational.line_search_exhausted", iteration=iteration)
            break

        current, current_energy = accepted, accepted_energy
        if _needs_regrid(current, config):
            current = _regrid_to_support(descent, current, config)
            current_energy = energy(current)
            regrids += 1
            history = [current_energy]
        else:
            history.append(current_energy)

        fit = kkt_fit(current, k, config.support_floor)
        rows.append((iteration, current_energy, fit.residual))
        if iteration % 100 == 0:
            logger.debug(
                "variational.descent_progress",
                iteration=iteration,
                energy=current_energy,
                step=step,
                kkt_residual=fit.residual,
            )

        window = config.stall_window
        if len(history) > window:
            decrease = history[-window - 1] - history[-1]
            if decrease < config.stall_tol * abs(history[-1]):
                converged = True
                break

    if not converged:
        logger.warning("variational.iteration_capped", iterations=iteration)

    fit = kkt_fit(current, k, config.support_floor)
    final_mass, final_norm = constraint_values(current, q)
    sub_threshold = current_energy >= mass
    if sub_threshold:
        logger.warning("variational.sub_threshold_mass", mass=mass, energy=current_energy)
    logger.info(
        "variational.descent_completed",
        iterations=iteration,
        energy=current_energy,
        kkt_residual=fit.residual,
        evaluations=descent.evaluations,
        regrids=regrids,
    )
    return MinimizerResult(
        state=current,
        energy=current_energy,
        mass=final_mass,
        lq_norm=final_norm,
        k=k,
        kkt=fit,
        iterations=iteration,
        converged=converged,
        sub_threshold=sub_threshold,
        regrids=regrids,
        initial_energy=initial_energy,
        trace=pd.DataFrame(rows, columns=TRACE_COLUMNS),
    )


# ====================
# Trial family
# ====================


def bump(s: ArrayLike) -> FloatArray:
    """Smooth radial cut-off: 1 for s <= 1, 0 for s >= 2."""
    s = np.asarray(s, dtype=np.float64)
    out = np.where(s <= 1.0, 1.0, 0.0)
    inside = (s > 1.0) & (s < 2.0)
    t = s[inside]
    out[inside] = expit(1.0 / (t - 1.0) - 1.0 / (2.0 - t))
    return out


def bump_slope(s: float) -> float:
    if not 1.0 < s < 2.0:
        return 0.0
    sigma = float(expit(1.0 / (s - 1.0) - 1.0 / (2.0 - s)))
    return -sigma * (1.0 - sigma) * (1.0 / (s - 1.0) ** 2 + 1.0 / (2.0 - s) ** 2)


@lru_cache(maxsize=1)
def bump_dirichlet_energy() -> float:
    """K = integral |grad bump|^2 over R^3."""
    value, _ = quad(
        lambda s: FOUR_PI * s * s * bump_slope(s) ** 2, 1.0, 2.0, epsabs=0.0, epsrel=1e-12,
        limit=200,
    )
    return float(value)


@dataclass(frozen=True)
class TrialFamily:
    """Box distribution v * 1{|x| <= beta} * 1{|p| <= gamma} of mass M and L^q norm J."""

    gamma: float
    mass: float
    lq_norm: float
    k: float

    @property
    def q(self) -> float:
        return 1.0 + 1.0 / self.k

    @property
    def value(self) -> float:
        return (self.lq_norm**self.q / self.mass) ** (1.0 / (self.q - 1.0))

    @property
    def beta(self) -> float:
        q = self.q
        inner = (self.mass / self.lq_norm) ** (q / (q - 1.0)) * (3.0 / FOUR_PI) ** 2
        return inner ** (1.0 / 3.0) / self.gamma

    @property
    def phase_volume(self) -> float:
        return (FOUR_PI / 3.0) ** 2 * (self.beta * self.gamma) ** 3

    @property
    def box_mass(self) -> float:
        return self.value * self.phase_volume

    @property
    def box_lq_norm(self) -> float:
        return self.value * self.phase_volume ** (1.0 / self.q)


def _trial_family(gamma: float, mass: float, lq_norm: float, k: float) -> TrialFamily:
    _check_positive(gamma, "gamma")
    _check_positive(mass, "mass")
    _check_positive(lq_norm, "L^q norm")
    check_exponent(k, upper_inclusive=False)
    return TrialFamily(gamma=gamma, mass=mass, lq_norm=lq_norm, k=k)


def test_family_energy(gamma: float, alpha: float, mass: float, lq_norm: float, k: float) -> float:
    """E(f_gamma, phi_alpha) with phi_alpha(x) = -alpha * bump(|x| / beta).

    phi_alpha = -alpha on the support of the box, so the kinetic part is a
    single momentum integral; the field part is alpha^2 beta K / 2.
    """
    if alpha < 0.0:
        raise InvalidParameterError(f"alpha={alpha} must be nonnegative")
    family = _trial_family(gamma, mass, lq_norm, k)
    rest = math.exp(-2.0 * alpha)
    momentum, _ = quad(
        lambda p: FOUR_PI * p * p * math.sqrt(rest + p * p), 0.0, gamma, epsabs=0.0,
        epsrel=1e-13,
    )
    spatial = FOUR_PI / 3.0 * family.beta**3
    kinetic = family.value * spatial * momentum
    return kinetic + 0.5 * alpha**2 * family.beta * bump_dirichlet_energy()


def test_family_bound(gamma: float, alpha: float, mass: float, lq_norm: float, k: float) -> float:
    """exp(-alpha) M + (3/4) M gamma + alpha^2 beta K."""
    family = _trial_family(gamma, mass, lq_norm, k)
    return (
        math.exp(-alpha) * mass
        + 0.75 * mass * gamma
        + alpha**2 * family.beta * bump_dirichlet_energy()
    )


def large_mass_threshold(lq_norm: float, k: float) -> float:
    """Mass above which the optimized trial family has energy below M."""
    _check_positive(lq_norm, "L^q norm")
    q = _lq_exponent(k)
    kk = bump_dirichlet_energy()
    inner = (
        0.75 ** (5.0 * (q - 1.0))
        * (8.0 / math.pi) ** (2.0 * (q - 1.0))
        * kk ** (3.0 * (q - 1.0))
        * lq_norm ** (-q)
    )
    return float(inner ** (1.0 / (2.0 * q - 3.0)))


@dataclass
class OptimizedFamily:
    """Trial pair with gamma(alpha) and alpha = ln A."""

    a_factor: float
    alpha: float
    gamma: float
    energy: float
    bound: float


def optimized_family(mass: float, lq_norm: float, k: float) -> OptimizedFamily:
    """Optimize the trial bound; needs A > 1, i.e. M above ``large_mass_threshold``.

    Raises:
        InvalidParameterError: A <= 1.
    """
    _check_positive(mass, "mass")
    _check_positive(lq_norm, "L^q norm")
    q = _lq_exponent(k)
    kk = bump_dirichlet_energy()
    a_factor = (
        kk**-0.5
        * (4.0 / 3.0) ** (5.0 / 6.0)
        * (math.pi / 8.0) ** (1.0 / 3.0)
        * lq_norm ** (q / (6.0 * q - 6.0))
        * mass ** ((2.0 * q - 3.0) / (6.0 * q - 6.0))
    )
    if a_factor <= 1.0:
        raise InvalidParameterError(
            f"mass {mass} is below the trial-family threshold (A={a_factor:.6g})"
        )
    alpha = math.log(a_factor)
    inner = (mass / lq_norm) ** (q / (q - 1.0)) * (3.0 / FOUR_PI) ** 2
    gamma = math.sqrt(4.0 * kk / (3.0 * mass)) * inner ** (1.0 / 6.0) * alpha
    return OptimizedFamily(
        a_factor=a_factor,
        alpha=alpha,
        gamma=gamma,
        energy=test_family_energy(gamma, alpha, mass, lq_norm, k),
        bound=(1.0 + alpha) / a_factor * mass,
    )
