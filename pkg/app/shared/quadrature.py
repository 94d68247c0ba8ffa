"""Grid quadrature shared by the numerical modules.

Radial and momentum integrals over spherically symmetric quantities all carry a
4*pi*x^power weight that vanishes at the origin, so every rule here prepends an
x = 0 node with integrand value 0 to the stored grid and applies composite
Simpson on the padded grid.
"""

from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_simpson, simpson
from scipy.special import roots_jacobi

from app.core.exceptions import QuadratureError

FloatArray = NDArray[np.float64]

FOUR_PI = 4.0 * np.pi


def padded_grid(grid: FloatArray) -> FloatArray:
    """Prepend the origin to a strictly positive grid."""
    return np.concatenate(([0.0], grid))


def _pad_axis(values: FloatArray, axis: int) -> FloatArray:
    pad = [(0, 0)] * values.ndim
    pad[axis] = (1, 0)
    return np.pad(values, pad, mode="constant", constant_values=0.0)


def shell_integral(
    values: FloatArray, grid: FloatArray, power: int = 2, axis: int = -1
) -> FloatArray | float:
    """Integrate 4*pi*x**power * values over [0, grid[-1]] along one axis.

    Args:
        values: Integrand samples on ``grid`` (any shape).
        grid: Strictly increasing, strictly positive nodes.
        power: Power of x in the weight; must be >= 1.
        axis: Axis of ``values`` that runs along ``grid``.

    Returns:
        The integral, reduced along ``axis``.

    Raises:
        QuadratureError: Non-finite integrand.
    """
    if power < 1:
        raise QuadratureError("shell weight must vanish at the origin (power >= 1)")
    shape = [1] * values.ndim
    shape[axis] = grid.size
    integrand = FOUR_PI * values * grid.reshape(shape) ** power
    if not np.all(np.isfinite(integrand)):
        raise QuadratureError("non-finite integrand in shell integral")
    result = simpson(_pad_axis(integrand, axis), x=padded_grid(grid), axis=axis)
    if np.ndim(result) == 0:
        return float(result)
    return np.asarray(result, dtype=np.float64)


def cumulative_shell_integral(values: FloatArray, grid: FloatArray, power: int = 2) -> FloatArray:
    """Running integral of 4*pi*x**power * values from 0 to each grid node."""
    integrand = FOUR_PI * values * grid**power
    if not np.all(np.isfinite(integrand)):
        raise QuadratureError("non-finite integrand in cumulative shell integral")
    running = cumulative_simpson(
        np.concatenate(([0.0], integrand)), x=padded_grid(grid), initial=0.0
    )
    return np.asarray(running[1:], dtype=np.float64)


@lru_cache(maxsize=64)
def _shell_weight_cache(grid_bytes: bytes, power: int) -> FloatArray:
    grid = np.frombuffer(grid_bytes, dtype=np.float64)
    unit = np.eye(grid.size)
    weights = simpson(
        _pad_axis(FOUR_PI * unit * grid**power, axis=1), x=padded_grid(grid), axis=1
    )
    weights.setflags(write=False)
    return weights


def shell_weights(grid: FloatArray, power: int = 2) -> FloatArray:
    """Quadrature weights w with sum(w * g) == shell_integral(g, grid, power).

    Intended for the coarse grids of the variational verifier; cost is
    quadratic in the number of nodes.
    """
    contiguous = np.ascontiguousarray(grid, dtype=np.float64)
    return _shell_weight_cache(contiguous.tobytes(), power)


@lru_cache(maxsize=32)
def gauss_jacobi_unit(n: int, k: float) -> tuple[FloatArray, FloatArray]:
    """Nodes and weights for integrals of (1-t)**k * g(t) over [0, 1].

    Args:
        n: Number of nodes.
        k: Exponent of the endpoint factor, > -1.

    Returns:
        Tuple (t, w) with sum(w * g(t)) approximating the weighted integral.
    """
    x, w = roots_jacobi(n, k, 0.0)
    t = 0.5 * (x + 1.0)
    weights = w * 2.0 ** (-k - 1.0)
    t.setflags(write=False)
    weights.setflags(write=False)
    return t, weights


@lru_cache(maxsize=8)
def gauss_legendre_sym(n: int) -> tuple[FloatArray, FloatArray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w
