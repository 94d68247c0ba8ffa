"""Sweep service.

Fans the rows of a shooting-parameter sweep out to a process pool and merges
them back in a fixed order, then locates the regime threshold over the same
range.
"""

import os
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed

import numpy as np

from app.core.config import QuadratureConfig, SolverConfig, SweepConfig
from app.core.exceptions import InvalidParameterError, RegimeError
from app.core.logging import get_logger
from app.polytrope.momentum_integrals import MuTable
from app.polytrope.radial_ode import ThresholdResult, build_table, find_threshold
from app.polytrope.steady_state import SweepResult, SweepRow, assemble_sweep, sweep_row

logger = get_logger(__name__)


def sweep_values(config: SweepConfig) -> list[float]:
    """Evenly spaced shooting parameters from a_min to a_max."""
    if not config.a_min < config.a_max:
        raise InvalidParameterError(
            f"sweep range a_min={config.a_min} must lie below a_max={config.a_max}"
        )
    return [float(a) for a in np.linspace(config.a_min, config.a_max, config.points)]


def _row_job(
    a: float,
    k: float,
    c: float,
    config: SolverConfig,
    table: MuTable | None,
    quadrature: QuadratureConfig,
) -> tuple[float, SweepRow | None]:
    return a, sweep_row(a, k, c, config, table, quadrature)


class SweepService:
    """Runs steady-state sweeps over the shooting parameter.

    Rows are independent; ``jobs`` worker processes evaluate them and the merge
    sorts by a, so the result does not depend on completion order.
    """

    def __init__(
        self,
        solver: SolverConfig | None = None,
        jobs: int | None = None,
        quadrature: QuadratureConfig | None = None,
    ) -> None:
        self.solver = solver or SolverConfig()
        self.jobs = jobs or os.cpu_count() or 1
        self.quadrature = quadrature or QuadratureConfig()

    def rows(
        self, k: float, a_values: Sequence[float], c: float = 1.0
    ) -> list[SweepRow | None]:
        """Evaluate every shooting parameter, in input order."""
        if not a_values:
            raise InvalidParameterError("sweep needs at least one shooting parameter")
        if any(a >= 0.0 for a in a_values):
            raise InvalidParameterError("shooting parameters must be negative")
        table = build_table(k, min(a_values), self.solver) if self.solver.use_mu_table else None

        if self.jobs == 1 or len(a_values) == 1:
            return [_row_job(a, k, c, self.solver, table, self.quadrature)[1] for a in a_values]

        found: dict[float, SweepRow | None] = {}
        workers = min(self.jobs, len(a_values))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_row_job, a, k, c, self.solver, table, self.quadrature)
                for a in a_values
            ]
            for future in as_completed(futures):
                a, row = future.result()
                found[a] = row
                logger.debug("sweep.row_completed", a=a, crossed=row is not None)
        return [found[a] for a in a_values]

    def threshold(self, k: float, a_range: tuple[float, float]) -> ThresholdResult | None:
        """Regime threshold inside the range, None when the range holds a single regime."""
        try:
            return find_threshold(k, a_range, self.solver, self.quadrature)
        except RegimeError as exc:
            logger.warning("sweep.threshold_not_bracketed", k=k, a_range=a_range, reason=str(exc))
            return None

    def run(
        self,
        k: float,
        a_values: Sequence[float],
        c: float = 1.0,
        locate_threshold: bool = True,
    ) -> SweepResult:
        """Sweep rows, merged and checked for mass monotonicity, plus the threshold.

        Args:
            k: Polytrope exponent.
            a_values: Negative shooting parameters.
            c: Scale constant of the physical steady states.
            locate_threshold: Bisect for a* over [min a, max a] as well.

        Returns:
            The sweep. ``threshold`` holds a* (negative) or None.
        """
        logger.info("sweep.run_started", k=k, points=len(a_values), jobs=self.jobs)
        result = assemble_sweep(k, c, a_values, self.rows(k, a_values, c))
        if locate_threshold and len(a_values) > 1:
            found = self.threshold(k, (min(a_values), max(a_values)))
            result.threshold = found.a_star if found is not None else None
        logger.info(
            "sweep.run_completed",
            k=k,
            rows=len(result.rows),
            missing=len(result.missing),
            violations=len(result.violations),
            threshold=result.threshold,
        )
        return result
