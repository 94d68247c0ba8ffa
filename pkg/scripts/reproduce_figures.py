"""Write the figure data: the family of scaled profiles and the mass-E0 curve.

Produces, in the output directory:
- profile_family.csv: long format (a, r, psi, dpsi) for several shooting parameters
- mass_curve.csv: sweep rows (a, r0, dpsi_r0, e0, scaled_mass, physical_mass)

Usage:
    uv run python -m scripts.reproduce_figures [--k 1] [--output-dir results/figures] [--jobs 4]
"""

import argparse
from pathlib import Path

from app.core.config import SweepConfig, config_hash, load_settings
from app.core.logging import set_run_id, setup_logging
from app.polytrope.radial_ode import profile_family
from app.polytrope.services.sweep_service import SweepService, sweep_values
from app.shared.formatting import write_csv

FAMILY_A = (-0.2, -0.5, -0.723, -1.0, -1.5, -2.0)


def reproduce(k: float, output_dir: Path, jobs: int | None, config: Path | None) -> None:
    """Compute and write both figure tables.

    Args:
        k: Polytrope exponent.
        output_dir: Destination directory.
        jobs: Worker processes for the mass sweep.
        config: Optional JSON config document.
    """
    settings = load_settings(config, {"jobs": jobs} if jobs else None)
    setup_logging(settings.log_level, settings.log_file)
    set_run_id()

    family = profile_family(k, list(FAMILY_A), settings.ode, settings.quadrature)
    family_hash = config_hash(settings, "profile_family", {"k": k, "a": list(FAMILY_A)})
    write_csv(family, output_dir / "profile_family.csv", family_hash)
    print(f"Wrote {len(family)} profile nodes for {len(FAMILY_A)} shooting parameters")

    sweep = SweepConfig(a_min=-3.0, a_max=-0.05, points=50)
    service = SweepService(settings.ode, settings.jobs, settings.quadrature)
    result = service.run(k, sweep_values(sweep))
    curve_hash = config_hash(settings, "mass_curve", {"k": k, **sweep.model_dump()})
    write_csv(result.to_frame(), output_dir / "mass_curve.csv", curve_hash)
    print(
        f"Wrote {len(result.rows)} mass-curve rows "
        f"(violations={len(result.violations)}, threshold={result.threshold})"
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Write figure data as CSV")
    parser.add_argument("--k", type=float, default=1.0, help="Polytrope exponent")
    parser.add_argument("--output-dir", type=Path, default=Path("results/figures"))
    parser.add_argument("--jobs", type=int, default=None, help="Worker processes")
    parser.add_argument("--config", type=Path, default=None, help="JSON config document")
    args = parser.parse_args()
    reproduce(args.k, args.output_dir, args.jobs, args.config)
