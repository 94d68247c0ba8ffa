"""Command-line entry point.

This module wires the batch front door of the package:
- Subcommand parsing (solve, sweep, physical, minimize, verify, dispersion)
- Settings from defaults, environment, a JSON config file and flags
- Structured logging setup with a per-run ID
- CSV/JSON emission stamped with the configuration hash
- Exception to exit-code mapping

Usage:
    nvpoly solve --k 1 --a -1
    nvpoly sweep --k 1 --a-min -3 --a-max -0.05 --points 50 --jobs 4
    nvpoly verify --k 1 --a -1 --output-dir results/verify
"""

import argparse
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NoReturn

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from app.core.config import Settings, config_hash, load_settings
from app.core.exceptions import (
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    IdentityCheckError,
    PolytropeError,
    exit_code_for,
)
from app.core.logging import get_logger, set_run_id, setup_logging
from app.polytrope.dispersion import MomentumKind, SeparableState, check_dispersion
from app.polytrope.radial_ode import integrate_scaled
from app.polytrope.services.sweep_service import SweepService, sweep_values
from app.polytrope.services.verification_service import VerificationService
from app.polytrope.steady_state import (
    PhysicalProfile,
    multiplier_consistency,
    polytrope_state,
    scale_to_physical,
)
from app.polytrope.variational import minimize_energy
from app.shared.formatting import write_csv, write_json
from app.shared.schemas import CheckRecord, ErrorResponse, MinimizerDocument, RunDocument

logger = get_logger(__name__)

GLOBAL_OPTIONS = ("config", "output_dir", "log_level", "log_file", "command")


class UsageError(Exception):
    """Malformed command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(message)


@dataclass
class RunContext:
    """Effective settings and output location of one invocation."""

    command: str
    settings: Settings
    output_dir: Path
    config_hash: str
    run_id: str

    def csv(self, frame: pd.DataFrame, name: str) -> Path:
        return write_csv(frame, self.output_dir / f"{name}.csv", self.config_hash)

    def json(self, document: BaseModel, name: str) -> Path:
        return write_json(document, self.output_dir / f"{name}.json")

    def document(
        self,
        summary: dict[str, Any],
        checks: list[CheckRecord] | None = None,
        passed: bool | None = None,
    ) -> RunDocument:
        return RunDocument(
            command=self.command,
            config_hash=self.config_hash,
            run_id=self.run_id,
            passed=passed,
            summary=RunDocument.clean(summary),
            checks=checks or [],
        )


# ====================
# Commands
# ====================


def _steady_state(k: float, a: float, c: float, settings: Settings) -> PhysicalProfile:
    quadrature = settings.quadrature
    profile = integrate_scaled(a, k, settings.ode, quadrature=quadrature)
    return scale_to_physical(profile, c, quadrature.jacobi_nodes)


def cmd_solve(args: argparse.Namespace, ctx: RunContext) -> None:
    """Integrate one scaled profile."""
    settings = ctx.settings
    profile = integrate_scaled(args.a, args.k, settings.ode, quadrature=settings.quadrature)
    ctx.csv(profile.to_frame(), "profile")
    ctx.json(ctx.document(profile.metadata()), "solve")


def cmd_sweep(args: argparse.Namespace, ctx: RunContext) -> None:
    """Sweep the shooting parameter and locate the regime threshold."""
    service = SweepService(ctx.settings.ode, ctx.settings.jobs, ctx.settings.quadrature)
    result = service.run(
        args.k, sweep_values(ctx.settings.sweep), args.c, locate_threshold=not args.no_threshold
    )
    ctx.csv(result.to_frame(), "sweep")
    summary = {
        "k": result.k,
        "c": result.c,
        "rows": len(result.rows),
        "missing": len(result.missing),
        "violations": len(result.violations),
        "monotone": result.monotone,
        "threshold": result.threshold,
        "abs_threshold": abs(result.threshold) if result.threshold is not None else None,
    }
    ctx.json(ctx.document(summary, passed=result.monotone), "sweep")


def cmd_physical(args: argparse.Namespace, ctx: RunContext) -> None:
    """Scale a profile to physical variables and check the multiplier identities."""
    phys = _steady_state(args.k, args.a, args.c, ctx.settings)
    report = multiplier_consistency(phys)
    checks = [
        CheckRecord(
            name=check.name,
            passed=check.passed,
            deviation=check.rel_error,
            tolerance=report.tolerance,
        )
        for check in report.checks
    ]
    ctx.csv(phys.to_frame(), "physical")
    ctx.json(ctx.document(phys.summary(), checks, report.passed), "physical")
    if not report.passed:
        raise IdentityCheckError(
            f"multiplier identities failed: {', '.join(report.failures)}",
            failures=[record.model_dump() for record in checks if not record.passed],
        )


def cmd_minimize(args: argparse.Namespace, ctx: RunContext) -> None:
    """Run the constrained energy descent."""
    config = ctx.settings.variational
    mass, lq_norm, initial = args.mass, args.lq_norm, None
    if args.steady_state_a is not None:
        phys = _steady_state(args.k, args.steady_state_a, 1.0, ctx.settings)
        initial = polytrope_state(phys, config.n_r, config.n_p)
        mass = mass if mass is not None else phys.mass
        lq_norm = lq_norm if lq_norm is not None else phys.lq_norm
    if mass is None or lq_norm is None:
        raise UsageError("minimize needs --mass and --lq-norm or --steady-state-a")
    result = minimize_energy(mass, lq_norm, args.k, config, ctx.settings.greens, initial)
    ctx.csv(result.trace, "minimize_trace")
    ctx.json(MinimizerDocument.from_result(result), "minimize_state")
    ctx.json(ctx.document(result.summary()), "minimize")


def cmd_verify(args: argparse.Namespace, ctx: RunContext) -> None:
    """Run the identity battery on one steady state."""
    quadrature = ctx.settings.quadrature
    service = VerificationService(ctx.settings.ode, ctx.settings.greens, quadrature=quadrature)
    profile = integrate_scaled(args.a, args.k, ctx.settings.ode, quadrature=quadrature)
    report = service.battery(profile, args.c)
    checks = [CheckRecord(**record) for record in report.to_records()]
    ctx.csv(pd.DataFrame(report.to_records()), "verify")
    ctx.json(ctx.document({"k": args.k, "a": args.a, "c": args.c}, checks, report.passed), "verify")
    if not report.passed:
        raise IdentityCheckError(
            f"{len(report.failures)} identity check(s) failed", failures=report.failures
        )


def dispersion_state(args: argparse.Namespace) -> SeparableState:
    """Gaussian spatial profile with the requested momentum factor and boost."""
    r_grid = np.linspace(0.0, 12.0 * args.width, 601)[1:]
    p_grid = np.linspace(0.0, 12.0 * args.momentum_width, 601)[1:]
    return SeparableState(
        r_grid=r_grid,
        spatial=np.exp(-((r_grid / args.width) ** 2)),
        kind=MomentumKind(args.kind),
        p_grid=p_grid,
        momentum=np.exp(-((p_grid / args.momentum_width) ** 2)),
        shell_radius=args.shell_radius,
        x_shift=args.x_shift,
        p_shift=args.p_shift,
    )


def cmd_dispersion(args: argparse.Namespace, ctx: RunContext) -> None:
    """Tabulate the conformal-energy dispersion bounds."""
    report = check_dispersion(dispersion_state(args), np.linspace(0.0, args.t_max, args.t_points))
    ctx.csv(report.frame, "dispersion")
    summary: dict[str, Any] = dict(report.coefficients.to_dict())
    summary.update(
        q0=report.coefficients.q0,
        margin=report.coefficients.dispersion_margin,
        t_hold=report.t_hold,
        t_activation=report.t_activation,
        violations=len(report.violations),
    )
    ctx.json(ctx.document(summary, passed=report.passed), "dispersion")
    if not report.passed:
        raise IdentityCheckError(
            "dispersion bound violated",
            failures=[{"name": "dispersion", "t": t} for t in report.violations],
        )


COMMANDS: dict[str, Callable[[argparse.Namespace, RunContext], None]] = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "physical": cmd_physical,
    "minimize": cmd_minimize,
    "verify": cmd_verify,
    "dispersion": cmd_dispersion,
}


# ====================
# Parser
# ====================


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON config document")
    common.add_argument("--output-dir", default=None, help="Directory for CSV/JSON outputs")
    common.add_argument("--log-level", default=None)
    common.add_argument("--log-file", default=None)

    parser = _Parser(prog="nvpoly", description="Isotropic Nordstrom-Vlasov polytropes")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def steady(name: str, help_text: str) -> argparse.ArgumentParser:
        command = sub.add_parser(name, parents=[common], help=help_text)
        command.add_argument("--k", type=float, default=1.0, help="Polytrope exponent")
        command.add_argument("--a", type=float, default=-1.0, help="Shooting parameter (< 0)")
        command.add_argument("--c", type=float, default=1.0, help="Scale constant")
        command.add_argument("--method", choices=["RK45", "DOP853"], default=None)
        return command

    steady("solve", "integrate one scaled profile")
    steady("physical", "physical steady state and multiplier identities")
    steady("verify", "full identity battery")

    sweep = sub.add_parser("sweep", parents=[common], help="shooting-parameter sweep")
    sweep.add_argument("--k", type=float, default=1.0)
    sweep.add_argument("--c", type=float, default=1.0)
    sweep.add_argument("--a-min", type=float, default=None)
    sweep.add_argument("--a-max", type=float, default=None)
    sweep.add_argument("--points", type=int, default=None)
    sweep.add_argument("--jobs", type=int, default=None, help="Worker processes")
    sweep.add_argument("--method", choices=["RK45", "DOP853"], default=None)
    sweep.add_argument("--no-threshold", action="store_true", help="Skip the a* bisection")

    minimize = sub.add_parser("minimize", parents=[common], help="constrained energy descent")
    minimize.add_argument("--k", type=float, default=1.0)
    minimize.add_argument("--mass", type=float, default=None)
    minimize.add_argument("--lq-norm", type=float, default=None)
    minimize.add_argument(
        "--steady-state-a", type=float, default=None, help="Warm start at this steady state"
    )
    minimize.add_argument("--n-r", type=int, default=None)
    minimize.add_argument("--n-p", type=int, default=None)
    minimize.add_argument("--max-iter", type=int, default=None)
    minimize.add_argument("--direction", choices=["polytrope", "projected"], default=None)

    dispersion = sub.add_parser("dispersion", parents=[common], help="dispersion bounds")
    dispersion.add_argument("--kind", choices=[kind.value for kind in MomentumKind],
                            default="gridded")
    dispersion.add_argument("--width", type=float, default=1.0)
    dispersion.add_argument("--momentum-width", type=float, default=0.7)
    dispersion.add_argument("--shell-radius", type=float, default=1.0)
    dispersion.add_argument("--x-shift", type=float, default=0.0)
    dispersion.add_argument("--p-shift", type=float, default=0.0)
    dispersion.add_argument("--t-max", type=float, default=20.0)
    dispersion.add_argument("--t-points", type=int, default=41)
    return parser


def settings_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested settings mapping of the flags that were given."""
    flags = vars(args)
    overrides: dict[str, Any] = {}
    for key in ("output_dir", "log_level", "log_file", "jobs"):
        if flags.get(key) is not None:
            overrides[key] = flags[key]
    blocks = {
        "ode": {"method": "method"},
        "sweep": {"a_min": "a_min", "a_max": "a_max", "points": "points"},
        "variational": {
            "n_r": "n_r",
            "n_p": "n_p",
            "max_iter": "max_iter",
            "direction": "direction",
        },
    }
    for block, fields in blocks.items():
        given = {name: flags[flag] for name, flag in fields.items() if flags.get(flag) is not None}
        if given:
            overrides[block] = given
    return overrides


def command_arguments(args: argparse.Namespace) -> dict[str, Any]:
    return {
        key: str(value) if isinstance(value, Path) else value
        for key, value in sorted(vars(args).items())
        if key not in GLOBAL_OPTIONS
    }


def _fail(error: BaseException, code: int, failures: list[dict[str, Any]] | None = None) -> int:
    response = ErrorResponse(
        error=str(error),
        type=type(error).__name__,
        failures=failures or [],
    )
    sys.stderr.write(response.model_dump_json() + "\n")
    return code


# ====================
# Entry points
# ====================


def run(argv: Sequence[str] | None = None) -> int:
    """Parse, configure, dispatch and map the outcome to an exit code.

    Args:
        argv: Command line without the program name; sys.argv[1:] when None.

    Returns:
        0 on success, 2 on validation failure, 3 on identity failure,
        64 on an unknown subcommand, 66 on an unreadable config file.
    """
    tokens = list(sys.argv[1:] if argv is None else argv)
    if not tokens or tokens[0] not in COMMANDS:
        sys.stderr.write(f"usage: nvpoly {{{','.join(COMMANDS)}}} [options]\n")
        return EXIT_USAGE

    try:
        args = build_parser().parse_args(tokens)
        settings = load_settings(args.config, settings_overrides(args))
    except UsageError as exc:
        return _fail(exc, EXIT_VALIDATION)
    except ValidationError as exc:
        return _fail(exc, EXIT_VALIDATION)
    except PolytropeError as exc:
        return _fail(exc, exc.exit_code)

    setup_logging(settings.log_level, settings.log_file)
    run_id = set_run_id()
    arguments = command_arguments(args)
    ctx = RunContext(
        command=args.command,
        settings=settings,
        output_dir=Path(settings.output_dir),
        config_hash=config_hash(settings, args.command, arguments),
        run_id=run_id,
    )
    logger.info("cli.command_started", command=args.command, arguments=arguments)
    try:
        COMMANDS[args.command](args, ctx)
    except UsageError as exc:
        return _fail(exc, EXIT_VALIDATION)
    except IdentityCheckError as exc:
        return _fail(exc, exit_code_for(exc), exc.failures)
    except (PolytropeError, ValueError) as exc:
        return _fail(exc, exit_code_for(exc))
    logger.info("cli.command_completed", command=args.command, output_dir=str(ctx.output_dir))
    return EXIT_OK


def main() -> None:
    """Console script entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
