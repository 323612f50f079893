"""
Command-line entry point for the GRW collapse-detection toolkit.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from models.errors import CollapseToolkitError
from models.presets import get_available_presets, get_default_preset, get_preset_by_id
from models.schemas import ExperimentConfig, GrwConfig
from services.experiments import ExperimentService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG_ERROR = 2


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def add_system_source(parser: argparse.ArgumentParser) -> None:
    """Either a GrwConfig file or a preset id, never both."""
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, help="JSON GrwConfig file")
    source.add_argument("--preset", help="Demo configuration id (see 'presets')")


def build_parser() -> argparse.ArgumentParser:
    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--seed", type=int, help="Master random seed")
    base.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    base.add_argument("--workers", type=int, help="Parallel Monte Carlo workers")
    base.add_argument("--out", default="results", help="Output directory")
    base.add_argument("--tolerance", type=float, help="Override every check tolerance")
    base.add_argument("--no-timestamp", action="store_true", help="Omit timestamps from headers")
    verbosity = base.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="Warnings only")

    common = argparse.ArgumentParser(add_help=False, parents=[base])
    common.add_argument("--config", type=Path, help="JSON configuration file")

    parser = argparse.ArgumentParser(
        prog="grw-limits",
        description="Limits on detecting GRW collapse: reliability, discrimination and mass density",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    figure1 = commands.add_parser("figure1", parents=[common], help="Reliability curves for n packets")
    figure1.add_argument("--n", type=int, help="Number of packets")
    figure1.add_argument("--p-grid", type=_float_list, help="Comma-separated collapse probabilities")

    verify = commands.add_parser("verify", parents=[common], help="Run the verification suite")
    verify.add_argument("--p-grid", type=_float_list, help="Comma-separated collapse probabilities")

    grw = commands.add_parser("grw-run", parents=[base], help="Simulate the GRW process")
    add_system_source(grw)
    grw.add_argument("--t-end", type=float, help="Simulated time")
    grw.add_argument("--runs", type=int, default=1, help="Independent realizations")
    grw.add_argument("--snapshot-interval", type=float, help="Density snapshot cadence")

    scan = commands.add_parser("scan", parents=[common], help="Success-set measure scan")
    scan.add_argument("--n", type=int, help="Hilbert space dimension")
    scan.add_argument("--p", type=float, default=0.1, help="Collapse probability")
    scan.add_argument("--family-size", type=int, default=100, help="Detectors in the family")
    scan.add_argument("--samples", type=int, default=10_000, help="Haar samples per detector")
    scan.add_argument("--kind", choices=["random", "collapse"], default="random")

    mass = commands.add_parser("massdensity", parents=[base], help="Mass-density measurability")
    add_system_source(mass)
    mass.add_argument("--scales", type=_float_list, help="Comma-separated coarse-graining scales")
    mass.add_argument("--threshold", type=float, default=0.10, help="Accuracy-ratio threshold")

    helstrom = commands.add_parser("helstrom", parents=[common], help="Discriminate two density matrices")
    helstrom.add_argument("rho1", type=Path, help="JSON file with the first density matrix")
    helstrom.add_argument("rho2", type=Path, help="JSON file with the second density matrix")
    helstrom.add_argument("--p-grid", type=_float_list, help="Comma-separated priors of rho1")

    commands.add_parser("presets", parents=[common], help="List demo configurations")
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(level=level, force=True)


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """ExperimentConfig from --config with command-line overrides applied."""
    data: dict[str, Any] = {}
    if args.config is not None:
        data = ExperimentConfig.model_validate_json(args.config.read_text(encoding="utf-8")).model_dump()
    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "workers": args.workers,
        "tolerance_override": args.tolerance,
        "n": getattr(args, "n", None),
        "p_grid": getattr(args, "p_grid", None),
    }
    data.update({key: value for key, value in overrides.items() if value is not None})
    return ExperimentConfig.model_validate(data)


def grw_config(args: argparse.Namespace) -> tuple[GrwConfig, float, list[float]]:
    """GrwConfig from --config or a preset, with its default t_end and scales."""
    preset = get_default_preset()
    if args.preset is not None:
        found = get_preset_by_id(args.preset)
        if found is None:
            raise CollapseToolkitError(f"Unknown preset: {args.preset}")
        preset = found
    if args.config is not None:
        config = GrwConfig.model_validate_json(args.config.read_text(encoding="utf-8"))
    else:
        config = preset.build()

    updates: dict[str, Any] = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "snapshot_interval", None) is not None:
        updates["snapshot_interval"] = args.snapshot_interval
    if updates:
        config = GrwConfig.model_validate({**config.model_dump(), **updates})
    return config, preset.t_end, preset.scales


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {path}: {item['msg']}")
    return "Configuration error:\n" + "\n".join(lines)


def run_command(args: argparse.Namespace) -> int:
    if args.command == "presets":
        for preset in get_available_presets():
            print(f"{preset.id:20s} {preset.description}")
        return EXIT_OK

    service = ExperimentService(args.out, timestamp=not args.no_timestamp)

    if args.command == "figure1":
        rows, path = service.figure1(experiment_config(args))
        print(f"{'p':>5} {'blind':>8} {'e1':>8} {'e1_mc':>8} {'opt':>8} {'opt_mc':>8}")
        for row in rows:
            print(
                f"{row.p:5.2f} {row.blind:8.4f} {row.e1_analytic:8.4f} {row.e1_mc:8.4f} "
                f"{row.optimal_analytic:8.4f} {row.optimal_mc:8.4f}"
            )
        print(f"Wrote {path}")
        return EXIT_OK

    if args.command == "verify":
        records, path = service.verify(experiment_config(args))
        for record in records:
            print(
                f"{record.proposition:12s} {record.verdict:4s} analytic={record.analytic:.10g} "
                f"measured={record.measured:.10g} tol={record.tolerance:.3g}  {record.description}"
            )
        failed = [record for record in records if not record.passed]
        print(f"{len(records) - len(failed)}/{len(records)} checks passed; wrote {path}")
        return EXIT_VERIFICATION_FAILED if failed else EXIT_OK

    if args.command == "grw-run":
        config, default_t_end, _ = grw_config(args)
        workers = args.workers or 1
        summary = service.grw_run(config, args.t_end or default_t_end, args.runs, workers)
        print(
            f"{summary.runs} run(s): {summary.flash_count} flashes observed, "
            f"{summary.expected:.4g} expected"
        )
        print(f"Wrote {summary.flash_path} and {summary.density_path}")
        return EXIT_OK

    if args.command == "scan":
        config = experiment_config(args)
        rows, path = service.scan(config, args.p, args.family_size, args.samples, args.kind)
        worst = max(rows, key=lambda row: row.estimate)
        flagged = sum(row.exceeds_half or row.conjecture_violation for row in rows)
        print(f"max estimate {worst.estimate:.4f} +/- {worst.stderr:.4f} ({worst.effect_id})")
        print(f"{flagged} flagged row(s); wrote {path}")
        return EXIT_OK

    if args.command == "massdensity":
        config, _, default_scales = grw_config(args)
        scales = args.scales or default_scales
        report, path = service.massdensity(config, scales, args.threshold)
        for ell in scales:
            print(f"ell={ell:<10g} max ratio={report.max_ratio[ell]:.6g}")
        smallest = "none" if report.smallest_scale is None else f"{report.smallest_scale:g}"
        print(f"smallest ell with ratio < {args.threshold:g}: {smallest}; wrote {path}")
        return EXIT_OK

    if args.command == "helstrom":
        rows, path = service.helstrom(args.rho1, args.rho2, experiment_config(args))
        for row in rows:
            print(f"p={row.p:5.2f} reliability={row.reliability:.10g} blind={row.blind:.4f}")
        print(f"Wrote {path}")
        return EXIT_OK

    raise ValueError(f"Unknown command: {args.command}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args)

    try:
        return run_command(args)
    except ValidationError as e:
        print(format_validation_error(e), file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (CollapseToolkitError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
