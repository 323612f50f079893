"""
Experiment orchestration behind the command-line subcommands.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from models.grid import GridWaveFunction
from models.quantum import DensityMatrix, StateVector
from models.schemas import (
    ExperimentConfig,
    Figure1Row,
    GrwConfig,
    HelstromRow,
    MatrixFile,
    MeasurabilityRow,
    ScanRow,
    VerificationRecord,
)
from services.discrimination import (
    YesNoExperiment,
    blind_guess,
    detector_family,
    e1_detector,
    helstrom,
    optimal_collapse_detector,
    perfectly_distinguishable,
    reliability_monte_carlo,
    scan_success_sets,
)
from services.grw_sim import GrwTrajectory, initial_wave_function, mass_density, run_many
from services.mass_estimation import (
    MeasurabilityReport,
    analytic_two_branch_ratio,
    measurability_report,
)
from services.montecarlo import chunk_generator
from services.output_service import OutputService, make_header
from services.quantum_core import positive_part_projector
from services.verification import OPTIMAL_JOB_OFFSET, run_verification

logger = logging.getLogger(__name__)


@dataclass
class GrwRunSummary:
    runs: int
    flash_count: int
    expected: float
    flash_path: Path
    density_path: Path


def figure1_rows(config: ExperimentConfig) -> list[Figure1Row]:
    """Blind, E1 and optimal reliability for the uniform n-packet state over the p grid."""
    psi = StateVector.uniform(config.n)
    e1 = e1_detector(psi)
    rows = []
    for index, p in enumerate(config.p_grid):
        blind_effect, blind = blind_guess(p, config.n)
        e1_report = reliability_monte_carlo(
            psi, e1, None, p, config.trials, config.seed, config.workers, job=index
        )
        if 0.0 < p < 1.0:
            optimal_effect = optimal_collapse_detector(psi, None, p).effect
        else:
            optimal_effect = blind_effect
        optimal_report = reliability_monte_carlo(
            psi,
            YesNoExperiment(optimal_effect),
            None,
            p,
            config.trials,
            config.seed,
            config.workers,
            job=OPTIMAL_JOB_OFFSET + index,
        )
        rows.append(
            Figure1Row(
                p=p,
                blind=blind,
                e1_analytic=e1_report.analytic,
                e1_mc=e1_report.monte_carlo,
                e1_stderr=e1_report.stderr,
                optimal_analytic=optimal_report.analytic,
                optimal_mc=optimal_report.monte_carlo,
                optimal_stderr=optimal_report.stderr,
            )
        )
    return rows


def scan_rows(
    n: int, p: float, family_size: int, samples: int, seed: int, kind: str = "random"
) -> list[ScanRow]:
    rng = chunk_generator(seed, 0, 0)
    family = detector_family(n, family_size, rng, kind=kind)
    scan = scan_success_sets(n, p, family, samples, rng)
    return [
        ScanRow(
            effect_id=row.effect_id,
            estimate=row.estimate,
            stderr=row.stderr,
            exceeds_half=row.estimate > 0.5 + 4.0 * row.stderr,
            conjecture_violation=row.conjecture_violation,
        )
        for row in scan.rows
    ]


def density_rows(trajectories: list[GrwTrajectory], config: GrwConfig) -> list[dict[str, float]]:
    """(run, t, x, m) rows for every snapshot."""
    rows = []
    for trajectory in trajectories:
        for time, psi in trajectory.snapshots:
            field = mass_density(psi, config, time)
            for x, m in zip(field.positions, field.values, strict=True):
                rows.append({"run": trajectory.run, "t": time, "x": float(x), "m": float(m)})
    return rows


def two_branch_weight(config: GrwConfig) -> float | None:
    """Normalized weight of the first branch for two-branch configurations."""
    branches = config.initial_state.branches
    if len(branches) != 2:
        return None
    return branches[0].weight / (branches[0].weight + branches[1].weight)


def load_density_matrix(path: Path) -> DensityMatrix:
    """Read a density matrix from a JSON file with "real" and optional "imag" parts."""
    data = MatrixFile.model_validate_json(path.read_text(encoding="utf-8"))
    matrix = np.array(data.real, dtype=np.complex128)
    if data.imag is not None:
        matrix = matrix + 1j * np.array(data.imag)
    return DensityMatrix.from_matrix(matrix)


def helstrom_rows(
    rho1: DensityMatrix, rho2: DensityMatrix, p_grid: list[float]
) -> list[HelstromRow]:
    rows = []
    distinguishable = perfectly_distinguishable(rho1, rho2)
    for p in p_grid:
        _, reliability = helstrom(rho1, rho2, p)
        split = positive_part_projector(p * rho1.matrix - (1.0 - p) * rho2.matrix)
        rank = int(round(float(np.trace(split.p_plus.matrix).real)))
        rows.append(
            HelstromRow(
                p=p,
                reliability=reliability,
                blind=max(p, 1.0 - p),
                positive_rank=rank,
                perfectly_distinguishable=distinguishable,
            )
        )
    return rows


class ExperimentService:
    """Runs experiments and writes their result files."""

    def __init__(self, output_path: str = "results", timestamp: bool = True) -> None:
        """
        Initialize experiment service.

        Args:
            output_path: Directory for result files
            timestamp: Whether file headers carry a timestamp
        """
        self.output = OutputService(output_path)
        self.timestamp = timestamp
        logger.info("Experiment service initialized")

    def figure1(self, config: ExperimentConfig) -> tuple[list[Figure1Row], Path]:
        rows = figure1_rows(config)
        header = make_header(config.seed, config, self.timestamp)
        return rows, self.output.write_csv("figure1.csv", rows, header)

    def verify(self, config: ExperimentConfig) -> tuple[list[VerificationRecord], Path]:
        records = run_verification(config)
        header = make_header(config.seed, config, self.timestamp)
        columns = ["proposition", "description", "analytic", "measured", "tolerance", "deviation", "passed"]
        return records, self.output.write_csv("verify.csv", records, header, columns)

    def scan(
        self,
        config: ExperimentConfig,
        p: float,
        family_size: int,
        samples: int,
        kind: str = "random",
    ) -> tuple[list[ScanRow], Path]:
        rows = scan_rows(config.n, p, family_size, samples, config.seed, kind)
        header = make_header(config.seed, config, self.timestamp)
        return rows, self.output.write_csv("scan.csv", rows, header)

    def grw_run(
        self, config: GrwConfig, t_end: float, runs: int = 1, workers: int = 1
    ) -> GrwRunSummary:
        trajectories = run_many(config, t_end, runs, workers)
        header = make_header(config.seed, config, self.timestamp)
        flashes = [flash.to_record() for trajectory in trajectories for flash in trajectory.flashes]
        flash_path = self.output.write_jsonl("flashes.jsonl", flashes, header)
        density_path = self.output.write_csv(
            "density.csv", density_rows(trajectories, config), header, ["run", "t", "x", "m"]
        )
        expected = config.n_particles * config.lambda_rate * t_end * runs
        logger.info(f"GRW run: {len(flashes)} flashes, expected {expected:.4g}")
        return GrwRunSummary(
            runs=runs,
            flash_count=len(flashes),
            expected=expected,
            flash_path=flash_path,
            density_path=density_path,
        )

    def massdensity(
        self, config: GrwConfig, scales: list[float], threshold: float
    ) -> tuple[MeasurabilityReport, Path]:
        psi: GridWaveFunction = initial_wave_function(config)
        report = measurability_report(psi, config, scales, threshold)
        weight = two_branch_weight(config)
        analytic = analytic_two_branch_ratio(weight) if weight is not None else None
        rows = [
            MeasurabilityRow(ell=row.ell, cell=row.cell, ratio=row.ratio, analytic_two_branch=analytic)
            for row in report.rows
        ]
        header = make_header(config.seed, config, self.timestamp)
        return report, self.output.write_csv("massdensity.csv", rows, header)

    def helstrom(
        self, rho1_path: Path, rho2_path: Path, config: ExperimentConfig
    ) -> tuple[list[HelstromRow], Path]:
        rho1, rho2 = load_density_matrix(rho1_path), load_density_matrix(rho2_path)
        rows = helstrom_rows(rho1, rho2, config.p_grid)
        header = make_header(
            config.seed,
            {"rho1": rho1_path.read_text(encoding="utf-8"), "rho2": rho2_path.read_text(encoding="utf-8")},
            self.timestamp,
        )
        return rows, self.output.write_csv("helstrom.csv", rows, header)
