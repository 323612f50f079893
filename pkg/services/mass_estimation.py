"""
Genuine measurement of the GRW mass density.

Coarse-grained targets m~ (Gaussian kernel or cell average), estimators M~
built from one ideal position measurement of all particles, and the accuracy
ratio R = std(M~)/mean(M~) of a cell. Everything is one-dimensional: the
volume factor 1/l^3 becomes 1/l and cubes become intervals.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import reduce
from typing import Literal, NamedTuple

import numpy as np
from scipy.ndimage import convolve1d

from models.errors import ResolutionError, UndefinedRatioError
from models.grid import GridWaveFunction, MassDensityField
from models.schemas import GrwConfig, MeasurabilityRow
from services.grw_sim import gaussian, mass_density, mass_density_operator
from services.montecarlo import chunk_sizes

logger = logging.getLogger(__name__)

KERNEL_CUTOFF = 8.0
DEFAULT_THRESHOLD = 0.10
ALIGNMENT_TOL = 1e-9


@dataclass(frozen=True)
class CoarseGrainSpec:
    """Coarse-graining scale l and kind; ``origin`` shifts the cell partition in grid points."""

    scale: float
    kind: Literal["gaussian", "cell"] = "cell"
    origin: int = 0

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ResolutionError(f"Coarse-graining scale must be positive, got {self.scale}")
        if self.kind not in ("gaussian", "cell"):
            raise ValueError(f"Unknown coarse-graining kind: {self.kind}")

    def cell_points(self, spacing: float, grid_points: int) -> int:
        """Grid points per cell; the scale must tile the grid exactly."""
        self.check_resolution(spacing)
        width = int(round(self.scale / spacing))
        if abs(width * spacing - self.scale) > ALIGNMENT_TOL * self.scale:
            raise ResolutionError(
                f"Cell scale {self.scale} is not a multiple of the grid spacing {spacing}"
            )
        if grid_points % width != 0:
            raise ResolutionError(f"Cells of {width} points do not tile a grid of {grid_points}")
        return width

    def check_resolution(self, spacing: float) -> None:
        if self.scale < spacing * (1.0 - ALIGNMENT_TOL):
            raise ResolutionError(
                f"Coarse-graining scale {self.scale} is below the grid spacing {spacing}"
            )


class Cell(NamedTuple):
    """Periodic interval of grid points [start, start + width)."""

    start: int
    width: int

    def indicator(self, grid_points: int) -> np.ndarray:
        mask = np.zeros(grid_points, dtype=bool)
        mask[(self.start + np.arange(self.width)) % grid_points] = True
        return mask


@dataclass(frozen=True, eq=False)
class EstimatorSample:
    """One sampled configuration Q = (Q_1, ..., Q_N) as grid indices."""

    indices: np.ndarray
    spacing: float
    grid_points: int

    @property
    def positions(self) -> np.ndarray:
        return self.indices * self.spacing


@dataclass
class EstimatorStatistics:
    """Pointwise Monte Carlo mean and spread of M~(x)."""

    mean: np.ndarray
    std: np.ndarray
    samples: int
    stderr: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.stderr = self.std / np.sqrt(self.samples)


class ResolutionEstimate(NamedTuple):
    dx: float
    dt: float


@dataclass
class MeasurabilityReport:
    """Per-scale maximum of R over cells and the smallest scale below threshold."""

    rows: list[MeasurabilityRow]
    max_ratio: dict[float, float]
    threshold: float
    smallest_scale: float | None


def gaussian_kernel(spec: CoarseGrainSpec, spacing: float, grid_points: int) -> np.ndarray:
    """g_l sampled on the grid, truncated at 8 l and normalized to unit sum."""
    spec.check_resolution(spacing)
    half = min(int(math.ceil(KERNEL_CUTOFF * spec.scale / spacing)), (grid_points - 1) // 2)
    offsets = np.arange(-half, half + 1) * spacing
    weights = gaussian(offsets, spec.scale)
    return weights / weights.sum()


def _coarse_grain_values(
    values: np.ndarray, spec: CoarseGrainSpec, spacing: float
) -> np.ndarray:
    """Coarse-grain along the last axis of ``values``."""
    grid_points = values.shape[-1]
    if spec.kind == "gaussian":
        kernel = gaussian_kernel(spec, spacing, grid_points)
        return convolve1d(values, kernel, axis=-1, mode="wrap")

    width = spec.cell_points(spacing, grid_points)
    rolled = np.roll(values, -spec.origin, axis=-1)
    cells = rolled.reshape(*values.shape[:-1], grid_points // width, width).mean(axis=-1)
    return np.roll(np.repeat(cells, width, axis=-1), spec.origin, axis=-1)


def coarse_grain(
    m: MassDensityField | GridWaveFunction,
    spec: CoarseGrainSpec,
    masses: Sequence[float] | None = None,
) -> MassDensityField:
    """
    m~ = g_l * m (gaussian kind) or the average of m over the containing cell.

    A wave function is first turned into its mass density, which needs ``masses``.
    """
    if isinstance(m, GridWaveFunction):
        if masses is None:
            raise ValueError("masses are required to coarse-grain a wave function")
        m = _density_from_psi(m, masses)
    values = _coarse_grain_values(m.values, spec, m.spacing)
    return MassDensityField(values=values, spacing=m.spacing, time=m.time, total_mass=m.integral())


def _density_from_psi(psi: GridWaveFunction, masses: Sequence[float]) -> MassDensityField:
    values = mass_density_operator(psi, list(masses))
    return MassDensityField(values=values, spacing=psi.spacing, total_mass=float(sum(masses)))


def sample_position_config(psi: GridWaveFunction, rng: np.random.Generator) -> EstimatorSample:
    """Ideal position measurement of every particle, drawn from |psi(q)|^2 on the grid."""
    return EstimatorSample(
        indices=sample_position_configs(psi, 1, rng)[0],
        spacing=psi.spacing,
        grid_points=psi.grid_points,
    )


def sample_position_configs(
    psi: GridWaveFunction, count: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Batch of sampled configurations.

    Returns:
        Integer grid indices of shape (count, N)
    """
    cumulative = np.cumsum(psi.cell_probabilities().reshape(-1))
    flat = np.searchsorted(cumulative, rng.random(count) * cumulative[-1], side="right")
    flat = np.minimum(flat, cumulative.size - 1)
    return np.stack(np.unravel_index(flat, psi.amplitudes.shape), axis=-1)


def _estimator_values(
    indices: np.ndarray,
    masses: Sequence[float],
    spec: CoarseGrainSpec,
    spacing: float,
    grid_points: int,
) -> np.ndarray:
    indices = np.atleast_2d(indices)
    spikes = np.zeros((indices.shape[0], grid_points))
    rows = np.arange(indices.shape[0])
    for i, mass in enumerate(masses):
        np.add.at(spikes, (rows, indices[:, i]), mass / spacing)
    return _coarse_grain_values(spikes, spec, spacing)


def estimator_field(
    q: EstimatorSample, masses: Sequence[float], spec: CoarseGrainSpec
) -> MassDensityField:
    """M~(x) = sum_i m_i g_l(Q_i - x), or (1/l) times the mass of particles in the cell of x."""
    values = _estimator_values(q.indices, masses, spec, q.spacing, q.grid_points)[0]
    return MassDensityField(values=values, spacing=q.spacing, total_mass=float(sum(masses)))


def estimator_statistics(
    psi: GridWaveFunction,
    masses: Sequence[float],
    spec: CoarseGrainSpec,
    samples: int,
    rng: np.random.Generator,
) -> EstimatorStatistics:
    """Monte Carlo mean and standard deviation of M~(x) over ``samples`` measurements."""
    if samples < 2:
        raise ValueError(f"Need at least two samples, got {samples}")
    total = np.zeros(psi.grid_points)
    total_sq = np.zeros(psi.grid_points)
    for size in chunk_sizes(samples, chunk_size=10_000):
        indices = sample_position_configs(psi, size, rng)
        values = _estimator_values(indices, masses, spec, psi.spacing, psi.grid_points)
        total += values.sum(axis=0)
        total_sq += (values**2).sum(axis=0)

    mean = total / samples
    variance = np.maximum(total_sq / samples - mean**2, 0.0) * samples / (samples - 1)
    return EstimatorStatistics(mean=mean, std=np.sqrt(variance), samples=samples)


def cell_mass_values(psi: GridWaveFunction, cell: Cell, masses: Sequence[float]) -> np.ndarray:
    """Eigenvalues of M(C) = sum_i m_i 1[Q_i in C] on every configuration."""
    inside = cell.indicator(psi.grid_points).astype(float)
    terms = [mass * inside for mass in masses]
    return reduce(np.add.outer, terms) if len(terms) > 1 else terms[0]


def _cell_moments(psi: GridWaveFunction, cell: Cell, masses: Sequence[float]) -> tuple[float, float]:
    """Mean and variance of M(C)/l under |psi|^2."""
    ell = cell.width * psi.spacing
    probabilities = psi.cell_probabilities()
    estimator = cell_mass_values(psi, cell, masses) / ell
    mean = float(np.sum(probabilities * estimator))
    variance = float(np.sum(probabilities * (estimator - mean) ** 2))
    return mean, max(variance, 0.0)


def ghirardi_ratio(psi: GridWaveFunction, cell: Cell, masses: Sequence[float]) -> float:
    """
    R(C) = <psi|(M(C)/l - m~)^2|psi>^{1/2} / m~ with m~ = <psi|M(C)/l|psi>.

    Raises:
        UndefinedRatioError: If the cell holds no mass in expectation
    """
    mean, variance = _cell_moments(psi, cell, masses)
    if mean <= 1e-300:
        raise UndefinedRatioError(f"Cell starting at {cell.start} has zero expected mass")
    return math.sqrt(variance) / mean


def measurability_report(
    psi: GridWaveFunction,
    config: GrwConfig,
    scales: Sequence[float],
    threshold: float = DEFAULT_THRESHOLD,
    origin: int = 0,
) -> MeasurabilityReport:
    """
    Evaluate R on every occupied cell for each scale.

    A cell is occupied when its expected mass is at least
    ``config.cell_mass_cutoff`` times that of the heaviest cell at the same scale.
    """
    rows: list[MeasurabilityRow] = []
    max_ratio: dict[float, float] = {}
    for ell in scales:
        spec = CoarseGrainSpec(scale=ell, kind="cell", origin=origin)
        width = spec.cell_points(psi.spacing, psi.grid_points)
        cells = [
            Cell(start=origin + index * width, width=width)
            for index in range(psi.grid_points // width)
        ]
        moments = [_cell_moments(psi, cell, config.masses) for cell in cells]
        floor = max(config.cell_mass_cutoff * max(mean for mean, _ in moments), 1e-300)
        worst = 0.0
        skipped = 0
        for index, (mean, variance) in enumerate(moments):
            if mean < floor:
                skipped += 1
                continue
            ratio = math.sqrt(variance) / mean
            rows.append(MeasurabilityRow(ell=ell, cell=index, ratio=ratio))
            worst = max(worst, ratio)
        max_ratio[ell] = worst
        logger.info(f"Scale {ell}: max ratio {worst:.4g} ({skipped} empty cells skipped)")

    passing = [ell for ell in scales if max_ratio[ell] < threshold]
    smallest = min(passing) if passing else None
    if smallest is None:
        logger.warning(f"No coarse-graining scale reaches ratio < {threshold}")
    return MeasurabilityReport(
        rows=rows, max_ratio=max_ratio, threshold=threshold, smallest_scale=smallest
    )


def analytic_two_branch_ratio(p: float) -> float:
    """sqrt(q/p) for an object wholly inside the cell with probability p."""
    if not 0.0 < p <= 1.0:
        raise UndefinedRatioError(f"Two-branch ratio needs 0 < p <= 1, got {p}")
    return math.sqrt((1.0 - p) / p)


def resolution_estimate(config: GrwConfig, nucleons_per_cell: float) -> ResolutionEstimate:
    """dx = sigma and dt = 1/(N_dx lambda) from configuration numbers."""
    if nucleons_per_cell <= 0:
        raise ValueError(f"nucleons_per_cell must be positive, got {nucleons_per_cell}")
    rate = nucleons_per_cell * config.lambda_rate
    return ResolutionEstimate(dx=config.sigma, dt=math.inf if rate == 0 else 1.0 / rate)


def mass_density_agrees(psi: GridWaveFunction, config: GrwConfig) -> float:
    """Largest pointwise gap between the marginal and operator forms of m(x)."""
    marginal = mass_density(psi, config).values
    operator = mass_density_operator(psi, config.masses)
    return float(np.max(np.abs(marginal - operator)))
