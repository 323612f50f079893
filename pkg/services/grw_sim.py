"""
GRW process on a periodic 1-D-per-particle configuration grid.

Between collapses the wave function follows the Schrödinger equation
(spectral propagation, split-step with a potential); at Poisson times of rate
N*lambda a uniformly chosen particle is hit by a Gaussian collapse whose
center is drawn from rho(x) = N(x)^2. Each collapse is recorded as a flash.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import stats

from models.errors import MemoryBudgetError, NumericalError
from models.grid import GridWaveFunction, MassDensityField
from models.schemas import FlashEvent, GrwConfig, PacketConfig

logger = logging.getLogger(__name__)

SPLIT_STEP_TOL = 1e-8
MAX_SUBSTEP_DOUBLINGS = 16


@dataclass
class GrwTrajectory:
    """Snapshots at the configured cadence plus the flash record of one run."""

    snapshots: list[tuple[float, GridWaveFunction]]
    flashes: list[FlashEvent]
    run: int = 0


def grid_positions(config: GrwConfig) -> np.ndarray:
    return np.arange(config.grid_points) * config.spacing


def wrapped_offset(x: np.ndarray, center: float | np.ndarray, box_length: float) -> np.ndarray:
    """Shortest signed periodic distance x - center."""
    return (x - center + 0.5 * box_length) % box_length - 0.5 * box_length


def gaussian(x: np.ndarray, width: float) -> np.ndarray:
    """1-D normalized Gaussian g_width(x)."""
    return np.exp(-(x**2) / (2.0 * width**2)) / np.sqrt(2.0 * np.pi * width**2)


def _packet(x: np.ndarray, packet: PacketConfig, box_length: float) -> np.ndarray:
    offset = wrapped_offset(x, packet.center, box_length)
    envelope = np.exp(-(offset**2) / (4.0 * packet.width**2) + 1j * packet.momentum * offset)
    return packet.amplitude * np.exp(1j * packet.phase) * envelope


def initial_wave_function(config: GrwConfig) -> GridWaveFunction:
    """Normalized superposition of product branches built from Gaussian packets."""
    _check_budget(config.grid_points**config.n_particles, config)
    x = grid_positions(config)
    dx = config.spacing
    total = np.zeros((config.grid_points,) * config.n_particles, dtype=np.complex128)

    for branch in config.initial_state.branches:
        factors = []
        for packets in branch.particles:
            phi = sum(_packet(x, packet, config.box_length) for packet in packets)
            factors.append(phi / np.sqrt(np.sum(np.abs(phi) ** 2) * dx))
        product = reduce(np.multiply.outer, factors)
        total = total + np.sqrt(branch.weight) * np.exp(1j * branch.phase) * product

    return GridWaveFunction.normalized(total, dx)


def _check_budget(points: int, config: GrwConfig) -> None:
    if points > config.max_grid_points:
        raise MemoryBudgetError(
            f"Grid of {points} points exceeds budget of {config.max_grid_points}"
        )


def sample_flash_schedule(
    n_particles: int, lambda_rate: float, t_end: float, rng: np.random.Generator
) -> list[tuple[float, int]]:
    """
    Poisson collapse times of rate N*lambda on [0, t_end] with uniform labels.

    Returns:
        Sorted (time, particle_label) pairs, labels in 1..N
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    count = int(rng.poisson(n_particles * lambda_rate * t_end))
    times = np.sort(rng.uniform(0.0, t_end, size=count))
    labels = rng.integers(1, n_particles + 1, size=count)
    return [(float(t), int(i)) for t, i in zip(times, labels, strict=True)]


def kinetic_energy_grid(config: GrwConfig) -> np.ndarray:
    """sum_i k_i^2 / (2 m_i) on the momentum grid."""
    k = 2.0 * np.pi * np.fft.fftfreq(config.grid_points, d=config.spacing)
    terms = [k**2 / (2.0 * mass) for mass in config.masses]
    return reduce(np.add.outer, terms) if len(terms) > 1 else terms[0]


def potential_grid(config: GrwConfig) -> np.ndarray | None:
    """V(q) on the configuration grid, or None for the zero potential."""
    potential = config.potential
    if potential.kind == "zero" or potential.omega == 0.0:
        return None
    x = grid_positions(config)
    offset = wrapped_offset(x, potential.center, config.box_length)
    terms = [0.5 * mass * potential.omega**2 * offset**2 for mass in config.masses]
    return reduce(np.add.outer, terms) if len(terms) > 1 else terms[0]


class SchrodingerPropagator:
    """Unitary propagation on the periodic grid for one configuration."""

    def __init__(self, config: GrwConfig) -> None:
        _check_budget(config.grid_points**config.n_particles, config)
        self.config = config
        self.kinetic = kinetic_energy_grid(config)
        self.potential = potential_grid(config)

    def _free(self, psi: np.ndarray, dt: float) -> np.ndarray:
        return np.fft.ifftn(np.exp(-1j * self.kinetic * dt) * np.fft.fftn(psi))

    def _split_step(self, psi: np.ndarray, dt: float, substeps: int) -> np.ndarray:
        h = dt / substeps
        half_potential = np.exp(-0.5j * self.potential * h)
        kinetic = np.exp(-1j * self.kinetic * h)
        for _ in range(substeps):
            psi = half_potential * psi
            psi = np.fft.ifftn(kinetic * np.fft.fftn(psi))
            psi = half_potential * psi
        return psi

    def evolve(self, psi: GridWaveFunction, dt: float) -> GridWaveFunction:
        if dt < 0:
            raise ValueError(f"dt must be non-negative, got {dt}")
        if psi.amplitudes.size > self.config.max_grid_points:
            raise MemoryBudgetError(
                f"Grid of {psi.amplitudes.size} points exceeds budget of "
                f"{self.config.max_grid_points}"
            )
        if dt == 0:
            return psi
        if self.potential is None:
            return GridWaveFunction(self._free(psi.amplitudes, dt), psi.spacing)

        weight = psi.spacing**psi.n_particles
        substeps = 1
        coarse = self._split_step(psi.amplitudes, dt, substeps)
        for _ in range(MAX_SUBSTEP_DOUBLINGS):
            fine = self._split_step(psi.amplitudes, dt, 2 * substeps)
            change = float(np.sqrt(np.sum(np.abs(fine - coarse) ** 2) * weight))
            if change < SPLIT_STEP_TOL:
                return GridWaveFunction(fine, psi.spacing)
            substeps *= 2
            coarse = fine
        raise NumericalError(f"Split-step did not converge for dt={dt}")


def evolve_schrodinger(
    psi: GridWaveFunction, config: GrwConfig, dt: float
) -> GridWaveFunction:
    """Advance psi by dt under H = -sum_i (1/2m_i) d^2/dq_i^2 + V."""
    return SchrodingerPropagator(config).evolve(psi, dt)


def collapse_center_density(
    psi: GridWaveFunction, particle_label: int, config: GrwConfig
) -> tuple[np.ndarray, np.ndarray]:
    """
    rho(X) = N(X)^2 on the grid, discretely normalized.

    Returns:
        rho values and the Gaussian matrix G[X, x] = g_sigma(x - X)
    """
    x = grid_positions(config)
    offsets = wrapped_offset(x[None, :], x[:, None], config.box_length)
    kernel = gaussian(offsets, config.sigma)
    marginal = psi.marginal(particle_label - 1)
    rho = kernel @ marginal * config.spacing
    total = float(rho.sum() * config.spacing)
    if total <= 0.0 or not np.isfinite(total):
        raise NumericalError("Collapse-center density vanishes")
    return rho / total, kernel


def apply_grw_hit(
    psi: GridWaveFunction, particle_label: int, config: GrwConfig, rng: np.random.Generator
) -> tuple[GridWaveFunction, float]:
    """
    Collapse particle ``particle_label`` (1-based) with a Gaussian of width sigma.

    The center X is drawn exactly on the grid from rho(x); the post-hit state is
    g_sigma(q_i - X)^{1/2} psi renormalized.
    """
    if not 1 <= particle_label <= psi.n_particles:
        raise ValueError(f"particle_label must be in 1..{psi.n_particles}, got {particle_label}")
    rho, kernel = collapse_center_density(psi, particle_label, config)
    cumulative = np.cumsum(rho * config.spacing)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    index = min(index, config.grid_points - 1)

    shape = [1] * psi.n_particles
    shape[particle_label - 1] = config.grid_points
    factor = np.sqrt(kernel[index]).reshape(shape)
    post = GridWaveFunction.normalized(factor * psi.amplitudes, psi.spacing)
    return post, float(index * config.spacing)


def _snapshot_times(config: GrwConfig, t_end: float) -> list[float]:
    if config.snapshot_interval is None:
        return [0.0, t_end]
    count = int(np.floor(t_end / config.snapshot_interval + 1e-12))
    times = [k * config.snapshot_interval for k in range(count + 1)]
    if times[-1] < t_end:
        times.append(t_end)
    return times


def run_generator(seed: int, run: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run,)))


def run_grw(config: GrwConfig, t_end: float, run: int = 0) -> GrwTrajectory:
    """
    Simulate one GRW realization on [0, t_end].

    Deterministic for a given config seed and run index.
    """
    rng = run_generator(config.seed, run)
    schedule = sample_flash_schedule(config.n_particles, config.lambda_rate, t_end, rng)
    propagator = SchrodingerPropagator(config)
    psi = initial_wave_function(config)

    events = [(t, 0, label) for t, label in schedule]
    events += [(t, 1, 0) for t in _snapshot_times(config, t_end)]
    events.sort(key=lambda event: (event[0], event[1]))

    snapshots: list[tuple[float, GridWaveFunction]] = []
    flashes: list[FlashEvent] = []
    now = 0.0
    for time, kind, label in events:
        psi = propagator.evolve(psi, time - now)
        now = time
        if kind == 0:
            psi, position = apply_grw_hit(psi, label, config, rng)
            flashes.append(FlashEvent(position=position, time=time, particle_label=label, run=run))
        else:
            snapshots.append((time, psi))

    logger.debug(f"Run {run}: {len(flashes)} flashes, {len(snapshots)} snapshots")
    return GrwTrajectory(snapshots=snapshots, flashes=flashes, run=run)


def run_many(config: GrwConfig, t_end: float, runs: int, workers: int = 1) -> list[GrwTrajectory]:
    """Independent realizations with derived seeds, ordered by run index."""
    if workers <= 1:
        return [run_grw(config, t_end, run) for run in range(runs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda run: run_grw(config, t_end, run), range(runs)))


def mass_density(psi: GridWaveFunction, config: GrwConfig, t: float = 0.0) -> MassDensityField:
    """m(x) = sum_i m_i * (marginal of |psi|^2 in coordinate i at x)."""
    values = sum(mass * psi.marginal(i) for i, mass in enumerate(config.masses))
    return MassDensityField(
        values=values, spacing=psi.spacing, time=t, total_mass=float(sum(config.masses))
    )


def mass_density_operator(psi: GridWaveFunction, masses: list[float]) -> np.ndarray:
    """<psi|M(x)|psi> with M(x) = sum_i m_i delta(Q_i - x), diagonal in position."""
    probabilities = psi.cell_probabilities().reshape(-1)
    coordinates = np.indices(psi.amplitudes.shape).reshape(psi.n_particles, -1)
    values = np.zeros(psi.grid_points)
    for i, mass in enumerate(masses):
        values += np.bincount(
            coordinates[i], weights=mass * probabilities / psi.spacing, minlength=psi.grid_points
        )
    return values


def packet_width(psi: GridWaveFunction, particle: int = 1) -> float:
    """Position standard deviation of one particle, measured around its peak."""
    marginal = psi.marginal(particle - 1)
    x = psi.positions
    peak = x[int(np.argmax(marginal))]
    offsets = wrapped_offset(x, peak, psi.box_length)
    weights = marginal * psi.spacing
    mean = float(np.sum(weights * offsets))
    return float(np.sqrt(np.sum(weights * (offsets - mean) ** 2)))


def flash_count_pvalue(counts: np.ndarray, expected_mean: float) -> float:
    """Chi-square p-value of per-run flash counts against Poisson(expected_mean)."""
    counts = np.asarray(counts, dtype=int)
    runs = counts.size
    upper = max(int(counts.max()), int(stats.poisson.ppf(0.999, expected_mean)))
    observed = np.bincount(counts, minlength=upper + 1)[: upper + 1].astype(float)
    observed[-1] += float(np.sum(counts > upper))
    expected = stats.poisson.pmf(np.arange(upper + 1), expected_mean) * runs
    expected[-1] += stats.poisson.sf(upper, expected_mean) * runs

    observed, expected = _merge_sparse_bins(observed, expected)
    if observed.size < 2:
        return 1.0
    return float(stats.chisquare(observed, expected * observed.sum() / expected.sum()).pvalue)


def label_uniformity_pvalue(labels: np.ndarray, n_particles: int) -> float:
    """Chi-square p-value of flash labels against the uniform law on 1..N."""
    observed = np.bincount(np.asarray(labels, dtype=int), minlength=n_particles + 1)[1:]
    if n_particles < 2:
        return 1.0
    return float(stats.chisquare(observed).pvalue)


def _merge_sparse_bins(
    observed: np.ndarray, expected: np.ndarray, minimum: float = 5.0
) -> tuple[np.ndarray, np.ndarray]:
    merged_observed, merged_expected = [], []
    acc_o, acc_e = 0.0, 0.0
    for o, e in zip(observed, expected, strict=True):
        acc_o += o
        acc_e += e
        if acc_e >= minimum:
            merged_observed.append(acc_o)
            merged_expected.append(acc_e)
            acc_o, acc_e = 0.0, 0.0
    if acc_e > 0 and merged_expected:
        merged_observed[-1] += acc_o
        merged_expected[-1] += acc_e
    return np.array(merged_observed), np.array(merged_expected)
