"""
Tests for coarse-grained mass densities, estimators and the accuracy ratio.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from models.errors import ResolutionError, UndefinedRatioError
from models.grid import GridWaveFunction, MassDensityField
from models.presets import get_preset_by_id
from services.grw_sim import gaussian, initial_wave_function, wrapped_offset
from services.mass_estimation import (
    Cell,
    CoarseGrainSpec,
    MeasurabilityReport,
    analytic_two_branch_ratio,
    coarse_grain,
    estimator_field,
    estimator_statistics,
    ghirardi_ratio,
    measurability_report,
    resolution_estimate,
    sample_position_config,
    sample_position_configs,
)


def two_branch(p: float, grid_points: int = 8, particles: int = 2) -> GridWaveFunction:
    """Object wholly at site 1 with probability p, wholly at site L/2+1 otherwise."""
    amplitudes = np.zeros((grid_points,) * particles, dtype=np.complex128)
    amplitudes[(1,) * particles] = np.sqrt(p)
    amplitudes[(grid_points // 2 + 1,) * particles] = np.sqrt(1.0 - p)
    return GridWaveFunction(amplitudes, spacing=1.0)


def random_state(rng: np.random.Generator, grid_points: int = 16, particles: int = 2) -> GridWaveFunction:
    shape = (grid_points,) * particles
    values = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return GridWaveFunction.normalized(values, spacing=0.5)


class TestCoarseGrain:
    """Test cases for the coarse-grained targets."""

    def setup_method(self) -> None:
        """Set up test fixtures."""
        self.spacing = 0.25
        self.grid_points = 128

    def field(self, values: np.ndarray) -> MassDensityField:
        return MassDensityField(values=values, spacing=self.spacing)

    def test_uniform_is_fixed_point(self) -> None:
        """Test that constant fields are unchanged by both kinds."""
        m = self.field(np.full(self.grid_points, 2.0))
        for spec in (CoarseGrainSpec(1.0, "gaussian"), CoarseGrainSpec(2.0, "cell")):
            np.testing.assert_allclose(coarse_grain(m, spec).values, 2.0, atol=1e-12)

    def test_cell_at_grid_spacing_is_identity(self) -> None:
        """Test that cells of one grid point leave the field unchanged."""
        values = np.random.default_rng(3).random(self.grid_points)
        result = coarse_grain(self.field(values), CoarseGrainSpec(self.spacing, "cell"))
        np.testing.assert_allclose(result.values, values, atol=1e-12)

    def test_spike_gives_kernel(self) -> None:
        """Test that a point mass becomes m1 g_l centered on it."""
        values = np.zeros(self.grid_points)
        values[40] = 3.0 / self.spacing
        result = coarse_grain(self.field(values), CoarseGrainSpec(1.0, "gaussian"))
        x = np.arange(self.grid_points) * self.spacing
        offsets = wrapped_offset(x, x[40], self.grid_points * self.spacing)
        expected = np.where(np.abs(offsets) <= 8.0, 3.0 * gaussian(offsets, 1.0), 0.0)
        np.testing.assert_allclose(result.values, expected, atol=1e-10)

    def test_mass_conserved(self) -> None:
        """Test total mass through both kinds and a shifted partition."""
        values = np.random.default_rng(4).random(self.grid_points)
        m = self.field(values)
        for spec in (
            CoarseGrainSpec(0.75, "gaussian"),
            CoarseGrainSpec(2.0, "cell"),
            CoarseGrainSpec(2.0, "cell", origin=3),
        ):
            result = coarse_grain(m, spec)
            assert abs(result.integral() - m.integral()) < 1e-9 * m.integral()

    def test_cell_average(self) -> None:
        """Test the average over each cell."""
        values = np.arange(8, dtype=float)
        result = coarse_grain(MassDensityField(values=values, spacing=1.0), CoarseGrainSpec(4.0))
        np.testing.assert_allclose(result.values, [1.5] * 4 + [5.5] * 4)

    def test_from_wave_function(self) -> None:
        """Test coarse-graining a wave function through its mass density."""
        psi = two_branch(0.5)
        result = coarse_grain(psi, CoarseGrainSpec(4.0), masses=[1.0, 1.0])
        np.testing.assert_allclose(result.values, 0.25, atol=1e-12)
        with pytest.raises(ValueError):
            coarse_grain(psi, CoarseGrainSpec(4.0))

    def test_resolution_errors(self) -> None:
        """Test scales below the spacing or misaligned with the grid."""
        m = self.field(np.ones(self.grid_points))
        with pytest.raises(ResolutionError):
            coarse_grain(m, CoarseGrainSpec(0.1, "gaussian"))
        with pytest.raises(ResolutionError):
            coarse_grain(m, CoarseGrainSpec(0.6, "cell"))
        with pytest.raises(ResolutionError):
            coarse_grain(m, CoarseGrainSpec(0.75, "cell"))
        with pytest.raises(ResolutionError):
            CoarseGrainSpec(-1.0)


class TestSampling:
    """Test cases for ideal position measurements."""

    def setup_method(self) -> None:
        """Set up test fixtures."""
        self.rng = np.random.default_rng(2718)

    def test_spike_always_sampled(self) -> None:
        """Test that a single-cell state always yields that cell."""
        amplitudes = np.zeros(16, dtype=np.complex128)
        amplitudes[5] = 1.0
        psi = GridWaveFunction(amplitudes, spacing=1.0)
        for _ in range(100):
            assert sample_position_config(psi, self.rng).indices.tolist() == [5]

    def test_two_site_frequency(self) -> None:
        """Test the binomial frequency for (|here> + |there>)/sqrt(2)."""
        amplitudes = np.zeros(16, dtype=np.complex128)
        amplitudes[[2, 12]] = 1.0 / np.sqrt(2.0)
        psi = GridWaveFunction(amplitudes, spacing=1.0)
        draws = sample_position_configs(psi, 100_000, self.rng)
        assert abs(np.mean(draws[:, 0] == 2) - 0.5) < 0.005

    def test_product_state_independence(self) -> None:
        """Test that a product state gives uncorrelated positions."""
        phi = np.exp(-((np.arange(16) - 6.0) ** 2) / 8.0) + 0.5 * np.exp(-((np.arange(16) - 11.0) ** 2) / 2.0)
        chi = np.exp(-((np.arange(16) - 9.0) ** 2) / 18.0)
        psi = GridWaveFunction.normalized(np.multiply.outer(phi, chi), spacing=1.0)
        draws = sample_position_configs(psi, 100_000, self.rng)
        correlation = np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]
        assert abs(correlation) < 4.0 / np.sqrt(100_000)


class TestEstimators:
    """Test cases for M~ and its unbiasedness."""

    def setup_method(self) -> None:
        """Set up test fixtures."""
        self.rng = np.random.default_rng(161)

    def test_single_particle_cell_estimator(self) -> None:
        """Test M~2 = m1/l on the particle's cell and 0 elsewhere."""
        amplitudes = np.zeros(16, dtype=np.complex128)
        amplitudes[6] = 1.0
        psi = GridWaveFunction(amplitudes, spacing=1.0)
        sample = sample_position_config(psi, self.rng)
        field = estimator_field(sample, [2.0], CoarseGrainSpec(4.0))
        expected = np.zeros(16)
        expected[4:8] = 0.5
        np.testing.assert_allclose(field.values, expected)

    def test_estimator_conserves_mass(self) -> None:
        """Test that every estimate integrates to the total mass."""
        psi = random_state(self.rng)
        sample = sample_position_config(psi, self.rng)
        for spec in (CoarseGrainSpec(1.0, "gaussian"), CoarseGrainSpec(2.0, "cell")):
            field = estimator_field(sample, [1.0, 2.5], spec)
            assert abs(field.integral() - 3.5) < 1e-9

    def test_unbiased_on_random_states(self) -> None:
        """Test that the mean of M~ matches m~ pointwise within 5 standard errors."""
        masses = [1.0, 2.0]
        for _ in range(10):
            psi = random_state(self.rng)
            for spec in (CoarseGrainSpec(2.0, "cell"), CoarseGrainSpec(1.0, "gaussian")):
                target = coarse_grain(psi, spec, masses).values
                stats = estimator_statistics(psi, masses, spec, 20_000, self.rng)
                assert np.all(np.abs(stats.mean - target) <= 5.0 * stats.stderr + 1e-12)


class TestGhirardiRatio:
    """Test cases for the accuracy ratio of a cell."""

    def setup_method(self) -> None:
        """Set up test fixtures."""
        self.rng = np.random.default_rng(314)

    def test_eigenstate_has_zero_ratio(self) -> None:
        """Test that definite cell occupation gives R = 0."""
        psi = two_branch(1.0)
        assert ghirardi_ratio(psi, Cell(0, 4), [1.0, 1.0]) == 0.0

    def test_two_branch_ratio(self) -> None:
        """Test R = sqrt(q/p) for the two-branch object."""
        for p in (0.1, 0.5, 0.7, 0.99):
            ratio = ghirardi_ratio(two_branch(p), Cell(0, 4), [1.0, 1.0])
            assert abs(ratio - analytic_two_branch_ratio(p)) < 1e-12
        assert abs(analytic_two_branch_ratio(0.5) - 1.0) < 1e-12
        assert abs(analytic_two_branch_ratio(0.99) - 0.1005) < 1e-4

    def test_ratio_matches_monte_carlo(self) -> None:
        """Test that R equals the sampled std/mean of M~2 on the cell."""
        psi = two_branch(0.6)
        spec = CoarseGrainSpec(4.0)
        stats = estimator_statistics(psi, [1.0, 1.0], spec, 100_000, self.rng)
        sampled = stats.std[1] / stats.mean[1]
        assert abs(sampled - ghirardi_ratio(psi, Cell(0, 4), [1.0, 1.0])) < 0.015

    def test_ratio_matches_operator_variance(self) -> None:
        """Test R against the variance of the diagonal cell-mass operator."""
        psi = random_state(self.rng, grid_points=8)
        probabilities = psi.cell_probabilities()
        inside = np.zeros(8)
        inside[2:6] = 1.0
        masses = [1.0, 2.0]
        operator = (masses[0] * inside[:, None] + masses[1] * inside[None, :]) / (4 * psi.spacing)
        mean = np.sum(probabilities * operator)
        std = np.sqrt(np.sum(probabilities * (operator - mean) ** 2))
        assert abs(ghirardi_ratio(psi, Cell(2, 4), masses) - std / mean) < 1e-12

    def test_empty_cell(self) -> None:
        """Test that a cell without mass has no ratio."""
        with pytest.raises(UndefinedRatioError):
            ghirardi_ratio(two_branch(1.0), Cell(4, 1), [1.0, 1.0])

    def test_invalid_two_branch_weight(self) -> None:
        """Test that p=0 has no analytic ratio."""
        with pytest.raises(UndefinedRatioError):
            analytic_two_branch_ratio(0.0)


class TestMeasurability:
    """Test cases for the measurability report."""

    def report(self, preset_id: str) -> MeasurabilityReport:
        preset = get_preset_by_id(preset_id)
        assert preset is not None
        config = preset.build()
        return measurability_report(initial_wave_function(config), config, preset.scales)

    def test_product_solid_reaches_threshold(self) -> None:
        """Test that the product solid first passes at the lattice spacing."""
        report = self.report("uniform-solid")
        ratios = [report.max_ratio[ell] for ell in sorted(report.max_ratio)]
        assert all(a >= b for a, b in zip(ratios, ratios[1:]))
        assert report.max_ratio[2.0] > 0.1
        assert 0.01 < report.max_ratio[4.0] < 0.05
        assert report.max_ratio[16.0] < 1e-12
        assert report.smallest_scale == 4.0

    def test_eigenstate_rows_vanish(self) -> None:
        """Test R = 0 on the only occupied cell at every scale."""
        report = self.report("eigenstate")
        assert len(report.rows) == len(report.max_ratio) == 5
        assert all(row.ratio < 1e-12 for row in report.rows)
        assert report.smallest_scale == 1.0

    def test_cutoff_skips_numerically_empty_cells(self) -> None:
        """Test that a cell holding 1e-12 of the mass is left out unless the cutoff is 0."""
        preset = get_preset_by_id("eigenstate")
        assert preset is not None
        config = preset.build()
        amplitudes = np.zeros((8, 8), dtype=np.complex128)
        amplitudes[1, 1] = np.sqrt(1.0 - 1e-12)
        amplitudes[5, 5] = np.sqrt(1e-12)
        psi = GridWaveFunction(amplitudes, spacing=1.0)

        default = measurability_report(psi, config, [4.0])
        assert [row.cell for row in default.rows] == [0]
        assert default.max_ratio[4.0] < 1e-5
        assert default.smallest_scale == 4.0

        unfiltered = measurability_report(
            psi, config.model_copy(update={"cell_mass_cutoff": 0.0}), [4.0]
        )
        assert [row.cell for row in unfiltered.rows] == [0, 1]
        assert abs(unfiltered.max_ratio[4.0] - 1e6) < 1.0
        assert unfiltered.smallest_scale is None

    def test_two_branch_object_stays_large(self) -> None:
        """Test that R stays at or above sqrt(q/p) below the branch separation."""
        report = self.report("two-branch-object")
        floor = analytic_two_branch_ratio(0.9)
        assert all(value >= floor - 1e-6 for value in report.max_ratio.values())
        assert report.smallest_scale is None

    def test_spread_particle_never_passes(self) -> None:
        """Test that a lone spread particle is never measurable to 10%."""
        assert self.report("spread-particle").smallest_scale is None

    def test_resolution_estimate(self) -> None:
        """Test dx = sigma and dt = 1/(N lambda)."""
        preset = get_preset_by_id("two-packet")
        assert preset is not None
        estimate = resolution_estimate(preset.build(), 100.0)
        assert estimate.dx == 1.0
        assert abs(estimate.dt - 1.0 / (100.0 * 0.05)) < 1e-12
