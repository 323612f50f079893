"""
Tests for the built-in GRW demo configurations.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from models.presets import get_available_presets, get_default_preset, get_preset_by_id
from models.schemas import GrwConfig
from services.grw_sim import initial_wave_function


class TestPresets:
    """Test cases for demo presets."""

    def test_get_available_presets(self) -> None:
        """Test getting available presets."""
        presets = get_available_presets()

        assert len(presets) == 5
        assert len({preset.id for preset in presets}) == len(presets)
        assert all(preset.name and preset.description for preset in presets)

    def test_get_preset_by_id_valid(self) -> None:
        """Test getting a preset by valid ID."""
        preset = get_preset_by_id("two-branch-object")

        assert preset is not None
        assert preset.id == "two-branch-object"
        assert preset.scales == [4.0, 8.0, 16.0]

    def test_get_preset_by_id_invalid(self) -> None:
        """Test getting a preset by invalid ID."""
        assert get_preset_by_id("no-such-preset") is None

    def test_default_preset(self) -> None:
        """Test the default preset."""
        assert get_default_preset().id == "two-packet"

    def test_every_preset_builds_a_normalized_state(self) -> None:
        """Test validation and the initial wave function of every preset."""
        for preset in get_available_presets():
            config = preset.build()
            assert isinstance(config, GrwConfig)
            psi = initial_wave_function(config)
            assert psi.n_particles == config.n_particles
            assert abs(psi.norm() - 1.0) < 1e-12

    def test_seed_override(self) -> None:
        """Test that build(seed) changes only the seed."""
        preset = get_default_preset()
        base = preset.build()
        reseeded = preset.build(seed=99)

        assert reseeded.seed == 99
        assert reseeded.model_dump(exclude={"seed"}) == base.model_dump(exclude={"seed"})

    def test_two_branch_weights(self) -> None:
        """Test that the two-branch object puts 0.9 of the probability on the left."""
        preset = get_preset_by_id("two-branch-object")
        assert preset is not None
        config = preset.build()
        psi = initial_wave_function(config)
        left = (psi.marginal(0) * config.spacing)[psi.positions < 16.0].sum()

        np.testing.assert_allclose(left, 0.9, atol=1e-9)
