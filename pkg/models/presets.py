"""
Built-in GRW demo configurations.

All values are in natural units (hbar = 1, unit masses); boxes are periodic.
"""

from dataclasses import dataclass, field
from typing import Any

from models.schemas import GrwConfig


@dataclass
class DemoPreset:
    """Demo configuration for grw-run and massdensity."""

    id: str
    name: str
    description: str
    settings: dict[str, Any]
    t_end: float = 10.0
    scales: list[float] = field(default_factory=list)

    def build(self, seed: int | None = None) -> GrwConfig:
        """Validated GrwConfig, optionally with a different seed."""
        config = GrwConfig.model_validate(self.settings)
        return config if seed is None else config.model_copy(update={"seed": seed})


def _packet(center: float, width: float) -> dict[str, float]:
    return {"center": center, "width": width}


def _branch(centers: list[float], width: float, weight: float = 1.0) -> dict[str, Any]:
    return {"weight": weight, "particles": [[_packet(c, width)] for c in centers]}


PRESETS: dict[str, DemoPreset] = {
    "two-packet": DemoPreset(
        id="two-packet",
        name="Two packets",
        description="One particle in an equal superposition of two distant packets",
        settings={
            "n_particles": 1,
            "grid_points": 128,
            "box_length": 40.0,
            "masses": [1.0],
            "lambda_rate": 0.05,
            "sigma": 1.0,
            "seed": 7,
            "snapshot_interval": 1.0,
            "initial_state": {"branches": [_branch([10.0], 1.0), _branch([30.0], 1.0)]},
        },
        t_end=20.0,
        scales=[1.25, 2.5, 5.0, 10.0],
    ),
    "two-branch-object": DemoPreset(
        id="two-branch-object",
        name="Two-branch object",
        description="Three-particle object wholly left with weight 0.9 or wholly right with 0.1",
        settings={
            "n_particles": 3,
            "grid_points": 32,
            "box_length": 32.0,
            "masses": [1.0, 1.0, 1.0],
            "lambda_rate": 0.01,
            "sigma": 1.0,
            "seed": 11,
            "snapshot_interval": 1.0,
            "initial_state": {
                "branches": [
                    _branch([8.0, 8.0, 8.0], 0.5, weight=0.9),
                    _branch([24.0, 24.0, 24.0], 0.5, weight=0.1),
                ]
            },
        },
        t_end=5.0,
        scales=[4.0, 8.0, 16.0],
    ),
    "eigenstate": DemoPreset(
        id="eigenstate",
        name="Localized pair",
        description="Two particles localized on one grid point, an eigenstate of every M(C)",
        settings={
            "n_particles": 2,
            "grid_points": 32,
            "box_length": 32.0,
            "masses": [1.0, 2.0],
            "lambda_rate": 0.01,
            "sigma": 1.0,
            "seed": 3,
            "initial_state": {"branches": [_branch([10.0, 10.0], 0.05)]},
        },
        t_end=2.0,
        scales=[1.0, 2.0, 4.0, 8.0, 16.0],
    ),
    "uniform-solid": DemoPreset(
        id="uniform-solid",
        name="Product solid",
        description="Four well-separated particles on a lattice, one narrow packet each",
        settings={
            "n_particles": 4,
            "grid_points": 16,
            "box_length": 16.0,
            "masses": [1.0, 1.0, 1.0, 1.0],
            "lambda_rate": 0.01,
            "sigma": 1.0,
            "seed": 5,
            "initial_state": {"branches": [_branch([2.0, 6.0, 10.0, 14.0], 0.5)]},
        },
        t_end=2.0,
        scales=[1.0, 2.0, 4.0, 8.0, 16.0],
    ),
    "spread-particle": DemoPreset(
        id="spread-particle",
        name="Spread particle",
        description="Single particle spread wider than every coarse-graining scale",
        settings={
            "n_particles": 1,
            "grid_points": 64,
            "box_length": 64.0,
            "masses": [1.0],
            "lambda_rate": 0.01,
            "sigma": 1.0,
            "seed": 9,
            "initial_state": {"branches": [_branch([32.0], 16.0)]},
        },
        t_end=2.0,
        scales=[2.0, 4.0, 8.0, 16.0],
    ),
}


def get_available_presets() -> list[DemoPreset]:
    """Get list of all demo presets."""
    return list(PRESETS.values())


def get_preset_by_id(preset_id: str) -> DemoPreset | None:
    """Get demo preset by ID."""
    return PRESETS.get(preset_id)


def get_default_preset() -> DemoPreset:
    """Get the default demo preset."""
    return PRESETS["two-packet"]
