"""
Grid value types for the GRW simulator: wave functions on the N-fold product
grid and 1-D mass-density fields.
"""

from dataclasses import dataclass

import numpy as np

from models.errors import InvalidOperatorError

GRID_NORM_TOL = 1e-10
MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GridWaveFunction:
    """
    psi(q_1, ..., q_N) sampled on a periodic grid x_j = j * spacing.

    The discrete L2 norm sum |psi|^2 spacing^N equals 1.
    """

    amplitudes: np.ndarray
    spacing: float

    def __post_init__(self) -> None:
        values = np.array(self.amplitudes, dtype=np.complex128)
        if values.ndim < 1 or len(set(values.shape)) != 1:
            raise InvalidOperatorError(f"Grid wave function needs a cubic grid, got {values.shape}")
        norm = float(np.sum(np.abs(values) ** 2) * self.spacing**values.ndim)
        if abs(norm - 1.0) > GRID_NORM_TOL:
            raise InvalidOperatorError(f"Grid wave function norm is {norm}, expected 1")
        values.setflags(write=False)
        object.__setattr__(self, "amplitudes", values)

    @classmethod
    def normalized(cls, values: np.ndarray, spacing: float) -> "GridWaveFunction":
        """Normalize arbitrary nonzero amplitudes."""
        values = np.asarray(values, dtype=np.complex128)
        norm = float(np.sqrt(np.sum(np.abs(values) ** 2) * spacing**values.ndim))
        if norm == 0.0:
            raise InvalidOperatorError("Cannot normalize a vanishing wave function")
        return cls(values / norm, spacing)

    @property
    def n_particles(self) -> int:
        return int(self.amplitudes.ndim)

    @property
    def grid_points(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def box_length(self) -> float:
        return self.grid_points * self.spacing

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.grid_points) * self.spacing

    def cell_probabilities(self) -> np.ndarray:
        """|psi(q)|^2 spacing^N for every configuration cell (sums to 1)."""
        return np.abs(self.amplitudes) ** 2 * self.spacing**self.n_particles

    def marginal(self, particle: int) -> np.ndarray:
        """Position density of one particle (0-based), integrating to 1."""
        others = tuple(axis for axis in range(self.n_particles) if axis != particle)
        probabilities = self.cell_probabilities()
        return (probabilities.sum(axis=others) if others else probabilities) / self.spacing

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.spacing**self.n_particles))


@dataclass(frozen=True, eq=False)
class MassDensityField:
    """m(x) on the 1-D spatial grid at one time."""

    values: np.ndarray
    spacing: float
    time: float = 0.0
    total_mass: float | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if np.any(values < -1e-12):
            raise InvalidOperatorError("Mass density must be non-negative")
        if self.total_mass is not None:
            integral = float(values.sum() * self.spacing)
            if abs(integral - self.total_mass) > MASS_TOL * max(1.0, abs(self.total_mass)):
                raise InvalidOperatorError(
                    f"Mass density integrates to {integral}, expected {self.total_mass}"
                )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.values.size) * self.spacing

    def integral(self) -> float:
        return float(self.values.sum() * self.spacing)
