"""
Pydantic models for configuration files and result records.

Physical quantities use natural units with hbar = 1; every such field carries
its unit in the JSON schema under ``"unit"``.
"""

from typing import Literal

from pydantic import BaseModel, Field, computed_field, field_validator, model_validator

# Reference GRW constants in SI units. The flash-count estimate for macroscopic
# bodies uses the larger rate.
GRW_LAMBDA_SI = 1e-16  # 1/s
GRW_LAMBDA_SI_FLASH_ESTIMATE = 1e-15  # 1/s
GRW_SIGMA_SI = 1e-7  # m

DEFAULT_MAX_GRID_POINTS = 256**3


def _unit(unit: str) -> dict[str, str]:
    return {"unit": unit}


class PacketConfig(BaseModel):
    """Gaussian wave packet for one particle."""

    center: float = Field(..., description="Packet center", json_schema_extra=_unit("length"))
    width: float = Field(
        ..., gt=0, description="Position standard deviation", json_schema_extra=_unit("length")
    )
    momentum: float = Field(
        0.0, description="Mean momentum", json_schema_extra=_unit("1/length")
    )
    amplitude: float = Field(1.0, gt=0, description="Relative amplitude (dimensionless)")
    phase: float = Field(0.0, description="Relative phase", json_schema_extra=_unit("rad"))


class BranchConfig(BaseModel):
    """One term of the initial superposition: a product over particles."""

    weight: float = Field(
        1.0, gt=0, description="Relative probability weight |c_b|^2 (dimensionless)"
    )
    phase: float = Field(0.0, description="Phase of c_b", json_schema_extra=_unit("rad"))
    particles: list[list[PacketConfig]] = Field(
        ..., min_length=1, description="Per particle, packets summed into its wave function"
    )

    @field_validator("particles")
    @classmethod
    def particles_have_packets(cls, value: list[list[PacketConfig]]) -> list[list[PacketConfig]]:
        if any(len(packets) == 0 for packets in value):
            raise ValueError("every particle needs at least one packet")
        return value


class InitialStateConfig(BaseModel):
    """Initial wave function as a normalized superposition of product branches."""

    branches: list[BranchConfig] = Field(..., min_length=1)


class PotentialConfig(BaseModel):
    """External potential V(q) = sum_i V_1(q_i)."""

    kind: Literal["zero", "harmonic"] = "zero"
    omega: float = Field(0.0, ge=0, description="Trap frequency", json_schema_extra=_unit("1/time"))
    center: float = Field(0.0, description="Trap center", json_schema_extra=_unit("length"))


class GrwConfig(BaseModel):
    """
    GRW simulation configuration.

    Natural units with hbar = 1. The GRW reference values are
    lambda = 1e-16 1/s (1e-15 1/s in flash-count estimates) and sigma = 1e-7 m.
    """

    n_particles: int = Field(1, ge=1, description="Number of particles N")
    grid_points: int = Field(128, ge=2, description="Grid points L per particle coordinate")
    box_length: float = Field(
        ..., gt=0, description="Periodic box length", json_schema_extra=_unit("length")
    )
    masses: list[float] = Field(
        ..., min_length=1, description="Particle masses m_i", json_schema_extra=_unit("mass")
    )
    lambda_rate: float = Field(
        GRW_LAMBDA_SI,
        ge=0,
        description="Collapse rate per particle",
        json_schema_extra=_unit("1/time"),
    )
    sigma: float = Field(
        ..., gt=0, description="Collapse width", json_schema_extra=_unit("length")
    )
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    initial_state: InitialStateConfig
    seed: int = Field(0, ge=0, description="Random seed")
    snapshot_interval: float | None = Field(
        None, gt=0, description="Snapshot cadence", json_schema_extra=_unit("time")
    )
    max_grid_points: int = Field(
        DEFAULT_MAX_GRID_POINTS, ge=2, description="Memory budget in configuration-grid points"
    )
    cell_mass_cutoff: float = Field(
        1e-6,
        ge=0,
        lt=1,
        description="Cells whose expected mass is below this fraction of the heaviest cell are "
        "left out of measurability reports",
    )

    @field_validator("masses")
    @classmethod
    def masses_positive(cls, value: list[float]) -> list[float]:
        if any(mass <= 0 for mass in value):
            raise ValueError("masses must be positive")
        return value

    @model_validator(mode="after")
    def consistent_shapes(self) -> "GrwConfig":
        if len(self.masses) != self.n_particles:
            raise ValueError(
                f"masses has {len(self.masses)} entries, expected n_particles={self.n_particles}"
            )
        for index, branch in enumerate(self.initial_state.branches):
            if len(branch.particles) != self.n_particles:
                raise ValueError(
                    f"branch {index} describes {len(branch.particles)} particles, "
                    f"expected {self.n_particles}"
                )
        if self.grid_points**self.n_particles > self.max_grid_points:
            raise ValueError(
                f"grid of {self.grid_points}^{self.n_particles} points exceeds "
                f"max_grid_points={self.max_grid_points}"
            )
        return self

    @property
    def spacing(self) -> float:
        return self.box_length / self.grid_points


class FlashEvent(BaseModel):
    """One collapse: position X, time T and 1-based particle label I."""

    position: float = Field(..., json_schema_extra=_unit("length"))
    time: float = Field(..., ge=0, json_schema_extra=_unit("time"))
    particle_label: int = Field(..., ge=1)
    run: int = Field(0, ge=0)

    def to_record(self) -> dict[str, float | int]:
        return {"run": self.run, "T": self.time, "X": self.position, "I": self.particle_label}


class ExperimentConfig(BaseModel):
    """Parameters shared by the experiment commands."""

    seed: int = Field(12345, ge=0)
    trials: int = Field(100_000, ge=1)
    workers: int = Field(1, ge=1)
    n: int = Field(2, ge=1)
    p_grid: list[float] = Field(default_factory=lambda: [round(0.1 * k, 1) for k in range(11)])
    analytic_tol: float = Field(1e-12, ge=0)
    bound_tol: float = Field(1e-10, ge=0)
    spectral_tol: float = Field(1e-9, ge=0)
    mass_tol: float = Field(1e-9, ge=0)
    scan_family_size: int = Field(100, ge=1)
    scan_samples: int = Field(10_000, ge=1000)
    mc_sigmas: float = Field(4.0, ge=0)
    chi2_significance: float = Field(1e-3, gt=0, lt=1)
    tolerance_override: float | None = Field(None, ge=0)

    @field_validator("p_grid")
    @classmethod
    def probabilities_in_range(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("p_grid must not be empty")
        if any(not 0.0 <= p <= 1.0 for p in value):
            raise ValueError("p_grid values must lie in [0, 1]")
        return value

    def tolerance(self, default: float) -> float:
        return default if self.tolerance_override is None else self.tolerance_override


class ReliabilityReport(BaseModel):
    """Analytic reliability next to its Monte Carlo estimate."""

    p: float = Field(..., ge=0, le=1)
    analytic: float
    monte_carlo: float
    stderr: float = Field(..., ge=0)
    bound: float
    trials: int = Field(..., ge=1)
    sigmas: float = 4.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def within_error(self) -> bool:
        slack = max(self.sigmas * self.stderr, 1e-12)
        return abs(self.analytic - self.monte_carlo) <= slack

    @computed_field  # type: ignore[prop-decorator]
    @property
    def within_bound(self) -> bool:
        return self.analytic <= self.bound + 1e-10


class VerificationRecord(BaseModel):
    """One checked statement: analytic value, measured value and tolerance."""

    proposition: str = Field(..., description="Proposition id, e.g. P1 or RCx")
    description: str = ""
    analytic: float
    measured: float
    tolerance: float = Field(..., ge=0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def deviation(self) -> float:
        return abs(self.analytic - self.measured)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


class Figure1Row(BaseModel):
    """Reliability curves of the two-packet example at one p."""

    p: float
    blind: float
    e1_analytic: float
    e1_mc: float
    e1_stderr: float
    optimal_analytic: float
    optimal_mc: float
    optimal_stderr: float


class ScanRow(BaseModel):
    """Success-set measure of one detector."""

    effect_id: str
    estimate: float
    stderr: float
    exceeds_half: bool
    conjecture_violation: bool


class MeasurabilityRow(BaseModel):
    """Ghirardi ratio of one cell at one coarse-graining scale."""

    ell: float
    cell: int
    ratio: float
    analytic_two_branch: float | None = None


class MatrixFile(BaseModel):
    """Square complex matrix stored as real and imaginary parts."""

    real: list[list[float]]
    imag: list[list[float]] | None = None

    @model_validator(mode="after")
    def square_and_matching(self) -> "MatrixFile":
        n = len(self.real)
        if n == 0 or any(len(row) != n for row in self.real):
            raise ValueError("real part must be a non-empty square matrix")
        if self.imag is not None and (
            len(self.imag) != n or any(len(row) != n for row in self.imag)
        ):
            raise ValueError("imag part must match the shape of the real part")
        return self


class HelstromRow(BaseModel):
    """Optimal discrimination of two density matrices at one prior."""

    p: float
    reliability: float
    blind: float
    positive_rank: int
    perfectly_distinguishable: bool
