"""
One-shot collapse channel onto a fixed orthonormal basis, the induced pair of
density matrices, and ensembles of wave functions.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from models.errors import (
    DimensionMismatchError,
    EmptyEnsembleError,
    InvalidDimensionError,
    InvalidOperatorError,
    InvalidProbabilityError,
)
from models.quantum import DensityMatrix, StateVector
from services.quantum_core import diag_part, haar_states, validate_basis

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CollapseChannel:
    """Collapse with probability p onto the basis columns."""

    p: float
    basis: np.ndarray

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise InvalidProbabilityError(f"Collapse probability must be in [0, 1], got {self.p}")
        columns = validate_basis(self.basis, np.asarray(self.basis).shape[0])
        columns = columns.copy()
        columns.setflags(write=False)
        object.__setattr__(self, "basis", columns)

    @classmethod
    def standard(cls, n: int, p: float) -> "CollapseChannel":
        if n < 1:
            raise InvalidDimensionError(f"Invalid dimension: {n}")
        return cls(p=p, basis=np.eye(n, dtype=np.complex128))

    @property
    def n(self) -> int:
        return int(self.basis.shape[0])

    def coefficients(self, psi: StateVector) -> np.ndarray:
        """<b_k|psi> for every basis vector."""
        if psi.n != self.n:
            raise DimensionMismatchError(f"State dimension {psi.n} != channel dimension {self.n}")
        return self.basis.conj().T @ psi.amplitudes


@dataclass(frozen=True, eq=False)
class CollapseOutcome:
    """Post-collapse state psi', collapse flag C and branch index k."""

    post_state: StateVector
    collapsed: int
    branch: int | None = None


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Distribution over wave functions: finite weighted list or a sampler."""

    entries: tuple[tuple[float, StateVector], ...] = ()
    sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None
    tag: str = field(default="finite")

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        if not entries and self.sampler is None:
            raise EmptyEnsembleError("Ensemble has no entries and no sampler")
        if entries:
            weights = np.array([weight for weight, _ in entries], dtype=float)
            if np.any(weights < 0.0):
                raise InvalidOperatorError("Ensemble weights must be non-negative")
            if abs(weights.sum() - 1.0) > WEIGHT_TOL:
                raise InvalidOperatorError(f"Ensemble weights sum to {weights.sum()}")
            dimensions = {state.n for _, state in entries}
            if len(dimensions) != 1:
                raise DimensionMismatchError(f"Ensemble mixes dimensions {dimensions}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def uniform(cls, states: Sequence[StateVector], tag: str = "finite") -> "Ensemble":
        if not states:
            raise EmptyEnsembleError("Ensemble has no entries")
        weight = 1.0 / len(states)
        return cls(entries=tuple((weight, state) for state in states), tag=tag)

    @classmethod
    def point(cls, psi: StateVector) -> "Ensemble":
        """delta_psi."""
        return cls(entries=((1.0, psi),), tag="point")

    @classmethod
    def haar(cls, n: int) -> "Ensemble":
        """Uniform distribution over the unit sphere."""
        if n < 1:
            raise InvalidDimensionError(f"Invalid dimension: {n}")
        return cls(sampler=lambda count, rng: haar_states(n, count, rng), tag="haar")

    @property
    def is_finite(self) -> bool:
        return bool(self.entries)


class EnsembleDensity(NamedTuple):
    """rho_mu together with the number of samples it was averaged from."""

    rho: DensityMatrix
    samples: int | None


def apply_collapse(
    channel: CollapseChannel, psi: StateVector, rng: np.random.Generator
) -> CollapseOutcome:
    """
    Apply the one-shot collapse channel.

    With probability 1-p the state is returned unchanged (C=0). Otherwise branch
    k is chosen with probability |<b_k|psi>|^2 and the state becomes
    (<b_k|psi>/|<b_k|psi>|) b_k (C=1).
    """
    coefficients = channel.coefficients(psi)
    if rng.random() >= channel.p:
        return CollapseOutcome(post_state=psi, collapsed=0)

    weights = np.abs(coefficients) ** 2
    branch = _draw_branch(weights, rng.random())
    phase = coefficients[branch] / abs(coefficients[branch])
    post_state = StateVector.from_amplitudes(phase * channel.basis[:, branch])
    return CollapseOutcome(post_state=post_state, collapsed=1, branch=branch)


def _draw_branch(weights: np.ndarray, u: float) -> int:
    cumulative = np.cumsum(weights) / weights.sum()
    branch = int(np.searchsorted(cumulative, u, side="right"))
    # zero-weight branches never selected, also at the upper end
    support = np.flatnonzero(weights > 0.0)
    return int(min(max(branch, support[0]), support[-1]))


def sample_collapse_batch(
    channel: CollapseChannel, psi: StateVector, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized apply_collapse.

    Returns:
        Collapse flags C (0/1) and branch indices (-1 where C=0)
    """
    weights = np.abs(channel.coefficients(psi)) ** 2
    collapsed = (rng.random(count) < channel.p).astype(np.int8)
    cumulative = np.cumsum(weights) / weights.sum()
    branches = np.searchsorted(cumulative, rng.random(count), side="right")
    support = np.flatnonzero(weights > 0.0)
    branches = np.clip(branches, support[0], support[-1])
    branches = np.where(collapsed == 1, branches, -1)
    return collapsed, branches


def rho_pair(
    psi: StateVector, basis: np.ndarray | None = None
) -> tuple[DensityMatrix, DensityMatrix]:
    """(rho1, rho2) = (diag |psi><psi|, |psi><psi|)."""
    projector = psi.projector()
    rho1 = DensityMatrix(diag_part(projector, basis))
    rho2 = DensityMatrix.from_matrix(projector)
    return rho1, rho2


def post_collapse_density(channel: CollapseChannel, psi: StateVector) -> DensityMatrix:
    """Exact ensemble average p*rho1 + (1-p)*rho2 of |psi'><psi'|."""
    if psi.n != channel.n:
        raise DimensionMismatchError(f"State dimension {psi.n} != channel dimension {channel.n}")
    rho1, rho2 = rho_pair(psi, channel.basis)
    return DensityMatrix.from_matrix(channel.p * rho1.matrix + (1.0 - channel.p) * rho2.matrix)


def ensemble_density(
    mu: Ensemble,
    samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> EnsembleDensity:
    """
    rho_mu = E_mu |psi><psi|.

    Finite ensembles are summed exactly; sampler ensembles are averaged over
    ``samples`` draws.
    """
    if mu.is_finite:
        matrix = sum(weight * state.projector() for weight, state in mu.entries)
        return EnsembleDensity(DensityMatrix.from_matrix(matrix), None)

    if mu.sampler is None:
        raise EmptyEnsembleError("Ensemble has no entries and no sampler")
    if samples is None or samples < 1:
        raise ValueError("Sampler ensembles need a positive sample count")
    if rng is None:
        rng = np.random.default_rng()

    states = mu.sampler(samples, rng)
    matrix = np.einsum("si,sj->ij", states, states.conj()) / samples
    logger.info(f"Averaged {mu.tag} ensemble density over {samples} samples")
    return EnsembleDensity(DensityMatrix.from_matrix(matrix), samples)


def fourier_basis(n: int) -> np.ndarray:
    """Columns of the discrete Fourier basis, omega^{jk}/sqrt(n)."""
    indices = np.arange(n)
    return np.exp(2j * np.pi * np.outer(indices, indices) / n) / np.sqrt(n)


def twin_ensembles(n: int) -> tuple[Ensemble, Ensemble]:
    """
    Two distinct ensembles with the same density matrix I/n.

    mu1 is uniform over the standard basis, mu2 uniform over the Fourier basis.
    """
    if n < 2:
        raise InvalidDimensionError(f"Twin ensembles need n >= 2, got {n}")
    standard = [StateVector.basis_vector(n, k) for k in range(n)]
    fourier = fourier_basis(n)
    rotated = [StateVector(fourier[:, k]) for k in range(n)]
    return Ensemble.uniform(standard, tag="standard"), Ensemble.uniform(rotated, tag="fourier")
