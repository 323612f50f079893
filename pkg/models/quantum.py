"""
Finite-dimensional quantum value types: state vectors, Hermitian operators,
effects, density matrices and POVMs.

All types are immutable after construction; their arrays are marked read-only
so they can be shared between Monte Carlo workers.
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from models.errors import InvalidDimensionError, InvalidOperatorError

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
SPECTRUM_SLACK = 1e-10
POVM_TOL = 1e-10


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm complex amplitude vector over a finite basis."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if values.size < 1:
            raise InvalidDimensionError("State vector needs dimension n >= 1")
        norm = np.linalg.norm(values)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidOperatorError(f"State vector is not normalized: norm={norm}")
        object.__setattr__(self, "amplitudes", _frozen(values))

    @classmethod
    def from_amplitudes(cls, values: Iterable[complex] | np.ndarray) -> "StateVector":
        """Build a state from unnormalized amplitudes."""
        vector = np.array(values, dtype=np.complex128).reshape(-1)
        if vector.size < 1:
            raise InvalidDimensionError("State vector needs dimension n >= 1")
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            raise InvalidOperatorError("Cannot normalize the zero vector")
        return cls(vector / norm)

    @classmethod
    def basis_vector(cls, n: int, k: int) -> "StateVector":
        """Standard basis vector b_k (0-based index)."""
        if n < 1:
            raise InvalidDimensionError(f"Invalid dimension: {n}")
        vector = np.zeros(n, dtype=np.complex128)
        vector[k] = 1.0
        return cls(vector)

    @classmethod
    def uniform(cls, n: int) -> "StateVector":
        """Equal-weight superposition sum_k n^{-1/2} b_k."""
        if n < 1:
            raise InvalidDimensionError(f"Invalid dimension: {n}")
        return cls(np.full(n, 1.0 / np.sqrt(n), dtype=np.complex128))

    @property
    def n(self) -> int:
        return int(self.amplitudes.size)

    def projector(self) -> np.ndarray:
        """|psi><psi| as a dense matrix."""
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Self-adjoint n x n complex matrix."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.entries, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidOperatorError(f"Operator must be square, got {matrix.shape}")
        if matrix.shape[0] < 1:
            raise InvalidDimensionError("Operator needs dimension n >= 1")
        scale = max(1.0, float(np.max(np.abs(matrix))))
        asymmetry = float(np.max(np.abs(matrix - matrix.conj().T)))
        if asymmetry > HERMITIAN_TOL * scale:
            raise InvalidOperatorError(f"Operator is not Hermitian: deviation {asymmetry}")
        object.__setattr__(self, "entries", _frozen(0.5 * (matrix + matrix.conj().T)))

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


@dataclass(frozen=True, eq=False)
class Effect:
    """POVM element: Hermitian operator with 0 <= E <= I (clamped)."""

    operator: HermitianOperator

    def __post_init__(self) -> None:
        eigenvalues, vectors = np.linalg.eigh(self.operator.entries)
        if eigenvalues[0] < -SPECTRUM_SLACK or eigenvalues[-1] > 1.0 + SPECTRUM_SLACK:
            raise InvalidOperatorError(
                f"Effect spectrum [{eigenvalues[0]}, {eigenvalues[-1]}] outside [0, 1]"
            )
        if eigenvalues[0] < 0.0 or eigenvalues[-1] > 1.0:
            clamped = np.clip(eigenvalues, 0.0, 1.0)
            matrix = (vectors * clamped) @ vectors.conj().T
            object.__setattr__(self, "operator", HermitianOperator(matrix))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Effect":
        return cls(HermitianOperator(matrix))

    @classmethod
    def identity(cls, n: int) -> "Effect":
        return cls.from_matrix(np.eye(n, dtype=np.complex128))

    @classmethod
    def zero(cls, n: int) -> "Effect":
        return cls.from_matrix(np.zeros((n, n), dtype=np.complex128))

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.entries

    @property
    def n(self) -> int:
        return self.operator.n

    def complement(self) -> "Effect":
        """I - E."""
        return Effect.from_matrix(np.eye(self.n) - self.matrix)

    def is_projective(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.matrix @ self.matrix - self.matrix)) <= tol)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive unit-trace Hermitian operator."""

    operator: HermitianOperator

    def __post_init__(self) -> None:
        eigenvalues = self.operator.eigenvalues()
        if eigenvalues[0] < -SPECTRUM_SLACK:
            raise InvalidOperatorError(
                f"Density matrix has negative eigenvalue {eigenvalues[0]}"
            )
        trace = float(np.trace(self.operator.entries).real)
        if abs(trace - 1.0) > SPECTRUM_SLACK:
            raise InvalidOperatorError(f"Density matrix trace is {trace}, expected 1")

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "DensityMatrix":
        return cls(HermitianOperator(matrix))

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        return cls.from_matrix(psi.projector())

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        if n < 1:
            raise InvalidDimensionError(f"Invalid dimension: {n}")
        return cls.from_matrix(np.eye(n, dtype=np.complex128) / n)

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.entries

    @property
    def n(self) -> int:
        return self.operator.n


@dataclass(frozen=True, eq=False)
class Povm:
    """Labelled family of effects summing to the identity."""

    effects: tuple[tuple[str, Effect], ...]

    def __post_init__(self) -> None:
        effects = tuple(self.effects)
        if not effects:
            raise InvalidOperatorError("POVM needs at least one effect")
        labels = [label for label, _ in effects]
        if len(set(labels)) != len(labels):
            raise InvalidOperatorError(f"POVM labels are not unique: {labels}")
        n = effects[0][1].n
        if any(effect.n != n for _, effect in effects):
            raise InvalidOperatorError("POVM effects have different dimensions")
        total = sum(effect.matrix for _, effect in effects)
        deviation = float(np.max(np.abs(total - np.eye(n))))
        if deviation > POVM_TOL:
            raise InvalidOperatorError(f"POVM effects do not sum to I: deviation {deviation}")
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, Effect]]) -> "Povm":
        return cls(tuple(pairs))

    @property
    def n(self) -> int:
        return self.effects[0][1].n

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.effects]

    def effect(self, label: str) -> Effect:
        for candidate, effect in self.effects:
            if candidate == label:
                return effect
        raise KeyError(label)
