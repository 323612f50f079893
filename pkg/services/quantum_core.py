"""
Dense linear algebra substrate: Haar sampling, Born probabilities, outcome
sampling, diagonal parts and spectral projectors.
"""

import logging
from typing import NamedTuple

import numpy as np
import scipy.linalg

from models.errors import (
    DimensionMismatchError,
    InternalConsistencyError,
    InvalidDimensionError,
    NonOrthonormalBasisError,
    NumericalError,
)
from models.quantum import DensityMatrix, Effect, HermitianOperator, Povm, StateVector

logger = logging.getLogger(__name__)

BASIS_TOL = 1e-10
OUTCOME_SUM_TOL = 1e-8

State = StateVector | DensityMatrix


class SpectralSplit(NamedTuple):
    """Projectors onto the positive and null eigenspaces of an operator."""

    p_plus: Effect
    p_zero: Effect
    positive_eigenvalue_sum: float


def _matrix(a: HermitianOperator | Effect | DensityMatrix | np.ndarray) -> np.ndarray:
    if isinstance(a, HermitianOperator):
        return a.entries
    if isinstance(a, Effect | DensityMatrix):
        return a.matrix
    return np.asarray(a, dtype=np.complex128)


def haar_state(n: int, rng: np.random.Generator) -> StateVector:
    """Haar-uniform unit vector: n standard complex Gaussians, normalized."""
    if n < 1:
        raise InvalidDimensionError(f"Invalid dimension: {n}")
    return StateVector.from_amplitudes(haar_states(n, 1, rng)[0])


def haar_states(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Array of shape (count, n) whose rows are independent Haar states."""
    if n < 1:
        raise InvalidDimensionError(f"Invalid dimension: {n}")
    z = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    if n < 1:
        raise InvalidDimensionError(f"Invalid dimension: {n}")
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_effect(n: int, rng: np.random.Generator, rank: int | None = None) -> Effect:
    """
    Random effect U diag(u) U† with Haar U and uniform u_k in [0, 1].

    Args:
        n: Dimension
        rng: Random stream
        rank: If given, only ``rank`` eigenvalues are nonzero

    Returns:
        Effect drawn from the interior of the effect set
    """
    unitary = haar_unitary(n, rng)
    weights = rng.uniform(0.0, 1.0, size=n)
    if rank is not None:
        weights[rank:] = 0.0
    return Effect.from_matrix((unitary * weights) @ unitary.conj().T)


def random_povm(n: int, outcomes: int, rng: np.random.Generator) -> Povm:
    """Random POVM with ``outcomes`` elements, normalized by S^{-1/2}."""
    positives = []
    for _ in range(outcomes):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        positives.append(g @ g.conj().T)
    eigenvalues, vectors = eigh(sum(positives))
    root = (vectors / np.sqrt(eigenvalues)) @ vectors.conj().T
    effects = [
        (f"z{index}", Effect.from_matrix(root @ positive @ root.conj().T))
        for index, positive in enumerate(positives)
    ]
    return Povm.from_pairs(effects)


def projector(psi: StateVector) -> Effect:
    """|psi><psi| as an effect."""
    return Effect.from_matrix(psi.projector())


def standard_basis(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def validate_basis(basis: np.ndarray | None, n: int) -> np.ndarray:
    """Return basis columns, defaulting to the standard basis."""
    if basis is None:
        return standard_basis(n)
    columns = np.asarray(basis, dtype=np.complex128)
    if columns.shape != (n, n):
        raise DimensionMismatchError(f"Basis shape {columns.shape} does not match n={n}")
    deviation = float(np.max(np.abs(columns.conj().T @ columns - np.eye(n))))
    if deviation > BASIS_TOL:
        raise NonOrthonormalBasisError(f"Basis is not orthonormal: deviation {deviation}")
    return columns


def born_probability(state: State, effect: Effect) -> float:
    """<psi|E|psi> or tr(rho E), clamped to [0, 1]."""
    if state.n != effect.n:
        raise DimensionMismatchError(f"State dimension {state.n} != effect dimension {effect.n}")
    if isinstance(state, StateVector):
        psi = state.amplitudes
        value = np.vdot(psi, effect.matrix @ psi).real
    else:
        value = np.sum(state.matrix * effect.matrix.T).real
    return float(min(1.0, max(0.0, value)))


def outcome_probabilities(state: State, povm: Povm) -> np.ndarray:
    """Born probabilities in the POVM's label order, checked to sum to 1."""
    probabilities = np.array([born_probability(state, effect) for _, effect in povm.effects])
    total = float(probabilities.sum())
    if abs(total - 1.0) > OUTCOME_SUM_TOL:
        raise InternalConsistencyError(f"Outcome probabilities sum to {total}")
    return probabilities


def sample_outcome(state: State, povm: Povm, rng: np.random.Generator) -> str:
    """Draw one POVM label by the cumulative method over the label order."""
    index = sample_outcomes(state, povm, 1, rng)[0]
    return povm.labels[index]


def sample_outcomes(
    state: State, povm: Povm, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``count`` label indices by cumulative inversion."""
    cumulative = np.cumsum(outcome_probabilities(state, povm))
    indices = np.searchsorted(cumulative, rng.random(count), side="right")
    return np.minimum(indices, len(povm.effects) - 1)


def diag_part(
    a: HermitianOperator | Effect | DensityMatrix | np.ndarray,
    basis: np.ndarray | None = None,
) -> HermitianOperator:
    """Diagonal part sum_k |b_k><b_k|A|b_k><b_k| in the given basis."""
    matrix = _matrix(a)
    columns = validate_basis(basis, matrix.shape[0])
    coefficients = np.einsum("ik,ij,jk->k", columns.conj(), matrix, columns)
    return HermitianOperator((columns * coefficients.real) @ columns.conj().T)


def default_zero_tol(eigenvalues: np.ndarray) -> float:
    """Eigenvalue zero threshold 1e-10 * max(1, ||A||_op)."""
    return 1e-10 * max(1.0, float(np.max(np.abs(eigenvalues))))


def eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        return scipy.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"Eigen-decomposition failed: {e}")
        raise NumericalError(f"Eigen-decomposition failed: {e}") from e


def positive_part_projector(
    a: HermitianOperator | np.ndarray, tol: float | None = None
) -> SpectralSplit:
    """
    Split the spectrum of a Hermitian operator at zero.

    Args:
        a: Hermitian operator
        tol: Eigenvalues with |lambda| <= tol count as zero

    Returns:
        P_plus, P_zero and the sum of eigenvalues above tol
    """
    matrix = _matrix(a)
    eigenvalues, vectors = eigh(matrix)
    if tol is None:
        tol = default_zero_tol(eigenvalues)

    positive = eigenvalues > tol
    zero = np.abs(eigenvalues) <= tol

    p_plus = vectors[:, positive] @ vectors[:, positive].conj().T
    p_zero = vectors[:, zero] @ vectors[:, zero].conj().T
    return SpectralSplit(
        p_plus=Effect.from_matrix(p_plus),
        p_zero=Effect.from_matrix(p_zero),
        positive_eigenvalue_sum=float(eigenvalues[positive].sum()),
    )


def optimal_effect_range(
    a: HermitianOperator | np.ndarray, effect: Effect, tol: float = 1e-9
) -> bool:
    """Whether P_plus(A) <= E <= P_plus(A) + P_zero(A), the maximizers of tr(EA)."""
    split = positive_part_projector(a)
    lower = np.linalg.eigvalsh(effect.matrix - split.p_plus.matrix)
    upper = np.linalg.eigvalsh(split.p_plus.matrix + split.p_zero.matrix - effect.matrix)
    return bool(lower[0] >= -tol and upper[0] >= -tol)
