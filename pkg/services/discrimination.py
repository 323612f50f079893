"""
Retrodicting whether a collapse occurred: reliability functionals, blind
guessing, Helstrom discrimination, the closed-form optimal collapse detector,
Bayesian posteriors, Haar averages, success sets and repeated measurements.
"""

import logging
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from models.errors import (
    ConditioningError,
    DegeneratePriorError,
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidProbabilityError,
    NumericalError,
    OutOfBranchError,
    UnsupportedInstrumentError,
)
from models.quantum import DensityMatrix, Effect, HermitianOperator, Povm, StateVector
from models.schemas import ReliabilityReport
from services.collapse_model import (
    CollapseChannel,
    Ensemble,
    ensemble_density,
    rho_pair,
    sample_collapse_batch,
)
from services.montecarlo import Estimate, estimate_mean
from services.quantum_core import (
    born_probability,
    diag_part,
    haar_state,
    haar_states,
    outcome_probabilities,
    positive_part_projector,
    projector,
    random_effect,
    validate_basis,
)

logger = logging.getLogger(__name__)

YES = "yes"
NO = "no"
BRANCH_POINT_TOL = 1e-12
SUCCESS_MARGIN = 1e-12
CONJECTURED_SUCCESS_LIMIT = 1.0 - 1.0 / np.e


@dataclass(frozen=True, eq=False)
class YesNoExperiment:
    """Experiment answering "yes, a collapse occurred" with effect E_yes."""

    effect_yes: Effect

    @property
    def effect_no(self) -> Effect:
        return self.effect_yes.complement()

    @property
    def n(self) -> int:
        return self.effect_yes.n

    def as_povm(self) -> Povm:
        return Povm.from_pairs([(YES, self.effect_yes), (NO, self.effect_no)])


@dataclass(frozen=True, eq=False)
class OptimalDetector:
    """Most reliable detector for a known psi and prior p."""

    effect: Effect
    z_value: float | None
    reliability: float


@dataclass(frozen=True)
class SuccessSetRow:
    effect_id: str
    estimate: float
    stderr: float

    @property
    def conjecture_violation(self) -> bool:
        return self.estimate > CONJECTURED_SUCCESS_LIMIT + 4.0 * self.stderr


@dataclass(frozen=True)
class SuccessSetScan:
    rows: list[SuccessSetRow]

    @property
    def maximum(self) -> SuccessSetRow:
        return max(self.rows, key=lambda row: row.estimate)

    @property
    def violations(self) -> list[SuccessSetRow]:
        return [row for row in self.rows if row.conjecture_violation]


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise InvalidProbabilityError(f"Collapse probability must be in [0, 1], got {p}")


def _check_dims(*items: StateVector | DensityMatrix | Effect) -> int:
    dimensions = {item.n for item in items}
    if len(dimensions) != 1:
        raise DimensionMismatchError(f"Dimension mismatch: {sorted(dimensions)}")
    return dimensions.pop()


def e1_detector(psi: StateVector) -> YesNoExperiment:
    """Quantum measurement of I - |psi><psi|."""
    return YesNoExperiment(projector(psi).complement())


def reliability_operator(effect: Effect, basis: np.ndarray | None, p: float) -> np.ndarray:
    """A = p diag E + (1-p)(I - E)."""
    _check_p(p)
    n = effect.n
    return p * diag_part(effect, basis).entries + (1.0 - p) * (np.eye(n) - effect.matrix)


def reliability_pure(
    psi: StateVector, exp: YesNoExperiment, basis: np.ndarray | None, p: float
) -> float:
    """R_psi(E) = <psi|A|psi>."""
    _check_dims(psi, exp.effect_yes)
    a = reliability_operator(exp.effect_yes, basis, p)
    return float(np.vdot(psi.amplitudes, a @ psi.amplitudes).real)


def reliability_decomposition(
    psi: StateVector, exp: YesNoExperiment, basis: np.ndarray | None
) -> tuple[float, float]:
    """(P(yes | C=1), P(no | C=0)) for the collapse channel."""
    _check_dims(psi, exp.effect_yes)
    yes_given_collapse = float(
        np.vdot(psi.amplitudes, diag_part(exp.effect_yes, basis).entries @ psi.amplitudes).real
    )
    no_given_none = born_probability(psi, exp.effect_no)
    return yes_given_collapse, no_given_none


def reliability_mixed(
    rho: DensityMatrix, exp: YesNoExperiment, basis: np.ndarray | None, p: float
) -> float:
    """R_rho(E) = tr(rho A)."""
    _check_dims(rho, exp.effect_yes)
    a = reliability_operator(exp.effect_yes, basis, p)
    return float(np.sum(rho.matrix * a.T).real)


def reliability_ensemble(
    mu: Ensemble,
    exp: YesNoExperiment,
    basis: np.ndarray | None,
    p: float,
    samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """R_mu(E); depends on mu only through rho_mu."""
    return reliability_mixed(ensemble_density(mu, samples, rng).rho, exp, basis, p)


def reliability_two_hypothesis(
    rho1: DensityMatrix, rho2: DensityMatrix, effect: Effect, p: float
) -> float:
    """p tr(E rho1) + (1-p) tr((I-E) rho2), with rho1 the collapsed hypothesis."""
    _check_p(p)
    _check_dims(rho1, rho2, effect)
    yes_given_first = float(np.sum(rho1.matrix * effect.matrix.T).real)
    yes_given_second = float(np.sum(rho2.matrix * effect.matrix.T).real)
    return p * yes_given_first + (1.0 - p) * (1.0 - yes_given_second)


def blind_guess(p: float, n: int = 1) -> tuple[Effect, float]:
    """Answer the a-priori likelier alternative; ties go to "no"."""
    _check_p(p)
    if p <= 0.5:
        return Effect.zero(n), 1.0 - p
    return Effect.identity(n), p


def helstrom(
    rho1: DensityMatrix, rho2: DensityMatrix, p: float, tol: float | None = None
) -> tuple[Effect, float]:
    """
    Optimal two-hypothesis discrimination.

    Args:
        rho1: Density matrix under hypothesis 1 (prior p)
        rho2: Density matrix under hypothesis 2 (prior 1-p)
        p: Prior of hypothesis 1
        tol: Zero threshold for the spectrum of p rho1 - (1-p) rho2

    Returns:
        Projector onto the positive part and the maximal reliability
    """
    _check_p(p)
    n = _check_dims(rho1, rho2)
    if p in (0.0, 1.0):
        return blind_guess(p, n)

    a = HermitianOperator(p * rho1.matrix - (1.0 - p) * rho2.matrix)
    split = positive_part_projector(a, tol)
    return split.p_plus, 1.0 - p + split.positive_eigenvalue_sum


def perfectly_distinguishable(
    rho1: DensityMatrix, rho2: DensityMatrix, tol: float = 1e-10
) -> bool:
    """Maximal reliability is 1 exactly when the supports are orthogonal."""
    _check_dims(rho1, rho2)
    return bool(np.max(np.abs(rho1.matrix @ rho2.matrix)) <= tol)


def f_psi(psi: StateVector, z: float, basis: np.ndarray | None = None) -> float:
    """f_psi(z) = sum_k |psi_k|^2 / (z + |psi_k|^2) over nonzero amplitudes."""
    if z < 0:
        raise ValueError(f"f_psi needs z >= 0, got {z}")
    weights = _basis_weights(psi, basis)
    return float(np.sum(weights / (z + weights)))


def _basis_weights(psi: StateVector, basis: np.ndarray | None) -> np.ndarray:
    columns = validate_basis(basis, psi.n)
    weights = np.abs(columns.conj().T @ psi.amplitudes) ** 2
    return weights[weights > 0.0]


def invert_f_psi(
    psi: StateVector, ratio: float, tol: float = 1e-12, basis: np.ndarray | None = None
) -> float:
    """
    Solve f_psi(z) = ratio for z >= 0 by bisection.

    Raises:
        OutOfBranchError: If ratio exceeds f_psi(0), the number of nonzero amplitudes
        NumericalError: If the root is not bracketed to within tol
    """
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    weights = _basis_weights(psi, basis)

    def f(z: float) -> float:
        return float(np.sum(weights / (z + weights)))

    f_zero = float(weights.size)
    if ratio > f_zero:
        raise OutOfBranchError(f"ratio {ratio} exceeds f_psi(0) = {f_zero}")
    if abs(ratio - f_zero) <= tol:
        return 0.0

    low, high = 0.0, 1.0
    while f(high) >= ratio:
        high *= 2.0
    # bisect to float resolution; f is flat for large z
    for _ in range(400):
        mid = 0.5 * (low + high)
        if not low < mid < high:
            break
        if f(mid) > ratio:
            low = mid
        else:
            high = mid
    z = min((low, high), key=lambda candidate: abs(f(candidate) - ratio))
    if abs(f(z) - ratio) > tol:
        raise NumericalError(f"f_psi inversion missed ratio {ratio} by more than {tol}")
    return z


def optimal_collapse_detector(
    psi: StateVector, basis: np.ndarray | None, p: float
) -> OptimalDetector:
    """
    Closed-form most reliable collapse detector.

    For p below the branch point n/(n+1) the detector is I - |psi~><psi~| with
    psi~ proportional to M^{-1} psi, M = z I + diag |psi><psi|, and reliability
    p(1+z). Above it, answering "yes" always is optimal. n counts nonzero
    amplitudes of psi in the basis.
    """
    _check_p(p)
    if p in (0.0, 1.0):
        raise DegeneratePriorError(f"p={p} leaves only blind guessing")

    columns = validate_basis(basis, psi.n)
    coefficients = columns.conj().T @ psi.amplitudes
    n_eff = int(np.count_nonzero(np.abs(coefficients) > 0.0))
    branch_point = n_eff / (n_eff + 1.0)

    if p >= branch_point - BRANCH_POINT_TOL:
        return OptimalDetector(effect=Effect.identity(psi.n), z_value=None, reliability=p)

    z = invert_f_psi(psi, p / (1.0 - p), basis=columns)
    weights = np.abs(coefficients) ** 2
    tilde = columns @ (coefficients / (z + weights))
    psi_tilde = StateVector.from_amplitudes(tilde)
    effect = projector(psi_tilde).complement()
    return OptimalDetector(effect=effect, z_value=z, reliability=p * (1.0 + z))


def reliability_bound(n: int, p: float) -> float:
    """Upper bound on R_psi(E): 1 - p/n up to n/(n+1), p beyond."""
    if n < 1:
        raise InvalidDimensionError(f"Invalid dimension: {n}")
    _check_p(p)
    if p <= n / (n + 1.0):
        return 1.0 - p / n
    return p


def bayes_posterior(
    state: StateVector | DensityMatrix,
    exp: YesNoExperiment | Povm,
    basis: np.ndarray | None,
    p: float,
    outcome: str,
) -> float:
    """
    P(C=1 | Z=outcome) = p tr(rho1 E_z) / (p tr(rho1 E_z) + (1-p) tr(rho2 E_z)).

    For a mixed prior state rho, rho1 = diag rho and rho2 = rho.
    """
    _check_p(p)
    povm = exp.as_povm() if isinstance(exp, YesNoExperiment) else exp
    if isinstance(state, StateVector):
        rho1, rho2 = rho_pair(state, basis)
    else:
        rho1, rho2 = DensityMatrix(diag_part(state, basis)), state
    _check_dims(rho1, povm.effect(outcome))

    effect = povm.effect(outcome)
    joint_collapse = p * born_probability(rho1, effect)
    joint_none = (1.0 - p) * born_probability(rho2, effect)
    total = joint_collapse + joint_none
    if total <= 0.0:
        raise ConditioningError(f"Outcome {outcome!r} has probability zero")
    return joint_collapse / total


def haar_average_reliability(exp: YesNoExperiment, n: int, p: float) -> float:
    """R_u(E) = 1 - p - (1-2p) tr(E) / n."""
    _check_p(p)
    if exp.n != n:
        raise DimensionMismatchError(f"Effect dimension {exp.n} != n={n}")
    trace = float(np.trace(exp.effect_yes.matrix).real)
    return 1.0 - p - (1.0 - 2.0 * p) * trace / n


def _haar_reliability_values(
    a: np.ndarray, n: int
) -> Callable[[int, np.random.Generator], np.ndarray]:
    def sampler(size: int, rng: np.random.Generator) -> np.ndarray:
        states = haar_states(n, size, rng)
        return np.einsum("si,ij,sj->s", states.conj(), a, states).real

    return sampler


def haar_average_reliability_mc(
    exp: YesNoExperiment,
    n: int,
    p: float,
    samples: int,
    seed: int,
    workers: int = 1,
    basis: np.ndarray | None = None,
    job: int = 0,
) -> Estimate:
    """Monte Carlo average of R_psi(E) over Haar-random psi."""
    a = reliability_operator(exp.effect_yes, basis, p)
    return estimate_mean(_haar_reliability_values(a, n), samples, seed, job, workers)


def reliability_monte_carlo(
    psi: StateVector,
    exp: YesNoExperiment,
    basis: np.ndarray | None,
    p: float,
    trials: int,
    seed: int,
    workers: int = 1,
    job: int = 0,
) -> ReliabilityReport:
    """
    Simulate collapse channel followed by the yes/no measurement.

    Each trial draws C and the branch from the channel, then the outcome from
    the Born rule on the post-collapse state; a trial scores 1 when "yes"
    coincides with C=1.
    """
    _check_dims(psi, exp.effect_yes)
    columns = validate_basis(basis, psi.n)
    channel = CollapseChannel(p=p, basis=columns)
    effect = exp.effect_yes.matrix

    # P(yes) for each possible post-collapse state: branch k, then "no collapse"
    yes_by_branch = np.clip(np.einsum("ik,ij,jk->k", columns.conj(), effect, columns).real, 0, 1)
    yes_unchanged = born_probability(psi, exp.effect_yes)

    def sampler(size: int, rng: np.random.Generator) -> np.ndarray:
        collapsed, branches = sample_collapse_batch(channel, psi, size, rng)
        yes_probability = np.where(
            collapsed == 1, yes_by_branch[np.maximum(branches, 0)], yes_unchanged
        )
        answered_yes = rng.random(size) < yes_probability
        return (answered_yes == (collapsed == 1)).astype(float)

    estimate = estimate_mean(sampler, trials, seed, job, workers)
    report = ReliabilityReport(
        p=p,
        analytic=reliability_pure(psi, exp, columns, p),
        monte_carlo=estimate.mean,
        stderr=estimate.stderr,
        bound=reliability_bound(psi.n, p),
        trials=estimate.trials,
    )
    logger.debug(f"Reliability MC at p={p}: {report.monte_carlo} +/- {report.stderr}")
    return report


def success_set_measure(
    exp: YesNoExperiment,
    basis: np.ndarray | None,
    p: float,
    samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """
    Haar measure of {psi : R_psi(E) > max(p, 1-p)}.

    Returns:
        Estimated fraction and its binomial standard error
    """
    if samples < 1000:
        raise ValueError(f"samples must be >= 1000, got {samples}")
    a = reliability_operator(exp.effect_yes, basis, p)
    values = _haar_reliability_values(a, exp.n)(samples, rng)
    threshold = max(p, 1.0 - p) + SUCCESS_MARGIN
    fraction = float(np.mean(values > threshold))
    stderr = float(np.sqrt(fraction * (1.0 - fraction) / samples))
    return fraction, stderr


def detector_family(
    n: int, size: int, rng: np.random.Generator, kind: str = "random", rank: int | None = None
) -> list[tuple[str, Effect]]:
    """
    Candidate detectors for success-set scans.

    ``random`` draws U diag(u) U† effects; ``collapse`` draws I - |phi><phi|
    for Haar phi.
    """
    family = []
    for index in range(size):
        if kind == "random":
            family.append((f"random-{index}", random_effect(n, rng, rank)))
        elif kind == "collapse":
            family.append((f"collapse-{index}", projector(haar_state(n, rng)).complement()))
        else:
            raise ValueError(f"Unknown detector family: {kind}")
    return family


def scan_success_sets(
    n: int,
    p: float,
    family: Sequence[tuple[str, Effect]],
    samples: int,
    rng: np.random.Generator,
    basis: np.ndarray | None = None,
) -> SuccessSetScan:
    """Success-set measure of every detector in the family."""
    if not family:
        raise ValueError("Detector family must not be empty")
    rows = []
    for effect_id, effect in family:
        if effect.n != n:
            raise DimensionMismatchError(f"Effect {effect_id} has dimension {effect.n}, expected {n}")
        estimate, stderr = success_set_measure(YesNoExperiment(effect), basis, p, samples, rng)
        rows.append(SuccessSetRow(effect_id=effect_id, estimate=estimate, stderr=stderr))

    scan = SuccessSetScan(rows=rows)
    logger.info(f"Success-set scan n={n} p={p}: max {scan.maximum.estimate:.4f} ({scan.maximum.effect_id})")
    for row in scan.violations:
        logger.warning(f"Estimate for {row.effect_id} exceeds 1-1/e: {row.estimate} +/- {row.stderr}")
    return scan


def is_non_disturbing(effect: Effect, family: Sequence[StateVector], tol: float = 1e-10) -> bool:
    """Whether E psi = psi or E psi = 0 for every state in the family."""
    for psi in family:
        image = effect.matrix @ psi.amplitudes
        if not (np.allclose(image, psi.amplitudes, atol=tol) or np.allclose(image, 0.0, atol=tol)):
            return False
    return True


def repeated_measurement_experiment(
    psi_prime_family: Sequence[StateVector],
    projective_effect: Effect,
    reps: int,
    trials: int,
    rng: np.random.Generator,
) -> list[dict[str, float]]:
    """
    Repeat the Lüders measurement {E, I-E} ``reps`` times on each state.

    Returns:
        Per family member, the frequency of each outcome string
        (outcomes joined by commas, e.g. "yes,yes")
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    if not projective_effect.is_projective():
        raise UnsupportedInstrumentError("Repeated measurement needs a projective effect")

    projectors = {YES: projective_effect.matrix, NO: projective_effect.complement().matrix}
    table = []
    for psi in psi_prime_family:
        _check_dims(psi, projective_effect)
        counts: Counter[str] = Counter()
        for _ in range(trials):
            state = psi.amplitudes
            outcomes = []
            for _ in range(reps):
                yes_probability = min(1.0, max(0.0, float(np.vdot(state, projectors[YES] @ state).real)))
                label = YES if rng.random() < yes_probability else NO
                projected = projectors[label] @ state
                norm = np.linalg.norm(projected)
                if norm <= 1e-14:
                    # rounding picked a probability-zero outcome
                    label = NO if label == YES else YES
                    projected = projectors[label] @ state
                    norm = np.linalg.norm(projected)
                state = projected / norm
                outcomes.append(label)
            counts[",".join(outcomes)] += 1
        table.append({key: value / trials for key, value in sorted(counts.items())})
    return table


def outcome_distribution(state: StateVector | DensityMatrix, povm: Povm) -> dict[str, float]:
    """Born distribution of every POVM label."""
    return dict(zip(povm.labels, outcome_probabilities(state, povm), strict=True))
