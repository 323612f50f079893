"""
Exception types raised by the collapse toolkit.
"""


class CollapseToolkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidDimensionError(CollapseToolkitError, ValueError):
    """Hilbert-space dimension is out of range."""


class DimensionMismatchError(CollapseToolkitError, ValueError):
    """Operands live in spaces of different dimension."""


class InvalidOperatorError(CollapseToolkitError, ValueError):
    """Matrix violates a type invariant (Hermitian, effect, density matrix, POVM)."""


class NonOrthonormalBasisError(CollapseToolkitError, ValueError):
    """Basis columns are not orthonormal."""


class EmptyEnsembleError(CollapseToolkitError, ValueError):
    """Ensemble has no entries and no sampler."""


class ConditioningError(CollapseToolkitError, ValueError):
    """Conditioning on an outcome of probability zero."""


class OutOfBranchError(CollapseToolkitError, ValueError):
    """Requested ratio lies outside the range of f_psi."""


class InvalidProbabilityError(CollapseToolkitError, ValueError):
    """Probability lies outside [0, 1]."""


class DegeneratePriorError(CollapseToolkitError, ValueError):
    """Collapse probability is 0 or 1, where only blind guessing applies."""


class UnsupportedInstrumentError(CollapseToolkitError, ValueError):
    """Instrument is not projective."""


class ResolutionError(CollapseToolkitError, ValueError):
    """Coarse-graining scale is incompatible with the grid."""


class UndefinedRatioError(CollapseToolkitError, ValueError):
    """Ghirardi ratio requested for a cell holding no mass."""


class NumericalError(CollapseToolkitError, RuntimeError):
    """Numerical routine failed (non-convergence, degenerate normalization)."""


class InternalConsistencyError(CollapseToolkitError, RuntimeError):
    """Computed probabilities do not form a distribution."""


class MemoryBudgetError(CollapseToolkitError, RuntimeError):
    """Configuration grid exceeds the configured memory budget."""
