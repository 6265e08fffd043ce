"""Exception hierarchy shared across the package.

Two top-level families matter for callers: ``InvalidInputError`` (bad
arguments, malformed files, dimension mismatches) and ``NumericalError``
(breakdowns during computation). The CLI maps them to distinct exit codes.
"""

from __future__ import annotations


class FlfosrError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(FlfosrError, ValueError):
    """Inputs violate a documented precondition or file contract."""


class DimensionError(InvalidInputError):
    """Array shapes or sizes are incompatible."""


class DegenerateColumnError(InvalidInputError):
    """A covariate column cannot be standardized (constant)."""


class DegenerateBasisError(InvalidInputError):
    """All eigenvalues fell below the truncation cutoff."""


class UnsupportedGridError(InvalidInputError):
    """Requested evaluation grid cannot be served by the stored basis."""


class NumericalError(FlfosrError, RuntimeError):
    """A numerical operation failed beyond tolerance.

    Carries the basis-coefficient index ``k`` and the MCMC ``iteration``
    when known, so failures deep in the sampling loop stay attributable.
    """

    def __init__(self, message: str, *, k: int | None = None, iteration: int | None = None):
        self.k = k
        self.iteration = iteration
        parts = [message]
        if k is not None:
            parts.append(f"[k={k}]")
        if iteration is not None:
            parts.append(f"[iteration={iteration}]")
        super().__init__(" ".join(parts))


class DecompositionError(NumericalError):
    """An eigen- or Cholesky decomposition failed beyond tolerance."""


class InvalidStateError(NumericalError):
    """Sampler state became invalid (non-positive variance, non-finite value)."""
