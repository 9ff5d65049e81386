"""Exception hierarchy shared by all solvers."""

from __future__ import annotations

import numpy as np


class McenError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(McenError):
    """Arrays whose shapes must agree do not."""


class ZeroVarianceColumn(McenError):
    """A covariate column is constant and cannot be scaled."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"covariate column {column} (0-based) has zero variance")


class IndexOutOfRange(McenError):
    """A cluster or response index falls outside its valid range."""


class SingularGram(McenError):
    """X'X is not invertible, so no least-squares solution exists."""


class MaxSweepsExceeded(McenError):
    """The coordinate-descent loop hit its sweep cap before converging.

    Carries the last iterate so callers can keep going with a flagged,
    non-converged estimate.
    """

    def __init__(self, coefficients: np.ndarray, sweeps: int):
        self.coefficients = coefficients
        self.sweeps = sweeps
        self.converged = False
        super().__init__(f"no convergence after {sweeps} sweeps")


class DegenerateInput(McenError):
    """Fewer distinct points than requested clusters."""


class SeparationDetected(McenError):
    """A logistic fit keeps pushing linear predictors past the clamp."""


class InvalidK(McenError):
    """Cross-validation fold count is not usable for this sample size."""


class UnsupportedP(McenError):
    """Simulation designs only support p = 12 or p >= 30."""
