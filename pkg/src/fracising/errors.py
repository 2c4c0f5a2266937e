"""Exception types shared across the package.

Every numerical failure mode raised by the library derives from
:class:`FracIsingError`, so callers (and the CLI) can map failures to a
stable, machine-readable name via ``type(exc).__name__``.
"""


class FracIsingError(Exception):
    """Base class for all numerical/domain failures raised by fracising."""


class DegenerateKernel(FracIsingError):
    """The coupling kernel has an all-zero tail and cannot be fitted."""


class ToleranceNotReached(FracIsingError):
    """Exponential fit did not reach the requested sup-norm tolerance.

    Carries the best approximation found in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConvergenceFailure(FracIsingError):
    """A series summation could not certify the requested tolerance."""

    def __init__(self, message, estimate=None, error_estimate=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


class SizeLimit(FracIsingError):
    """Requested dense object exceeds the hard memory guard."""


class NoConvergence(FracIsingError):
    """Iterative eigensolver did not converge; carries best residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoInteriorPeak(FracIsingError):
    """Entropy scan is monotone on the grid; no interior maximum exists."""


class SingularFit(FracIsingError):
    """Nonlinear fit Jacobian is rank deficient at the solution."""


class IllConditionedFit(FracIsingError):
    """Regression window contains too few points to be meaningful."""


class NoFront(FracIsingError):
    """No entropy contour ever crosses the lowest requested level."""


class InsufficientSpan(FracIsingError):
    """Front crossings do not span a wide enough time range to fit."""


class StepSizeRejection(FracIsingError):
    """Time step rejected: per-step unitarity defect above threshold."""
