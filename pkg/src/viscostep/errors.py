"""Exception types raised by the material-point routines."""


class ViscostepError(Exception):
    """Base class for all errors raised by this package."""


class NonPositiveDeterminant(ViscostepError, ValueError):
    """A tensor expected to have det > 0 does not."""


class NotSPD(ViscostepError, ValueError):
    """A tensor expected to be symmetric positive definite is not."""


class SingularTensor(ViscostepError, ValueError):
    """Inversion of a tensor with vanishing determinant."""


class DegenerateStep(ViscostepError, ArithmeticError):
    """The classical Euler-backward prefactor is non-positive (step too large)."""


class NoConvergence(ViscostepError, RuntimeError):
    """A local iteration exhausted its budget.

    Attributes
    ----------
    iterations : int
        Number of sweeps performed.
    residual : float
        Last relative update norm.
    """

    def __init__(self, message, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class LateralSolveFailure(NoConvergence):
    """The uniaxial lateral-stress condition could not be satisfied."""


class GridMismatch(ViscostepError, ValueError):
    """Time steps of a convergence study are not commensurate with the reference."""


class IntegratorFailure(ViscostepError, RuntimeError):
    """An integrator error raised while marching, tagged with the step index."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause
