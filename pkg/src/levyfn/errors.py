"""Exception types shared across the package."""


class LevyFnError(Exception):
    """Base class for package-specific errors."""


class InvalidJumpIndexError(LevyFnError):
    """Stable index alpha outside (0, 2)."""


class NegativeGaussianError(LevyFnError):
    """Gaussian coefficient c < 0."""


class SubordinatorError(LevyFnError):
    """No probed lambda with psi(lambda) > 0: the process is monotone."""


class BracketNotFoundError(LevyFnError):
    """No sign change of psi located below the probe cap."""


class NumericalOverflowError(LevyFnError):
    """Evaluation left the representable floating-point range."""


class NonPositiveStartError(LevyFnError):
    """Starting point x must be strictly positive."""


class InversionUnstableError(LevyFnError):
    """Consecutive Laplace-inversion orders disagree beyond tolerance."""


class QuadratureFailureError(LevyFnError):
    """Adaptive quadrature could not certify the value within budget."""


class SignChangeError(LevyFnError):
    """Integrand changes sign in the probed region."""


class PreconditionViolatedError(LevyFnError):
    """A stated precondition of the operation does not hold."""


class NotApplicableError(LevyFnError):
    """The test's hypotheses exclude this model."""


class AllCensoredError(LevyFnError):
    """No simulated path resolved before the horizon."""
