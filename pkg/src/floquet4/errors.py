"""Exception hierarchy; ``exit_code`` is what the CLI returns for each kind."""


class FloquetError(Exception):
    exit_code = 3


class InputError(FloquetError, ValueError):
    """Malformed coefficients, arguments or files."""
    exit_code = 2


class PreconditionError(FloquetError, ValueError):
    exit_code = 2


class ClampError(PreconditionError):
    """Requested λ beyond the overflow clamp on Re λ^{1/4}."""


class ToleranceError(FloquetError, ArithmeticError):
    """A quadrature or iteration failed to reach its tolerance."""


class ConsistencyError(FloquetError, ArithmeticError):
    """Independent routes to the same quantity disagree."""


class IntegrationError(FloquetError, ArithmeticError):
    """The ODE integrator hit its step cap or produced non-finite values."""


class ContourError(FloquetError, ArithmeticError):
    """Winding number did not settle; the contour probably passes near a zero."""


class RefinementError(FloquetError, ArithmeticError):
    def __init__(self, msg, seed=None):
        super().__init__(msg)
        self.seed = seed


class SubdivisionError(ContourError):
    """Child cell counts do not add up to the parent count."""


class ClassificationError(FloquetError, ArithmeticError):
    """Real-axis scan and zero tables do not fit together."""


class VerificationError(FloquetError):
    exit_code = 1
