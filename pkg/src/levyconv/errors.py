"""Exception types shared across the package."""


class LevyconvError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(LevyconvError):
    """Malformed measure, kernel, eta, or scenario configuration."""


class ContractViolationError(LevyconvError):
    """An operation was called outside its stated domain of validity.

    Examples: integration-by-parts path construction on a kernel whose
    regularity flags do not hold, or a change-of-measure weight requested
    for a simulation window that does not cover the test function support.
    """


class PreconditionError(LevyconvError):
    """A mathematical precondition of an identity fails for the given inputs."""


class NumericalIntegrationError(LevyconvError):
    """A quadrature failed to converge to the requested tolerance."""


class SingularKernelError(LevyconvError):
    """Kernel derivative requested at a point where it diverges."""


class PoisonedEstimateError(LevyconvError):
    """A Monte Carlo functional produced a non-finite value.

    Carries enough stream information to replay the offending chunk.
    """

    def __init__(self, message, stream_key=None, chunk_index=None):
        super().__init__(message)
        self.stream_key = stream_key
        self.chunk_index = chunk_index
