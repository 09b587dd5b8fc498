"""Exception hierarchy shared by all modules."""


class WpdError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(WpdError, ValueError):
    """Raised when an input breaks an operation's preconditions."""


class NotPositiveDefiniteError(WpdError, ValueError):
    def __init__(self, message, subdomain=None):
        super().__init__(message)
        self.subdomain = subdomain


class SingularCouplingError(WpdError):
    """The coupling block Y^T A Z is singular or too ill-conditioned.

    This means the deflated system is not well posed for the given Y, Z.
    """


class HpdViolationError(WpdError):
    pass


class NumericalFailureError(WpdError):
    pass


class NotEnoughEigenpairsError(WpdError):
    pass


class PartialConvergenceError(WpdError):
    """Iterative eigensolver stopped before all requested pairs converged.

    ``converged`` holds the PencilEigenSet made of the pairs that did.
    """

    def __init__(self, message, converged):
        super().__init__(message)
        self.converged = converged


class InsufficientDataError(WpdError):
    pass


class ConfigurationError(WpdError, ValueError):
    pass


class MatrixMarketParseError(WpdError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
