"""Exception hierarchy shared by all shuntlab modules."""


class ShuntlabError(Exception):
    """Base class for every error raised by shuntlab."""


class DomainError(ShuntlabError, ValueError):
    """An input lies outside the domain where a formula is defined."""


class NumericalError(ShuntlabError, ArithmeticError):
    """A numerical procedure failed (divergence, singular system, ...)."""


class BranchLossError(NumericalError):
    """A continued root branch could not be followed any further."""

    def __init__(self, branch, tau, message=None):
        self.branch = branch
        self.tau = tau
        super().__init__(message or f"lost root branch {branch} at tau={tau:.6g}")


class SingularConfigurationError(NumericalError):
    """A polynomial required as a divisor vanishes at one of the poles."""


class NoCrossoverError(NumericalError):
    """No unity-gain crossover was found in the scanned frequency band."""
