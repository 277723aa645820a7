"""Exception hierarchy shared by all modules."""


class FusedStripError(Exception):
    """Base class for library errors."""


class SingularParameter(FusedStripError, ZeroDivisionError):
    """A spectral or boundary parameter sits on (or within 1e-10 of) a pole."""


class NonConvergence(FusedStripError, ArithmeticError):
    """An iterative or truncated computation hit its cap before converging."""


NoConvergence = NonConvergence


class InvalidParams(FusedStripError, ValueError):
    pass


class OutOfRange(FusedStripError, ValueError):
    pass


class DegenerateBoundary(FusedStripError, ValueError):
    pass


class StateSpaceTooLarge(FusedStripError, ValueError):
    pass


class NotIrreducible(FusedStripError, ValueError):
    pass


class EvenWidth(FusedStripError, ValueError):
    pass


class PathOrder(FusedStripError, ValueError):
    pass


class WindowTooSmall(FusedStripError, ValueError):
    pass


class ZeroNormalizer(FusedStripError, ArithmeticError):
    pass


class RepConstructionFailure(FusedStripError, ArithmeticError):
    pass


class TooManyTimes(FusedStripError, ValueError):
    pass


class PhaseBoundary(FusedStripError, ValueError):
    pass


class EmptyRun(FusedStripError, ValueError):
    """Monte Carlo run requested with zero recorded steps."""


class NegativeIntegrand(FusedStripError, ArithmeticError):
    """A quantity that must be positive on the support was not."""


class AtomNearBoundary(UserWarning):
    """An atom generator sits within 1e-12 of modulus 1."""
