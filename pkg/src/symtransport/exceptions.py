"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`TransportError`, which
is itself a ``ValueError`` so that callers validating inputs can catch either.
"""


class TransportError(ValueError):
    """Base class for all toolkit errors."""


# measures
class NonNormalized(TransportError):
    pass


class NegativeWeight(TransportError):
    pass


class EmptySupport(TransportError):
    pass


class AxisOutOfRange(TransportError, IndexError):
    pass


class HeterogeneousSupports(TransportError):
    pass


class MapOutOfRange(TransportError, IndexError):
    pass


# costs
class DimensionMismatch(TransportError):
    pass


class BaseMismatch(TransportError):
    pass


class NonUniformWeights(TransportError):
    pass


class MarginalMismatch(TransportError):
    pass


# transport
class InfeasibleMarginals(TransportError):
    pass


class SizeCapExceeded(TransportError):
    pass


class NonSquare(TransportError):
    pass


class NoConvergence(RuntimeWarning):
    """Issued (as a warning) when an iterative solver stops at ``max_iter``."""


# duality
class NotExactSolve(TransportError):
    pass


class NotQuadraticCost(TransportError):
    pass


# involution
class CapExceeded(TransportError):
    pass


class DegenerateField(TransportError):
    pass


class IndexOutOfRange(TransportError, IndexError):
    pass


# monotone
class EmptySample(TransportError):
    pass


class GridMismatch(TransportError):
    pass


class NonSquareGrid(TransportError):
    pass
