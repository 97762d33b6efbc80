"""Exception hierarchy."""


class PolyhomError(Exception):
    """Base class for all package errors."""


# graph
class WindowTooSmall(PolyhomError, ValueError):
    pass


class CoveringRepairFailed(PolyhomError):
    pass


class GeneralPositionViolated(PolyhomError, ValueError):
    pass


class DegenerateInput(PolyhomError, ValueError):
    pass


class DegenerateCell(PolyhomError):
    pass


# energy
class OutOfRange(PolyhomError, ValueError):
    pass


class DegenerateEdge(PolyhomError, ValueError):
    pass


class MissingVertexValue(PolyhomError, ValueError):
    pass


class DimensionMismatch(PolyhomError, ValueError):
    pass


class NonDifferentiablePotential(PolyhomError):
    pass


class SandwichViolated(PolyhomError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# zero temperature
class NotConverged(PolyhomError):
    """Raised when a minimization hits its iteration cap; carries the best result."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InfeasibleBoundary(PolyhomError):
    pass


class PartitionInvalid(PolyhomError, ValueError):
    pass


# finite temperature
class NotPositiveDefinite(PolyhomError):
    pass


class ChainDiverged(PolyhomError):
    pass


class OverlapFailure(PolyhomError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


# studies
class GridTooSmall(PolyhomError, ValueError):
    pass


class IllConditionedFit(PolyhomError):
    pass


class ConfigError(PolyhomError, ValueError):
    pass
