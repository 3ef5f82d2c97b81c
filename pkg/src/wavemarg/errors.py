"""Exception hierarchy shared by every stage of the toolkit."""


class WavemargError(Exception):
    """Base class for all errors raised by wavemarg."""


class ArgumentError(WavemargError, ValueError):
    """An argument is outside the documented domain."""


class GridArgumentError(ArgumentError):
    """Non-positive or otherwise invalid grid parameters."""


class GridSizeError(WavemargError, MemoryError):
    """The product grid would exceed the configured node budget."""


class DensityError(WavemargError, ValueError):
    """A field violates the probability-density invariants."""


class SymmetryError(WavemargError, ValueError):
    """A field flagged symmetric has inconsistent per-particle marginals."""


class ConvergenceError(WavemargError, RuntimeError):
    """The reallocation iteration ran out of budget."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class MassDefectError(WavemargError, RuntimeError):
    """Renormalisation after clamping moved more mass than allowed."""


class ResolutionError(WavemargError, ValueError):
    """A mollifier is too narrow to be represented on the grid."""


class LeakageError(WavemargError, RuntimeError):
    """Zero-padded convolution lost too much mass through the box boundary."""


class ConsistencyError(WavemargError, RuntimeError):
    """Two independent evaluations of the same quantity disagree."""


class DivisionFloorError(WavemargError, FloatingPointError):
    """A smoothed marginal underflowed where the plan still carries mass."""


class ScheduleIncompleteError(WavemargError, RuntimeError):
    """The diagonal schedule could not place every requested level."""

    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


class SubsequenceError(WavemargError, RuntimeError):
    """No admissible index selection exists within the given lists."""

    def __init__(self, message, deepest):
        super().__init__(message)
        self.deepest = deepest


class RangeError(WavemargError, ValueError):
    """Input to the circle lifting lies outside [-1, 1]."""


class SupportError(WavemargError, ValueError):
    """A generated field carries too much mass near the box boundary."""


class AmplitudeError(WavemargError, ValueError):
    """A density perturbation drove the square-root density negative."""


class ConfigError(WavemargError, ValueError):
    """Malformed experiment configuration."""


class InvariantError(WavemargError, RuntimeError):
    """A pipeline row broke one of the checked inequalities."""

    def __init__(self, message, n=None, stage=None):
        super().__init__(message)
        self.n = n
        self.stage = stage
