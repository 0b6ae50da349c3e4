"""Exception types raised across blowuplab."""


class BlowupLabError(Exception):
    """Base class for all library errors."""


class GridError(BlowupLabError, ValueError):
    pass


class GridTooCoarseError(GridError):
    pass


class DimensionMismatchError(BlowupLabError, ValueError):
    pass


class DegenerateWeightError(BlowupLabError, ValueError):
    pass


class NonpositiveInputError(BlowupLabError, ValueError):
    pass


class TimePastBlowupError(BlowupLabError, ValueError):
    pass


class UnsupportedDimensionError(BlowupLabError, ValueError):
    pass


class NoBlowupError(BlowupLabError):
    """Analysis requested on a trajectory that never reached the threshold."""


class InsufficientTailError(BlowupLabError):
    pass


class NonmonotoneTailError(BlowupLabError):
    pass


class PointOutsideDomainError(BlowupLabError, ValueError):
    pass


class EmptyMaskError(BlowupLabError, ValueError):
    pass


class InsufficientSnapshotsError(BlowupLabError):
    pass


class MTooSmallError(BlowupLabError):
    """No admissible epsilon for the comparison-ball construction at this M."""


class InsufficientRowsError(BlowupLabError):
    pass


class ConfigError(BlowupLabError, ValueError):
    pass


class WanderingArgmaxWarning(UserWarning):
    """The late-time argmax node moved during the final decade of growth."""


class NonfiniteValueError(BlowupLabError, FloatingPointError):
    pass
