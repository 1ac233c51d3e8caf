"""Exception hierarchy shared by the analysis modules."""


class SunpatchError(ValueError):
    """Base class for every error raised by this package."""


class PatchSizeError(SunpatchError):
    """Patch side is even, non-positive, or larger than the image."""


class DimensionMismatchError(SunpatchError):
    """Two grids (or a grid and a mask) do not share the same shape."""


class EmptyRegionError(SunpatchError):
    """A region label selects no pixels."""


class SmallRegionError(SunpatchError):
    """A region has too few samples for the requested estimator."""


class DegenerateError(SunpatchError):
    """Data carry no variation the estimator can work with."""


class SingularCovarianceError(DegenerateError):
    """A covariance block is not invertible and no ridge was supplied."""


class RankDeficientError(DegenerateError):
    """Data rank is below the requested number of components."""


class GridFormatError(SunpatchError):
    """A GRD1 file is malformed."""
