"""Structured errors shared across the package."""


class KdvLabError(Exception):
    """Base class for all kdvlab errors."""


class WindowExceededError(KdvLabError):
    """Requested evaluation point lies outside the numerically supported window."""


class DivergentTailError(KdvLabError):
    """A declared parameter tail is not summable for the requested quantity."""


class GridError(KdvLabError):
    """A sampling grid is too narrow, too coarse, or otherwise unusable."""


class ClassMismatchError(KdvLabError):
    """Operation requires stronger summability than the parameters declare."""


class UnsupportedOrderError(KdvLabError):
    """Derivative or invariant order outside the supported range."""
