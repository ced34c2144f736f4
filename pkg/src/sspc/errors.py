"""Exception hierarchy shared across the package."""


class SspcError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SspcError):
    """Malformed input data: corpus files, truth files, embedding files."""


class ShapeError(SspcError):
    """Tensor or config shapes are inconsistent."""


class UsageError(SspcError):
    """Caller violated an API or CLI contract (bad flag, bad argument)."""
