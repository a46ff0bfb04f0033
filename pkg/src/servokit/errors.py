"""Exception types. Everything derived from ``ServokitError`` is a domain
error (CLI exit code 1)."""


class ServokitError(Exception):
    pass


class ConfigError(ServokitError):
    pass


class FrameMismatchError(ServokitError):
    """A Jacobian was passed in the wrong frame."""


class SingularityError(ServokitError):
    pass


class BehindCameraError(ServokitError):
    pass


class InvalidDepthError(ServokitError):
    pass


class VisibilityError(ServokitError):
    pass


class FieldOfViewError(ServokitError):
    """A feature left the image. ``trace`` holds the iterations completed so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ImageFormatError(ServokitError):
    pass


class NoTargetError(ServokitError):
    pass


class DegenerateQuadError(ServokitError):
    pass


class AmbiguousOrderError(ServokitError):
    pass


class UnitMismatchError(ServokitError):
    pass


class DatasetError(ServokitError):
    pass


class InvalidQuadError(ServokitError):
    """Corners unsuitable for rendering (non-convex or out of bounds)."""
