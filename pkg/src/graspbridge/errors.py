"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: InputError -> 2, NumericError -> 3,
FormatError -> 4.
"""


class GraspBridgeError(Exception):
    """Base class for all package errors."""


class InputError(GraspBridgeError):
    """Invalid or inconsistent caller-supplied data."""


class InvalidRotationError(InputError):
    """Rotation matrix or 6-D rotation seed outside tolerance."""


class EmptyInputError(InputError):
    """An operation received an empty collection it cannot handle."""


class BoundsError(InputError):
    """A count or index is outside its valid range."""


class ShapeError(InputError):
    """Array dimensions do not match the operation's contract."""


class DegenerateHullError(InputError):
    """Vertex set is flat in the active dimension (no volume)."""


class DegeneratePlanError(InputError):
    """Transport plan carries no mass."""


class AnnotationError(InputError):
    """A grasp annotation lacks a field required by the selected cost."""


class EndpointError(InputError):
    """Bridge time t was requested at or beyond an endpoint."""


class ConfigError(InputError):
    """Run configuration is internally inconsistent."""


class NumericError(GraspBridgeError):
    """A computation produced non-finite values."""


class DivergenceError(NumericError):
    """Integration diverged; carries the offending step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FormatError(GraspBridgeError):
    """Persisted file is corrupt, truncated, or of unknown version."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
