"""Exception hierarchy shared by every pipeline stage.

Each error carries a stable machine-readable ``code`` (the class name) so the
CLI and the HTTP service can report failures without string matching.
"""

from __future__ import annotations


class StereoMeasureError(Exception):
    """Base class; ``code`` is the stable identifier used on the wire."""

    def __init__(self, message: str = "", *, detail: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail

    @property
    def code(self) -> str:
        return self.__class__.__name__


# --- input / file errors -------------------------------------------------

class MalformedFile(StereoMeasureError):
    pass


class MissingField(MalformedFile):
    def __init__(self, field: str):
        super().__init__(f"missing required field '{field}'")
        self.field = field


class NonPositiveValue(MalformedFile):
    def __init__(self, field: str):
        super().__init__(f"field '{field}' must be positive")
        self.field = field


class UnknownField(MalformedFile):
    def __init__(self, field: str):
        super().__init__(f"unknown field '{field}'")
        self.field = field


class MalformedPfm(StereoMeasureError):
    pass


class IoFailure(StereoMeasureError):
    pass


class OutOfBounds(StereoMeasureError):
    pass


# --- geometry / disparity errors ------------------------------------------

class InvalidDisparity(StereoMeasureError):
    pass


class NonPositiveDepth(StereoMeasureError):
    pass


class DimensionMismatch(StereoMeasureError):
    pass


class WindowTooLarge(StereoMeasureError):
    pass


# --- surface errors --------------------------------------------------------

class EmptyCloud(StereoMeasureError):
    pass


class EmptyMesh(StereoMeasureError):
    pass


# --- measurement errors -----------------------------------------------------

class NoVertexInRadius(StereoMeasureError):
    pass


class Unreachable(StereoMeasureError):
    pass


class DegeneratePath(StereoMeasureError):
    pass


# --- selection errors --------------------------------------------------------

class EmptyMask(StereoMeasureError):
    pass


class InsufficientInstances(StereoMeasureError):
    pass


# --- synthetic scene errors ---------------------------------------------------

class MarkerOutOfView(StereoMeasureError):
    pass


class UnsupportedShape(StereoMeasureError):
    pass


# --- session / service errors -------------------------------------------------

class NotFound(StereoMeasureError):
    pass


class InvalidState(StereoMeasureError):
    """Operation requested out of order (e.g. surface before disparity)."""
    pass


# Errors caused by bad user input (CLI exit code 3) versus failures arising
# inside the computation itself (CLI exit code 4).
INPUT_ERRORS = (
    MalformedFile,
    MalformedPfm,
    IoFailure,
    OutOfBounds,
    DimensionMismatch,
    WindowTooLarge,
    EmptyMask,
    InsufficientInstances,
    MarkerOutOfView,
    UnsupportedShape,
    NotFound,
)

PIPELINE_ERRORS = (
    InvalidDisparity,
    NonPositiveDepth,
    EmptyCloud,
    EmptyMesh,
    NoVertexInRadius,
    Unreachable,
    DegeneratePath,
    InvalidState,
)
