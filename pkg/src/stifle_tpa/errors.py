"""Exception types shared across the measurement pipeline."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    #: short machine-readable kind, used in CSV cells ("ERR:<kind>") and CLI output
    kind = "PipelineError"


class DegenerateGeometry(PipelineError):
    """Two landmarks that must be distinct coincide within the degeneracy epsilon."""

    kind = "DegenerateGeometry"


class InvalidThresholds(PipelineError):
    """Range thresholds are inconsistent (lower >= upper) or outside [0, 90]."""

    kind = "InvalidThresholds"


class ParseError(PipelineError):
    """A label file line could not be parsed.

    Carries the 1-based line number of the offending line.
    """

    kind = "ParseError"

    def __init__(self, message: str, line_no: int, image_id: str | None = None):
        self.raw_message = message
        self.line_no = line_no
        self.image_id = image_id
        prefix = f"{image_id}: " if image_id else ""
        super().__init__(f"{prefix}line {line_no}: {message}")


class MissingRole(PipelineError):
    """One or more required landmark roles have no detection."""

    kind = "MissingRole"

    def __init__(self, roles, image_id: str | None = None):
        self.roles = list(roles)
        self.image_id = image_id
        names = ", ".join(r.value if hasattr(r, "value") else str(r) for r in self.roles)
        prefix = f"{image_id}: " if image_id else ""
        super().__init__(f"{prefix}missing detections for role(s): {names}")


class GeometryOutOfBounds(PipelineError):
    """A generated landmark falls outside the image bounds."""

    kind = "GeometryOutOfBounds"


class InvalidInterval(PipelineError):
    """A scan interval or grid step is invalid (lo >= hi, step <= 0, empty list)."""

    kind = "InvalidInterval"


class InvalidConfig(PipelineError):
    """A configuration document fails validation."""

    kind = "InvalidConfig"


class EmptyComparison(PipelineError):
    """A comparison run was requested with no prediction variants."""

    kind = "EmptyComparison"


class UnknownVariant(PipelineError):
    """A variant name was requested that is not part of the comparison."""

    kind = "UnknownVariant"


def error_kind(exc: BaseException) -> str:
    """Map an exception to the short kind used in reports (ERR:<kind>)."""
    if isinstance(exc, PipelineError):
        return exc.kind
    if isinstance(exc, OSError):
        return "IoError"
    return type(exc).__name__
