"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: usage problems exit 1, data and
validation problems exit 2, broken runtime invariants exit 3.
"""


class CotrackError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(CotrackError):
    """A domain object failed validation. ``field`` names the offender."""

    def __init__(self, field, message):
        self.field = field
        super().__init__("%s: %s" % (field, message))


class UnknownClassError(CotrackError):
    """Lookup of an object class that is not in the registry."""


class BehindCameraError(CotrackError):
    """Projection requested for a point at or behind the image plane."""


class ShapeError(CotrackError):
    """Array shape incompatible with the configured operator."""


class DegenerateCovarianceError(CotrackError):
    """A covariance matrix required by a filter step is singular."""


class UndefinedMetricError(CotrackError):
    """A metric has no defined value for the given inputs."""


class DataFormatError(CotrackError):
    """A record file violates its schema. Carries the offending line."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__("%s:%s: %s" % (path, line_no, message))


class SchemaVersionError(CotrackError):
    """Input file schema does not match what this tool version expects."""
