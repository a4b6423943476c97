"""Exception hierarchy shared across the library.

The CLI maps these onto distinct process exit codes, so new error types
should subclass one of the three roots below.
"""


class RfseiError(Exception):
    """Base class for all library errors."""


class ConfigurationError(RfseiError):
    """Invalid user-supplied configuration, spec, or parameter value."""


class DataFormatError(RfseiError):
    """Base for serialized-artifact format problems."""


class VersionMismatchError(DataFormatError):
    """File carries an unsupported format version."""


class TruncatedFileError(DataFormatError):
    """File is shorter than its header promises."""


class ChecksumError(DataFormatError):
    """Payload CRC does not match the stored trailer."""


class NumericError(RfseiError):
    """Base for runtime numeric failures."""


class UndefinedMetricError(NumericError):
    """A metric is mathematically undefined for the given inputs."""


class DegenerateFitError(NumericError):
    """A distribution fit has no usable spread (e.g. zero variance)."""


class NoBoundaryError(NumericError):
    """Two densities admit no operative decision boundary."""


class TrainingDivergedError(NumericError):
    """Training produced a non-finite loss."""


class RoutingError(RfseiError):
    """A capture was routed to a modulation family with no estimator."""
