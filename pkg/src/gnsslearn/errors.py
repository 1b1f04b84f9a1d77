"""Exception hierarchy shared across the package."""


class GnssLearnError(Exception):
    """Base class for all errors raised by this package."""


class NearSingularOrigin(GnssLearnError):
    """ECEF point too close to the Earth's center for a geodetic conversion."""


class DegenerateGeometry(GnssLearnError):
    """Satellite and receiver (nearly) coincide; line of sight undefined."""


class InsufficientSatellites(GnssLearnError):
    """Fewer usable satellites than unknowns in the position solve."""


class SingularNormalMatrix(GnssLearnError):
    """The normal matrix of the weighted solve is singular or too ill-conditioned."""


class NotConverged(GnssLearnError):
    """Operation requires a converged solve result."""


class DimensionMismatch(GnssLearnError):
    """Array shapes do not match the network or epoch layout."""


class InvalidElevation(GnssLearnError):
    """Elevation outside the domain of a weighting formula; mask before weighting."""


class MalformedCheckpoint(GnssLearnError):
    """Checkpoint file cannot be parsed or is missing required fields."""


class VersionMismatch(GnssLearnError):
    """File format version or architecture tag is not supported."""


class MalformedDataset(GnssLearnError):
    """Dataset file cannot be parsed or violates the record schema."""


class ConfigInvalid(GnssLearnError):
    """Scenario or training configuration violates its invariants."""


class MissingCheckpoint(GnssLearnError):
    """A learned method was requested without a matching checkpoint."""


class NoSolvableEpochs(GnssLearnError):
    """Training data contains no epoch solvable at equal weights."""


class IoFailure(GnssLearnError):
    """Report or log file could not be written."""
