"""Exception hierarchy shared by all groundsight modules."""


class GroundsightError(Exception):
    """Base class for domain errors (CLI exit code 4)."""


class AttitudeOutOfRange(GroundsightError):
    pass


class EmptyCloud(GroundsightError):
    pass


class AllPointsFiltered(GroundsightError):
    pass


class DegenerateGeometry(GroundsightError):
    pass


class DimensionMismatch(GroundsightError):
    pass


class ShapeMismatch(GroundsightError):
    pass


class WeightShapeMismatch(ShapeMismatch):
    pass


class GroupDivisibility(GroundsightError):
    pass


class PartitionViolation(GroundsightError):
    pass


class InsufficientBank(GroundsightError):
    pass


class LengthMismatch(GroundsightError):
    pass


class ConfigError(GroundsightError):
    """Invalid or unknown configuration key/value."""


class FormatError(GroundsightError):
    """Malformed PLY/CSV/PGM/PPM/weights file."""


class FrameMismatch(GroundsightError):
    """Point cloud is in the wrong coordinate frame for the operation."""
