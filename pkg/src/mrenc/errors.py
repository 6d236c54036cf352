"""Exception hierarchy shared by all mrenc modules."""


class MrencError(Exception):
    """Base class for all errors raised by mrenc."""


class FormatError(MrencError):
    """Malformed or unsupported input bytes (file headers, payloads, metadata streams)."""


class ValidationError(MrencError):
    """A domain invariant was violated (dimensions, bounds, geometry)."""


class InfeasibleConstraintError(MrencError):
    """No admissible partitioning exists for a region under the given constraint."""

    def __init__(self, message: str, region=None):
        super().__init__(message)
        self.region = region
