"""Exception hierarchy. The CLI maps each family to its own exit code."""


class TGIError(Exception):
    """Base class for every error raised by tgi3d."""


class ComputeError(TGIError, ValueError):
    """Invalid input to a compute stage."""


class InvalidDimensionError(ComputeError):
    pass


class TimingViolationError(ComputeError):
    """Integration windows do not fit in the shutter or pulse."""


class InvalidInputError(ComputeError):
    pass


class InsufficientSamplesError(ComputeError):
    pass


class NoEstimateError(ComputeError):
    """Every entry of a correlation profile is undefined."""


class UndefinedMetricError(ComputeError):
    pass


class DimensionMismatchError(ComputeError):
    pass


class FormatError(TGIError):
    """Malformed artifact file. Carries the path and byte offset when known."""

    def __init__(self, message, path=None, offset=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if offset is not None:
                where += f" @ byte {offset}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.offset = offset


class UsageError(TGIError):
    """Bad command line or config value."""
