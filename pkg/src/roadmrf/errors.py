"""Exception hierarchy shared across the pipeline.

Exit-code contract for the CLI: 1 = usage error, 2 = data error,
3 = numerical failure.
"""


class RoadMrfError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 2


class UsageError(RoadMrfError):
    """Bad flag value or invalid invocation."""

    exit_code = 1


class DataError(RoadMrfError):
    """Malformed or inconsistent input data."""

    exit_code = 2


class ManifestFormatError(DataError):
    """Manifest file exists but cannot be interpreted."""


class MissingFileError(DataError):
    """A file referenced by a manifest does not exist."""


class CountMismatchError(DataError):
    """Mask list length does not match the frame list."""


class NumericalError(RoadMrfError):
    """A numeric procedure failed (degenerate geometry, no solution)."""

    exit_code = 3


class NoVanishingPointError(NumericalError):
    """No usable line segments and degenerate mask boundaries."""
