"""Error taxonomy shared across the package.

Each exception carries a stable ``code`` string so the CLI and the HTTP
service can map failures onto exit codes / status codes without string
matching on messages.
"""


class SurfbeamError(Exception):
    """Base class; ``code`` identifies the failure class."""

    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class ConfigError(SurfbeamError):
    """Invalid configuration or parameters (CLI exit code 2)."""

    code = "CONFIG"


class DataError(SurfbeamError):
    """Invalid or corrupt data at runtime (CLI exit code 3)."""

    code = "DATA"


# --- grid / field construction -------------------------------------------------

class UnderSampled(ConfigError):
    code = "UNDER_SAMPLED"


class NonPositiveStep(ConfigError):
    code = "NON_POSITIVE_STEP"


class ApertureExceedsGrid(ConfigError):
    code = "APERTURE_EXCEEDS_GRID"


class WarpTooLarge(ConfigError):
    code = "WARP_TOO_LARGE"


# --- persistence ----------------------------------------------------------------

class IoFailure(DataError):
    code = "IO_FAILURE"


class InconsistentManifest(DataError):
    code = "INCONSISTENT_MANIFEST"


class ChecksumMismatch(DataError):
    code = "CHECKSUM_MISMATCH"


class VersionUnsupported(DataError):
    code = "VERSION_UNSUPPORTED"


class IndexOutOfRange(DataError):
    code = "INDEX_OUT_OF_RANGE"


class MissingField(DataError):
    code = "MISSING_FIELD"


# --- adjustment -----------------------------------------------------------------

class DelayTooLarge(ConfigError):
    code = "DELAY_TOO_LARGE"


class SilentReference(DataError):
    code = "SILENT_REFERENCE"


class GridMismatch(DataError):
    code = "GRID_MISMATCH"
