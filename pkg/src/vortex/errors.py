"""Exception families.

The CLI maps each family to a distinct exit code, so errors raised by the
library should use the narrowest class that applies.
"""


class VortexError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(VortexError):
    """A binary interchange file is malformed."""


class BadMagicError(FormatError):
    """The file does not start with the expected magic bytes."""


class VersionMismatchError(FormatError):
    """The file declares a format version this reader does not support."""


class TruncatedPayloadError(FormatError):
    """The file ended in the middle of a record."""


class ValidationError(VortexError):
    """Input data violates a documented invariant (shape, finiteness, ...)."""


class ManifestError(VortexError):
    """A split manifest is inconsistent or references unknown entities."""


class ConvergenceError(VortexError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap
