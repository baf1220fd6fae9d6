"""Exceptions raised when reading the binary dataset and checkpoint formats."""


class FormatError(ValueError):
    """A file does not follow the expected binary layout."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class PayloadSizeError(FormatError):
    """Header-declared shapes disagree with the number of bytes that follow."""


class NonFiniteError(FloatingPointError):
    """NaN or Inf appeared during a forward or backward pass."""
