"""Exception hierarchy shared by every subpackage.

The CLI maps these onto exit codes, so raise the most specific one.
"""


class GmsdError(Exception):
    exit_code = 1


class ConfigurationError(GmsdError, ValueError):
    """Invalid shapes, widths, alphabets or config values."""

    exit_code = 2


class UsageError(GmsdError, RuntimeError):
    """An API used out of its contract (e.g. backward on a detached tensor)."""

    exit_code = 2


class PreconditionError(GmsdError, ValueError):
    """Inputs that violate a documented precondition (e.g. unpadded image)."""

    exit_code = 3


class FormatError(GmsdError, ValueError):
    """Malformed checkpoint, bitstream, image or CSV data."""

    exit_code = 3


class DecodeError(FormatError):
    """A bitstream could not be decoded; ``offset`` is the failing byte position."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ModelMismatchError(FormatError):
    """Bitstream header does not belong to the supplied checkpoint."""


class NumericalError(GmsdError, ArithmeticError):
    """Repeated non-finite losses or other numerical breakdown."""

    exit_code = 4
