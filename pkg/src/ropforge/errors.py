"""Exception types shared across the toolkit."""


class RopforgeError(Exception):
    """Base class for all toolkit errors."""


class NotElfError(RopforgeError):
    """Input does not start with the ELF magic."""


class UnsupportedError(RopforgeError):
    """ELF is valid but not 32-bit little-endian x86."""


class TruncatedError(RopforgeError):
    """A declared header or table range extends past the end of the file."""


class SymbolNotFoundError(RopforgeError):
    """No symbol with the requested name."""


class AmbiguousSymbolError(RopforgeError):
    """The requested name maps to more than one address."""


class OutOfRangeError(RopforgeError):
    """Virtual address range is unmapped or straddles sections."""


class NoCandidateError(RopforgeError):
    """No frame-relative buffer address computation found in the function body."""


class MissingCleanupGadgetError(RopforgeError):
    """A non-final call passes arguments but no pop-ret gadget of that arity exists."""


class UnsatisfiableArityError(RopforgeError):
    """A call passes more arguments than the configured maximum."""


class LengthTooLargeError(RopforgeError):
    """Requested cyclic pattern exceeds the unique-window capacity of the alphabet."""


class ChainFileError(RopforgeError):
    """Chain description file is malformed or references unknown keys."""
