"""Exception types shared across the simulator."""


class DgFeFETError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DgFeFETError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class VbgRangeError(DgFeFETError, ValueError):
    """A back-gate voltage or the gain it induces is outside the admissible range."""


class DimensionError(DgFeFETError, ValueError):
    """Array or vector shapes do not agree."""


class StateError(DgFeFETError, RuntimeError):
    """A protocol step was called without its prerequisite state."""


class DecodeError(DgFeFETError, ArithmeticError):
    """Population decoding had no drive to normalise by."""


class ConfigError(DgFeFETError, ValueError):
    """Invalid or unknown run-configuration entry."""


class ParseError(DgFeFETError, ValueError):
    """Malformed binary input. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ChecksumError(DgFeFETError, ValueError):
    """Checkpoint body does not match its stored checksum."""


class VersionError(DgFeFETError, ValueError):
    """Checkpoint format version is not supported."""
