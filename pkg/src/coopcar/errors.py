"""Exception hierarchy shared by the codecs, the simulator and the scenario loader."""

from __future__ import annotations


class CoopCarError(Exception):
    """Base class for every error raised by this package."""


class DecodeError(CoopCarError, ValueError):
    """A byte string or sentence could not be decoded."""


class LengthError(DecodeError):
    pass


class FramingError(DecodeError):
    pass


class ChecksumError(DecodeError):
    def __init__(self, message: str, consumed: int = 0) -> None:
        super().__init__(message)
        # bytes a stream reader should drop before retrying
        self.consumed = consumed


class UnsupportedError(DecodeError):
    pass


class InconsistencyError(DecodeError):
    pass


class FieldRangeError(CoopCarError, ValueError):
    """A field value is outside its declared range."""

    def __init__(self, field: str, value: object, message: str | None = None) -> None:
        super().__init__(message or f"{field}={value!r} out of range")
        self.field = field
        self.value = value


class DecodeRangeError(FieldRangeError, DecodeError):
    """A received field is outside its range; catchable as either parent."""


class SizeError(CoopCarError, ValueError):
    pass


class InvalidPoseError(CoopCarError, ValueError):
    pass


class MissingPositionError(CoopCarError, ValueError):
    pass


class TraceError(CoopCarError, ValueError):
    """Trace file failed validation; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None) -> None:
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class GeometryError(CoopCarError, ValueError):
    pass


class StepError(CoopCarError, ValueError):
    pass


class RegistrationError(CoopCarError, KeyError):
    pass


class OrderingError(CoopCarError, RuntimeError):
    pass


class ScenarioError(CoopCarError, ValueError):
    """Scenario validation failure; ``field`` is a dotted path when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None) -> None:
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
