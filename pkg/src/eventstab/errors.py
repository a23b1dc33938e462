"""Typed errors raised across the package.

Every error carries a short ``kind`` string so the CLI can print
``error: <kind>: <detail>`` and pick an exit code without string matching.
"""


class EventStabError(Exception):
    kind = "Error"
    exit_code = 1

    def __init__(self, detail="", **info):
        super().__init__(detail)
        self.detail = detail
        self.info = info


class FormatError(EventStabError):
    """Malformed input data (exit code 3)."""

    exit_code = 3


class InvariantError(EventStabError):
    """Data or configuration violates a model invariant (exit code 4)."""

    exit_code = 4


def _kind(name, base):
    return type(name, (base,), {"kind": name})


# core model
UnsortedTimestamps = _kind("UnsortedTimestamps", InvariantError)
OutOfBoundsCoordinate = _kind("OutOfBoundsCoordinate", InvariantError)
InvalidPolarity = _kind("InvalidPolarity", InvariantError)
TimestampOutsideSpan = _kind("TimestampOutsideSpan", InvariantError)

# io
CoordinateOverflow = _kind("CoordinateOverflow", FormatError)
BadMagic = _kind("BadMagic", FormatError)
BadVersion = _kind("BadVersion", FormatError)
TruncatedPayload = _kind("TruncatedPayload", FormatError)
ParseError = _kind("ParseError", FormatError)
NonMonotonicTimestamps = _kind("NonMonotonicTimestamps", FormatError)
UnknownKey = _kind("UnknownKey", InvariantError)
TypeMismatch = _kind("TypeMismatch", InvariantError)
InvariantViolation = _kind("InvariantViolation", InvariantError)

# imu / compensation / sampling
NonOrthonormalRotation = _kind("NonOrthonormalRotation", InvariantError)
SpanOutsideSequence = _kind("SpanOutsideSequence", InvariantError)
EmptySequence = _kind("EmptySequence", InvariantError)
TangentDomain = _kind("TangentDomain", InvariantError)
ImuDoesNotCoverEvents = _kind("ImuDoesNotCoverEvents", InvariantError)
KExceedsFrameCount = _kind("KExceedsFrameCount", InvariantError)
