"""Exception types raised across the package.

Grouping them here keeps error handling in the command line front end to a
couple of isinstance checks instead of imports from every module.
"""


class IotDetectError(Exception):
    """Base class for every error this package raises on purpose."""


class CaptureError(IotDetectError):
    """Problem with a capture file. Carries the byte offset when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class MalformedHeader(CaptureError):
    """Capture header is not something we can read."""


class TruncatedRecord(CaptureError):
    """Capture ends in the middle of a record."""


class MalformedRecord(CaptureError):
    """A record is present but its fields do not parse."""


class UnsortedInput(IotDetectError):
    """Packets were expected in timestamp order and were not."""


class SchedulingInfeasible(IotDetectError):
    """Attack durations do not fit inside the capture length."""


class MissingLabel(IotDetectError):
    """A labeled dataset was requested from packets that carry no labels."""


class TooFewRows(IotDetectError):
    """Not enough rows to do the requested statistics."""


class DimensionMismatch(IotDetectError):
    """Arrays that must agree on their first axis do not."""


class ArityMismatch(IotDetectError):
    """Model was given feature vectors of a different width than it was trained on."""


class DegenerateLabels(IotDetectError):
    """Training labels contain a single class where two are required."""


class DegenerateSplit(IotDetectError):
    """A train/test split left one side without both classes."""


class LengthMismatch(IotDetectError):
    """Prediction and truth vectors differ in length."""


class EmptyNode(IotDetectError):
    """Impurity of an empty sample set is undefined."""


class GateViolation(IotDetectError):
    """An evaluation metric fell outside a configured acceptance range."""
