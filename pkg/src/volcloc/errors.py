"""Exception hierarchy shared by every volcloc module.

Each exception's class name doubles as the machine-readable error code that
the CLI prints on failure.
"""


class VolcLocError(Exception):
    """Base class for all library errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class OutOfRange(VolcLocError, ValueError):
    pass


class BadLength(VolcLocError, ValueError):
    pass


class BadBand(VolcLocError, ValueError):
    pass


class ShapeMismatch(VolcLocError, ValueError):
    pass


class EmptySequence(VolcLocError, ValueError):
    pass


class MissingCache(VolcLocError, ValueError):
    pass


class BadConfig(VolcLocError, ValueError):
    pass


class BadInput(VolcLocError, ValueError):
    pass


class BadWindows(VolcLocError, ValueError):
    pass


class BadVelocities(VolcLocError, ValueError):
    pass


class TooFewStations(VolcLocError, ValueError):
    pass


class OutOfFrame(VolcLocError, ValueError):
    pass


class EmptyList(VolcLocError, ValueError):
    pass


class TooFewEvents(VolcLocError, ValueError):
    pass


class EmptySplit(VolcLocError, ValueError):
    pass


class DegenerateTargets(VolcLocError, ValueError):
    pass


class EmptySpace(VolcLocError, ValueError):
    pass


class FormatError(VolcLocError, ValueError):
    """A binary file does not match its declared layout."""


class DivergedLoss(VolcLocError, ArithmeticError):
    """Training loss became non-finite.

    ``snapshot`` holds the last finite parameter set, ``history`` the epochs
    completed before divergence.
    """

    def __init__(self, message, snapshot=None, history=None):
        super().__init__(message)
        self.snapshot = snapshot
        self.history = history
