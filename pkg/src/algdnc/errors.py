"""Exception types shared across the toolkit."""


class DncError(Exception):
    """Base class for every error raised by algdnc."""


class UnboundedResult(DncError):
    """An operation has no finite result (a server is not stable)."""


class UnsupportedShape(DncError):
    """The operands are outside the curve shapes an operation supports."""


class ParseError(DncError):
    """Malformed text input. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(DncError):
    """A structural invariant does not hold. ``invariant`` names it."""

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class ConnectivityLost(DncError):
    """Cycle breaking removed every route between some device pair."""


class NoRoutableFlows(DncError):
    """No device pair is connected by a server path."""


class TooLarge(DncError):
    """An enumeration would exceed its configured budget."""
