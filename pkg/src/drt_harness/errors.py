"""Exception types shared across the harness."""


class HarnessError(Exception):
    """Base class for all harness errors."""


class ParseError(HarnessError):
    """A file failed to parse; carries the offending location."""

    def __init__(self, message: str, *, path=None, line: int | None = None,
                 field: str | None = None):
        self.path = path
        self.line = line
        self.field = field
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)


class AudioError(HarnessError):
    """Invalid audio input for a signal operation."""


class BalanceError(HarnessError):
    """A block-construction balance constraint cannot be satisfied."""


class ProtocolError(HarnessError):
    """An event is illegal in the session's current state."""


class ServiceError(HarnessError):
    """Service-level failure with a machine-readable code."""

    def __init__(self, code: str, message: str, status: int = 400):
        self.code = code
        self.status = status
        super().__init__(message)
