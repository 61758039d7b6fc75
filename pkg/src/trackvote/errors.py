"""Exception types raised across the toolkit."""


class TrackvoteError(Exception):
    """Base class for all toolkit errors."""


class OutOfRange(TrackvoteError, ValueError):
    """A value lies outside its permitted range."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(TrackvoteError, ValueError):
    """Malformed input text."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ParseError):
    """Records parse individually but disagree with each other."""


class EmptyScores(TrackvoteError, ValueError):
    pass


class DanglingReference(TrackvoteError, KeyError):
    pass


class PartitionError(TrackvoteError, ValueError):
    """Tracklets do not cover every detection exactly once."""


class NoAnnotations(TrackvoteError, ValueError):
    pass


class InvalidK(TrackvoteError, ValueError):
    pass


class ConfigError(TrackvoteError, ValueError):
    pass


class DegenerateClass(UserWarning):
    """Issued when a split leaves one side of some class empty."""
