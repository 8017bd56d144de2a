"""Shared exception hierarchy."""


class ContactTrackError(Exception):
    """Base class for all package errors."""


class InputFormatError(ContactTrackError):
    """Malformed input file or stream record."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
            if line is not None:
                loc = f"{path}:{line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class ConfigError(ContactTrackError):
    """Invalid configuration value or file."""
