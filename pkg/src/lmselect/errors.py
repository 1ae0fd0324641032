"""Exception types shared across the package."""

from __future__ import annotations


class LmsError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(LmsError):
    """A file could not be parsed; carries the location of the offending record."""

    def __init__(self, path: str, lineno: int | None, message: str):
        self.path = str(path)
        self.lineno = lineno
        self.message = message
        where = f"{self.path}:{lineno}" if lineno is not None else self.path
        super().__init__(f"{where}: {message}")


class DataError(LmsError):
    """Inputs are structurally valid but violate a data contract."""


class ContractError(LmsError):
    """An API was called with arguments that violate its contract."""
