"""Exception types raised by fuseprf.

Every error derives from ``FuseprfError`` and from the builtin a caller would
naturally catch (``ValueError`` for bad input, ``LookupError`` for missing ids).
"""

from typing import Optional


class FuseprfError(Exception):
    """Base class for all fuseprf errors."""


class FormatError(FuseprfError, ValueError):
    """A file does not follow its declared grammar."""

    def __init__(self, message: str, path: Optional[str] = None, line_no: Optional[int] = None):
        self.path = path
        self.line_no = line_no
        location = ""
        if path is not None:
            location = f"{path}:{line_no}: " if line_no is not None else f"{path}: "
        elif line_no is not None:
            location = f"line {line_no}: "
        super().__init__(f"{location}{message}")


class DuplicateIdError(FormatError):
    """An id occurs twice where ids must be unique."""

    def __init__(self, record_id: str, path: Optional[str] = None, line_no: Optional[int] = None):
        self.record_id = record_id
        super().__init__(f"duplicate id '{record_id}'", path, line_no)


class GradeRangeError(FormatError):
    """A relevance grade lies outside 0..3."""


class DimensionMismatchError(FuseprfError, ValueError):
    """A vector does not have the expected dimension."""


class MissingIdError(FuseprfError, LookupError):
    """A passage or query id is not present where it is required."""

    def __init__(self, record_id: str, what: str = "id"):
        self.record_id = record_id
        super().__init__(f"missing {what} '{record_id}'")

    def __str__(self) -> str:
        return self.args[0]


class EmptyInputError(FuseprfError, ValueError):
    """An operation received an empty input it cannot work with."""


class QueryMismatchError(FuseprfError, ValueError):
    """Two ranked lists belong to different queries."""


class ConfigError(FuseprfError, ValueError):
    """A configuration is invalid."""


class IndexFormatError(FuseprfError, ValueError):
    """A persisted index or store cannot be read."""
