"""Exception hierarchy shared by all overlaprel modules."""


class OverlapRelError(Exception):
    """Base class for every error raised by this package."""


class FormatError(OverlapRelError, ValueError):
    """A volume file could not be parsed.

    Parameters
    ----------
    message : str
        Human readable description.
    path : str, optional
        File being parsed.
    offset : int, optional
        Byte offset (or line number for text formats) where parsing failed.
    field : str, optional
        Header field or record that was invalid.
    """

    def __init__(self, message, *, path=None, offset=None, field=None):
        self.path = None if path is None else str(path)
        self.offset = offset
        self.field = field
        where = []
        if self.path is not None:
            where.append(self.path)
        if field is not None:
            where.append(f"field {field}")
        if offset is not None:
            where.append(f"offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DimensionMismatchError(OverlapRelError, ValueError):
    """Two volumes that must share a grid do not."""


class DegenerateInputError(OverlapRelError, ValueError):
    """The input makes a statistic undefined (empty pair, zero variance)."""


class ConvergenceError(OverlapRelError, ArithmeticError):
    """An iterative routine hit its iteration cap."""
