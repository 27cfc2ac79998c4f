"""
Error types shared by the DeLi modules.

All of them derive from ValueError as well, so numeric callers can keep
catching the builtin.
"""


class DeliError(Exception):
    """Base class of every error raised by delipy."""


class GeometryError(DeliError, ValueError):
    """Invalid point/line input or a parameter outside the line domain."""


class ProfileError(DeliError, ValueError):
    """Unknown profile family, invalid parameters or a non-finite volume."""


class NeighbourhoodConfigError(DeliError, ValueError):
    """A parameter combination that does not match a row of the version table."""


class LiftError(DeliError, ValueError):
    """
    One or more point records could not be lifted to segments.

    record_indices : positions (0-based) of the offending records
    """

    def __init__(self, message, record_indices=()):
        super().__init__(message)
        self.record_indices = list(record_indices)


class DataFormatError(DeliError, ValueError):
    """
    A dataset file could not be parsed.

    line_number : 1-based line of the offending row (None when not line related)
    """

    def __init__(self, message, path=None, line_number=None):
        location = ''
        if path is not None:
            location = str(path)
            if line_number is not None:
                location += ':{}'.format(line_number)
            location += ': '
        super().__init__(location + message)
        self.path = path
        self.line_number = line_number
