"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class PcsError(Exception):
    exit_code = 1


class ParseError(PcsError, ValueError):
    """Malformed input file (bad number, ragged rows)."""

    exit_code = 2


class ValidationError(PcsError, ValueError):
    """Input parsed but violates a data or configuration contract."""

    exit_code = 3

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = tuple(rows) if rows is not None else ()


class CapExceededError(PcsError):
    """An enumeration would exceed its configured cap."""

    exit_code = 4


class DegenerateError(PcsError):
    """Numerically degenerate configuration (singular systems or matrices)."""

    exit_code = 5
