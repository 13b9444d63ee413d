"""Exceptions raised by the credit score stacking toolkit."""

from .const import EXIT_DATA, EXIT_INTERNAL, EXIT_USAGE


class CreditStackError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_INTERNAL


class ConfigError(CreditStackError, ValueError):
    """Invalid configuration, parameters or command-line usage."""

    exit_code = EXIT_USAGE


class DataError(CreditStackError, ValueError):
    """Input data cannot be processed as requested."""

    exit_code = EXIT_DATA


class CsvParseError(DataError):
    """Malformed CSV input."""


class UnknownColumnError(DataError):
    """A referenced column does not exist."""

    def __init__(self, column: str):
        """Initialize with the offending column name."""
        super().__init__(f"unknown column '{column}'")
        self.column = column


class UnknownClassError(DataError):
    """A label value is not part of the class codebook."""

    def __init__(self, value: str):
        """Initialize with the offending label value."""
        super().__init__(f"unknown class '{value}'")
        self.value = value
