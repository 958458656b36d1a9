"""Exception hierarchy. Each family maps to one CLI exit code."""


class ScadaFSError(Exception):
    exit_code = 1


class ConfigError(ScadaFSError, ValueError):
    """Bad argument, configuration key or configuration value."""

    exit_code = 2


class DataError(ScadaFSError):
    """Input data violates a structural or statistical precondition."""

    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateLabelsError(DataError):
    def __init__(self, message="degenerate labels"):
        super().__init__(message)


class InsufficientClassSupport(DataError):
    def __init__(self, message="insufficient class support"):
        super().__init__(message)


class StageError(ScadaFSError):
    """A pipeline stage failed; wraps the underlying cause."""

    exit_code = 4

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
