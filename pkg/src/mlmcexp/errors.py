"""Exception types raised across the package."""


class MlmcExpError(Exception):
    """Base class for all package errors."""


class DimensionError(MlmcExpError, ValueError):
    pass


class InvalidValueError(MlmcExpError, ValueError):
    pass


class DegenerateScaleError(MlmcExpError, ValueError):
    """Raised when no default scale can be derived (e.g. the zero matrix)."""


class ConfigurationError(MlmcExpError, ValueError):
    pass


class UnsupportedInputError(MlmcExpError, ValueError):
    pass


class FormatError(MlmcExpError, ValueError):
    """Malformed input file. ``line`` is 1-based, or None when not line-specific."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class NonConvergenceError(MlmcExpError, RuntimeError):
    """The adaptive driver hit its level cap. ``result`` holds the partial estimate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
