"""Exception types raised by the hir package."""


class HirError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(HirError, ValueError):
    """A data file line could not be parsed."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class ValidationError(HirError, ValueError):
    """Input data violates a structural invariant (overlap, duplicates, coverage)."""


class EvaluationError(HirError):
    """A metric could not be computed for the given inputs."""


class ConfigurationError(HirError):
    """The experiment configuration or data directory is unusable."""
