"""Exception types shared across the package."""


class LdaError(Exception):
    """Base class for all errors raised by nomadlda."""


class InvalidDistributionError(LdaError, ValueError):
    """Weights are negative or carry no mass."""


class ContractError(LdaError, ValueError):
    """An argument lies outside the range an operation accepts."""


class ConsistencyError(LdaError, RuntimeError):
    """Sufficient statistics disagree with the topic assignments."""


class CorpusFormatError(LdaError, ValueError):
    """A bag-of-words file is malformed or fails validation."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class CheckpointError(LdaError, IOError):
    """A checkpoint file cannot be decoded."""
