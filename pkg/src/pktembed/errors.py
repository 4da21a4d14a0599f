"""Exception types shared across the package."""


class PktembedError(Exception):
    """Base class for errors raised by pktembed."""


class FormatError(PktembedError, ValueError):
    """A file does not conform to its on-disk format."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncatedError(FormatError):
    """A file ended before a complete structure could be read."""

    def __init__(self, message, offset=None, index=None):
        super().__init__(message, offset=offset)
        self.index = index


class ConsistencyError(PktembedError, ValueError):
    """Artifacts disagree on shared parameters (n, vocabulary size, dimension)."""


class DegenerateStreamError(PktembedError, ValueError):
    """A token stream contains no trainable skip-gram window."""


class DivergenceError(PktembedError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class PipelineError(PktembedError, RuntimeError):
    """A pipeline phase failed; the message names the phase and file."""
