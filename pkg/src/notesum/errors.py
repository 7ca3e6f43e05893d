"""Exception hierarchy shared by all notesum modules.

The CLI maps these onto exit codes: configuration problems exit 1, data
problems exit 2, everything else (internal/backend) exits 3.
"""


class NotesumError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NotesumError):
    """Invalid configuration: bad probability, missing path, unknown scorer."""


class TemplateError(ConfigurationError):
    """An instruction template could not be instantiated (missing placeholder value)."""


class DataError(NotesumError):
    """Malformed or inconsistent input data (bad record, missing section, ...)."""


class ParseError(DataError):
    """A line-delimited file could not be parsed; carries file and line context."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class InternalError(NotesumError):
    """A violated internal contract, e.g. overlapping spans reaching the masker."""


class BackendError(NotesumError):
    """A pluggable backend (language model, embedder) broke its interface contract."""
