"""Exception hierarchy shared by the library and the command line."""


class LeafVitError(Exception):
    """Base class; ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 2


class ConfigError(LeafVitError, ValueError):
    exit_code = 1


class DataError(LeafVitError, ValueError):
    exit_code = 2


class ParseError(DataError):
    """Malformed binary or text input. ``offset`` is a byte offset, or a line number for text."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class ShapeError(LeafVitError, ValueError):
    exit_code = 3


class StageError(LeafVitError):
    """A pipeline stage failed; carries the stage name and the underlying error's exit code."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
