"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GascError(Exception):
    exit_code = 1


class InputError(GascError):
    """Bad input data or arguments (unreadable file, malformed record, ...)."""

    exit_code = 2


class ModelError(GascError):
    """Numerical or model-level failure (degenerate state, dimension mismatch)."""

    exit_code = 3


class PartialFailure(GascError):
    exit_code = 4
