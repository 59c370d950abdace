"""Exception types shared across modules; the CLI maps them to exit codes."""


class DataError(Exception):
    """Malformed or inconsistent input data (CLI exit code 2)."""


class InternalCheckError(Exception):
    """An internal invariant was violated (CLI exit code 3)."""
