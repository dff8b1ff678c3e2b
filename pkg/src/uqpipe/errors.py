"""Exception taxonomy shared by the library and the command line tool.

Three failure classes map onto the CLI exit codes: configuration errors
(exit 2), data errors (exit 3) and numerical errors (exit 4).
"""
from __future__ import annotations


class UqpipeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(UqpipeError):
    """Invalid configuration: unknown option, bad parameter, misuse."""


class DataError(UqpipeError):
    """Invalid data: domain violations, degenerate or malformed samples."""


class NumericalError(UqpipeError):
    """Numerical failure: factorization or optimization did not succeed."""
