"""Exception hierarchy; the CLI maps each branch to an exit code."""


class SamplexError(Exception):
    """Base class for all package errors."""


class InputError(SamplexError, ValueError):
    """Malformed or inconsistent input (CLI exit code 1)."""


class DimensionMismatchError(InputError):
    pass


class DegenerateFitError(InputError):
    """Too few points or a zero-spread coordinate for a fit."""


class NumericalError(SamplexError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable values (exit code 2)."""


class FlatObjectiveError(SamplexError):
    """The delta-fit objective is constant over the whole search range (exit code 3)."""
