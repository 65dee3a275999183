"""Exception classes shared across the package.

The CLI maps these onto exit codes: InputError -> 2, NumericalError -> 3,
InvariantViolation -> 4.
"""


class InputError(ValueError):
    """Malformed or inconsistent user input (files, configs, shapes)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (singular system, non-finite values)."""


class InvariantViolation(RuntimeError):
    """An internal invariant was broken; indicates a bug, not bad input."""
