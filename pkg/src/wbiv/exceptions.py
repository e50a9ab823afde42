"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid user input: bad shapes, labels, options, or file contents."""


class NumericalError(RuntimeError):
    """Numerical failure: singular or near-singular linear systems."""
