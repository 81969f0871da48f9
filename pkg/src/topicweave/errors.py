"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input: malformed files, out-of-range parameters, broken contracts.

    The CLI maps this to exit code 2; everything else raised during a run
    maps to exit code 1.
    """
