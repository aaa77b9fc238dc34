class DataError(ValueError):
    """Bad input data: missing files, malformed manifests, shape or kind mismatches."""


class NumericalError(RuntimeError):
    """Numerical failure: non-finite values or solver breakdown."""
