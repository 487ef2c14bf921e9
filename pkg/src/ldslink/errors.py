"""Exception types shared across the package."""


class DataError(Exception):
    """Malformed or inconsistent input data (KB, corpus, params)."""


class GuardExceededError(Exception):
    """A brute-force oracle was asked for more work than its guard allows."""
