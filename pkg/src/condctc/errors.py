"""Exception types shared across the toolkit."""


class InfeasibleTargetError(ValueError):
    """The target sequence cannot be aligned within the available frames."""


class SearchSpaceError(ValueError):
    """A brute-force enumeration would exceed its size guard."""


class NumericError(RuntimeError):
    """A computation produced non-finite values (carries layer/epoch info)."""


class DataError(Exception):
    """A required artifact is missing or malformed (file, model, dataset)."""
