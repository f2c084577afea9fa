"""Exception types shared across the package."""


class LinattError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(LinattError):
    """Shape, rank, or extent mismatch. Messages name the offending shapes."""


class NumericError(LinattError):
    """Non-finite input or invalid scalar factor."""


class BudgetError(LinattError):
    """A simulated memory budget would be exceeded by a pending allocation."""

    def __init__(self, required_bytes: int, budget_bytes: int):
        self.required_bytes = required_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"allocation would need {required_bytes} bytes, "
            f"exceeding the {budget_bytes}-byte budget"
        )


class TensorFileError(LinattError):
    """Malformed tensor file. Messages name the byte offset of the problem."""
