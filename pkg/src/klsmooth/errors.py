"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class DimensionMismatchError(ValidationError):
    """Raised when two vectors that must share a dimension do not."""


class SizeCapError(RuntimeError):
    """Raised when an exact enumeration would exceed its configured cap.

    Attributes
    ----------
    count : int
        The composition count that triggered the error.
    cap : int
        The configured cap.
    """

    def __init__(self, count: int, cap: int):
        super().__init__(f"exact enumeration needs {count} compositions, cap is {cap}")
        self.count = count
        self.cap = cap


class CapExceededError(RuntimeError):
    """Raised when a monotone threshold search hits its sample-size cap.

    Attributes
    ----------
    cap : int
        The largest sample size inspected before giving up.
    """

    def __init__(self, cap: int, what: str = "threshold search"):
        super().__init__(f"{what} did not terminate below n = {cap}")
        self.cap = cap
