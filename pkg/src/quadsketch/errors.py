"""Exception types shared across the package."""


class QuadsketchError(Exception):
    """Base class for domain errors raised by this package."""


class GraphFormatError(QuadsketchError):
    """Malformed graph or matrix file; carries a 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TooLargeError(QuadsketchError):
    """Instance exceeds the hard cap of an exhaustive or dense method."""


class SketchConsistencyError(QuadsketchError):
    """Internal invariant of a sketch was violated while answering a query.

    Indicates either a bug or a query outside the model assumptions
    (e.g. a query separating two vertices joined by contracted edges).
    """
