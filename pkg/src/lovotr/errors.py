"""Exception types shared across the package."""


class OracleError(RuntimeError):
    """A component oracle returned a non-finite value."""

    def __init__(self, index, x, value):
        super().__init__(
            f"component {index} returned non-finite value {value!r} at {x!r}"
        )
        self.index = index
        self.x = x
        self.value = value


class GeometryError(RuntimeError):
    """The sample set is too degenerate to support interpolation."""


class PointRejectedError(GeometryError):
    """A candidate point carries no interpolation information.

    Raised by the sample-set exchange when every admissible replacement has a
    negligible Lagrange weight at the candidate; the caller should take a
    geometry-improvement step instead.
    """


class BudgetExceededError(RuntimeError):
    """Performing the requested evaluation would exceed the evaluation budget."""
