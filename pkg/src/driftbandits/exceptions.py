"""Exception types shared across the package."""


class DriftBanditsError(Exception):
    """Base class for all library errors."""


class InvalidInstance(DriftBanditsError):
    """A problem instance fails structural validation."""


class InfeasibleInstance(DriftBanditsError):
    """A linear program has an empty feasible region."""


class UnboundedProgram(DriftBanditsError):
    """A linear program is unbounded (cannot happen on the simplex polytopes
    built by this package; kept as a solver-level safety net)."""


class AssumptionViolated(DriftBanditsError):
    """A separation constant required by the control policies is not strictly
    positive, or the restricted basis system is malformed."""

    def __init__(self, name: str, value: float | None = None):
        self.name = name
        self.value = value
        detail = f" (value {value!r})" if value is not None else ""
        super().__init__(f"assumption violated: {name}{detail}")


class OracleScaleExceeded(DriftBanditsError):
    """The brute-force vertex oracle was asked for an instance beyond its
    supported size."""


class UnknownFixture(DriftBanditsError):
    """A fixture id does not name a built-in test instance."""


class IllegalArm(DriftBanditsError):
    """A policy chose an arm that is not currently allowed."""


class UnclassifiableSupport(DriftBanditsError):
    """A single-resource LP solution does not match any of the three support
    patterns the threshold policy knows how to play."""


class MarginViolated(DriftBanditsError):
    """A knapsack instance does not satisfy the margin conditions required by
    the embedding into the drift model."""


class DegenerateFit(DriftBanditsError):
    """A scaling-law fit cannot be computed from the given points."""


class SweepError(DriftBanditsError):
    """A sweep configuration is invalid."""
