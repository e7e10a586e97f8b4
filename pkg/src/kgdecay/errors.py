"""Exception types shared across the package."""


class KGDecayError(Exception):
    """Base class for all package errors."""


class ConditionViolated(KGDecayError):
    """A cutoff profile breaks one of its pointwise sign conditions."""

    def __init__(self, node: int, which_condition: str, value: float):
        self.node = node
        self.which_condition = which_condition
        self.value = value
        super().__init__(
            f"cutoff condition '{which_condition}' violated at node {node} "
            f"(value {value:.3e})"
        )


class GridTooSmall(KGDecayError):
    pass


class SupportTooLarge(KGDecayError):
    pass


class NewtonDiverged(KGDecayError):
    def __init__(self, node: int, iteration: int, residual: float):
        self.node = node
        self.iteration = iteration
        self.residual = residual
        super().__init__(
            f"nonlinear solve stalled at node {node} after {iteration} sweeps "
            f"(residual {residual:.3e})"
        )


class NonFinite(KGDecayError):
    def __init__(self, node: int, t: float):
        self.node = node
        self.t = t
        super().__init__(f"non-finite field value at node {node}, t={t:.6g}")


class ProfileOutOfRange(KGDecayError):
    pass


class NoSnapshot(KGDecayError):
    pass


class NonpositiveTime(KGDecayError):
    pass


class TraceIncomplete(KGDecayError):
    pass


class SnapshotsTooSparse(KGDecayError):
    pass


class DegenerateDenominator(KGDecayError):
    pass


class IntervalUncovered(KGDecayError):
    pass


class BadTheta(KGDecayError):
    pass


class TooFewPoints(KGDecayError):
    pass


class DegenerateSeries(KGDecayError):
    pass


class ThresholdNeverReached(KGDecayError):
    """Smallness threshold never attained within the run (reported, not fatal)."""

    def __init__(self, achieved_minimum: float):
        self.achieved_minimum = achieved_minimum
        super().__init__(
            f"threshold never reached; achieved minimum {achieved_minimum:.3e}"
        )


class TimeTooSmall(KGDecayError):
    pass


class NotIncoming(KGDecayError):
    pass


class ConfigInvalid(KGDecayError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"invalid config field '{field}': {reason}")
