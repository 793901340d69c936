"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto the
documented process status: 2 for configuration problems, 3 for numerical
failures, 4 for exhausted budgets.
"""


class BersError(Exception):
    exit_code = 3


class ConfigError(BersError):
    exit_code = 2


class NumericError(BersError):
    exit_code = 3


class BudgetExceeded(BersError):
    exit_code = 4


class DegenerateMetric(NumericError):
    pass


class CoincidentValues(NumericError):
    pass


class OrientationViolation(NumericError):
    pass


class ConstructionFailure(NumericError):
    pass


class NonConvergent(NumericError):
    pass


class InsufficientOverlap(NumericError):
    pass


class NotContracting(NumericError):
    pass


class MaxIterExceeded(NumericError):
    pass


class DegenerateNormalization(NumericError):
    pass


class DegenerateProbes(NumericError):
    pass


class EquivarianceViolation(NumericError):
    pass


class NotPositive(NumericError):
    def __init__(self, message, worst_index=None, margin=None):
        super().__init__(message)
        self.worst_index = worst_index
        self.margin = margin


class ChartMismatch(NumericError):
    pass


class ConsistencyFailure(NumericError):
    pass


class RouteMismatch(NumericError):
    pass


class CriticalPoint(NumericError):
    pass


class PoleEncountered(NumericError):
    pass


class SingularShift(NumericError):
    pass


class NotPositiveDefinite(NumericError):
    pass


class DegenerateChart(NumericError):
    pass


class FlowEscape(NumericError):
    pass


class AliasingWarningError(NumericError):
    pass
