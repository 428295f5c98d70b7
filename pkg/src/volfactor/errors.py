"""Exception hierarchy shared across the package.

Every error carries a ``module`` attribute naming the subsystem that
raised it, so the CLI can report "which module, which rule" on failure.
"""


class VolfactorError(Exception):
    """Base class for all package errors."""

    module = "volfactor"

    def __init__(self, message, *, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module


class InvalidOrderError(VolfactorError):
    """Filter order is not a positive integer (or exceeds the supported cap)."""

    module = "filter_design"


class InvalidCutoffError(VolfactorError):
    """Cutoff frequency outside the open interval (0, 0.5) cycles/sample."""

    module = "filter_design"


class ConjugateAsymmetryError(VolfactorError):
    """A pole set is not closed under complex conjugation."""

    module = "filter_design"


class InstabilityError(VolfactorError):
    """Denominator has a root on or outside the unit circle."""

    module = "filter_design"


class ConstraintViolationError(VolfactorError):
    """Lag-weight constraint violated (negative weight, mass >= 1, or no mass).

    Carries a :class:`~volfactor.state_space.WeightReport` in ``report``.
    """

    module = "state_space"

    def __init__(self, message, report=None, *, module=None):
        super().__init__(message, module=module)
        self.report = report


class InvalidParameterError(VolfactorError):
    """Estimator parameter out of range (e.g. EWMA lambda outside (0,1))."""

    module = "vol_estimators"


class InsufficientHistoryError(VolfactorError):
    """Return series shorter than the estimator burn-in."""

    module = "vol_estimators"


class AlignmentError(VolfactorError):
    """Two series that must share an index do not."""

    module = "vol_estimators"


class EmptyCrossSectionError(VolfactorError):
    """A cross-sectional operation received no usable values."""

    module = "factor_pipeline"


class DataError(VolfactorError):
    """A loaded value is impossible (e.g. nonpositive price on a trading row)."""

    module = "market_data"


class LoadError(VolfactorError):
    """CSV schema violation: missing column, bad date, duplicate key."""

    module = "market_data"


class LookAheadError(VolfactorError):
    """A score is timestamped at or after the rebalance that consumes it."""

    module = "backtest_engine"


class UndefinedMetricError(VolfactorError):
    """Metric has no defined value (zero variance denominator)."""

    module = "performance_metrics"


class ConfigError(VolfactorError):
    """Run configuration is malformed (unknown key, bad value)."""

    module = "config"
