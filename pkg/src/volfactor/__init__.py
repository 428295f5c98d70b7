"""Filter-based volatility estimation and factor portfolio backtesting."""

from .filter_design import (
    AnalogPrototype,
    DiscreteFilter,
    FilterSpec,
    analog_denominator,
    analog_prototype,
    butterworth_poles,
    discrete_magnitude,
    discretize,
    magnitude_response,
)
from .state_space import (
    LagWeights,
    StateSpaceModel,
    default_truncation,
    flat_weights,
    impulse_weights,
    to_controller_canonical,
    validate_weights,
)
from .vol_estimators import (
    ReturnSeries,
    VolSeries,
    constant_vol,
    demean_log_returns,
    estimate_panel,
    ewma_vol,
    maxflat_vol,
    pwma_vol,
    residuals,
    rolling_vol,
)
from .factors import (
    FactorPanel,
    ScoreVector,
    composite_score,
    rank_normalize,
    vol_adjust,
    winsorize,
)
from .market_data import (
    EligibilityReport,
    MarketPanel,
    SynthSpec,
    eligibility_filter,
    load_factor_table,
    load_panel,
    month_end_schedule,
    synth_panel,
    write_panel,
)
from .backtest import (
    BacktestResult,
    PortfolioSpec,
    Trade,
    quantile_buckets,
    rebalance,
    run_backtest,
    select_topn,
)
from .metrics import MetricsReport, capm_alpha_beta, max_drawdown, report, sharpe, total_return
from .config import RunConfig, load_config

__version__ = "0.1.0"
