"""Report statistics: total return, Sharpe, CAPM alpha/beta, drawdown.

Conventions fixed here: period returns are simple returns of the NAV
series, Sharpe uses the sample standard deviation and a zero risk-free
rate with sqrt(252) (daily) or sqrt(12) (monthly) annualization, and
alpha is the OLS intercept times the same periods-per-year factor.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd

from .errors import AlignmentError, DataError, UndefinedMetricError

PERIODS_PER_YEAR = {"daily": 252, "monthly": 12}


@dataclass(frozen=True)
class MetricsReport:
    total_return: float
    sharpe: float
    alpha: float
    beta: float
    max_drawdown: float
    n_periods: int
    periodicity: str

    def to_dict(self) -> dict:
        return asdict(self)


def _to_nav(nav) -> np.ndarray:
    arr = np.asarray(pd.Series(nav).values, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DataError("NAV series must be positive and finite", module="performance_metrics")
    return arr


def _period_returns(nav: np.ndarray) -> np.ndarray:
    return nav[1:] / nav[:-1] - 1.0


def _annualization(periodicity: str) -> int:
    try:
        return PERIODS_PER_YEAR[periodicity]
    except KeyError:
        raise ValueError(f"periodicity must be one of {sorted(PERIODS_PER_YEAR)}")


def total_return(nav) -> float:
    """nav_end / nav_start - 1."""
    arr = _to_nav(nav)
    if len(arr) < 2:
        raise DataError("need at least 2 NAV points", module="performance_metrics")
    return float(arr[-1] / arr[0] - 1.0)


def sharpe(nav, periodicity: str = "daily") -> float:
    """Annualized mean/stdev of period returns at zero risk-free rate."""
    ppy = _annualization(periodicity)
    arr = _to_nav(nav)
    if len(arr) < 4:
        raise DataError("need at least 3 periods for a Sharpe ratio",
                        module="performance_metrics")
    r = _period_returns(arr)
    sd = float(np.std(r, ddof=1))
    if sd == 0.0:
        raise UndefinedMetricError("Sharpe undefined: zero return variance")
    return float(r.mean() / sd * np.sqrt(ppy))


def capm_alpha_beta(portfolio_nav, benchmark_nav, periodicity: str = "daily") -> tuple[float, float]:
    """OLS of portfolio period returns on benchmark period returns.

    Returns (annualized alpha, beta).
    """
    ppy = _annualization(periodicity)
    p = _to_nav(portfolio_nav)
    b = _to_nav(benchmark_nav)
    if len(p) != len(b):
        raise AlignmentError(
            "portfolio and benchmark NAV must cover the same dates",
            module="performance_metrics",
        )
    if isinstance(portfolio_nav, pd.Series) and isinstance(benchmark_nav, pd.Series):
        if not portfolio_nav.index.equals(benchmark_nav.index):
            raise AlignmentError(
                "portfolio and benchmark NAV must cover the same dates",
                module="performance_metrics",
            )
    if len(p) < 4:
        raise DataError("need at least 3 periods for a CAPM fit",
                        module="performance_metrics")
    rp = _period_returns(p)
    rb = _period_returns(b)
    rb_c = rb - rb.mean()
    denom = float(rb_c @ rb_c)
    if denom == 0.0:
        raise UndefinedMetricError("beta undefined: zero benchmark return variance")
    beta = float(rb_c @ (rp - rp.mean()) / denom)
    alpha_per_period = float(rp.mean() - beta * rb.mean())
    return alpha_per_period * ppy, beta


def max_drawdown(nav) -> float:
    """Largest peak-to-trough NAV loss as a fraction in [0, 1)."""
    arr = _to_nav(nav)
    peaks = np.maximum.accumulate(arr)
    return float(np.max(1.0 - arr / peaks))


def report(portfolio_nav, benchmark_nav, periodicity: str = "daily") -> MetricsReport:
    """The full per-run metrics bundle."""
    alpha, beta = capm_alpha_beta(portfolio_nav, benchmark_nav, periodicity)
    arr = _to_nav(portfolio_nav)
    return MetricsReport(
        total_return=total_return(portfolio_nav),
        sharpe=sharpe(portfolio_nav, periodicity),
        alpha=alpha,
        beta=beta,
        max_drawdown=max_drawdown(portfolio_nav),
        n_periods=len(arr) - 1,
        periodicity=periodicity,
    )
