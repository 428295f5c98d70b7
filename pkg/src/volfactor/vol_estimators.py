"""Per-asset volatility estimators.

Six schemes share one contract: feed demeaned log returns in, get an
aligned per-date sigma series out.  The weighted family (filter-derived
lag weights, power-law weights, flat rolling windows) is a convolution of
past squared returns; the exponential scheme is the classic variance
recursion seeded from an initial sample window.  All estimators are
causal: sigma(t) never touches y(t) or later.

Burn-in: weighted estimators are undefined before max(weight length,
min_burn_in) observations so early seeding noise never reaches a
backtest; the plain rolling window is defined as soon as the window
fills, since the window itself is the burn-in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    DataError,
    InsufficientHistoryError,
    InvalidParameterError,
)
from .state_space import LagWeights, flat_weights

SIGMA_FLOOR = 1e-8
DEFAULT_MIN_BURN_IN = 250
EWMA_SEED_WINDOW = 30


@dataclass(frozen=True)
class ReturnSeries:
    """Demeaned log returns on strictly increasing trading dates."""

    dates: pd.DatetimeIndex
    y: np.ndarray

    def __post_init__(self):
        dates = pd.DatetimeIndex(self.dates)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "y", y)
        if len(dates) != len(y):
            raise AlignmentError("dates and returns must have equal length")
        if len(dates) > 1 and not dates.is_monotonic_increasing:
            raise ValueError("dates must be strictly increasing")
        if dates.has_duplicates:
            raise ValueError("dates must be strictly increasing (duplicates found)")

    def __len__(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class VolSeries:
    """Per-date sigma aligned with the input dates; NaN before valid_from."""

    dates: pd.DatetimeIndex
    sigma: np.ndarray
    valid_from: int

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "dates", pd.DatetimeIndex(self.dates))
        if len(self.dates) != len(sigma):
            raise AlignmentError("dates and sigma must have equal length")
        if not 0 <= self.valid_from <= len(sigma):
            raise ValueError("valid_from out of range")
        defined = sigma[self.valid_from:]
        if defined.size and (np.any(~np.isfinite(defined)) or np.any(defined <= 0.0)):
            raise ValueError("sigma must be positive and finite from valid_from on")

    @property
    def valid_date(self):
        return self.dates[self.valid_from] if self.valid_from < len(self.dates) else None

    def to_series(self) -> pd.Series:
        return pd.Series(self.sigma, index=self.dates)


def demean_log_returns(prices: pd.Series, *, mode: str = "full", ticker=None) -> ReturnSeries:
    """Log returns of an adjusted price series, demeaned.

    mode "full" subtracts the full-sample mean (the library default);
    mode "expanding" subtracts the running mean through each date, which
    keeps the series strictly point-in-time at the cost of a nonzero
    overall mean.
    """
    if mode not in ("full", "expanding"):
        raise InvalidParameterError(f"unknown demeaning mode {mode!r}")
    prices = pd.Series(prices).astype(float)
    if len(prices) < 2:
        raise InsufficientHistoryError(
            f"need at least 2 price observations, got {len(prices)}"
        )
    bad = np.flatnonzero(~(prices.values > 0.0))
    if bad.size:
        i = bad[0]
        name = f" for {ticker}" if ticker is not None else ""
        raise DataError(
            f"nonpositive price {prices.iloc[i]!r}{name} on {prices.index[i]}"
        )
    raw = np.log(prices.values[1:] / prices.values[:-1])
    if mode == "full":
        y = raw - raw.mean()
    else:
        y = raw - np.cumsum(raw) / np.arange(1, len(raw) + 1)
    return ReturnSeries(dates=pd.DatetimeIndex(prices.index[1:]), y=y)


def _finalize(dates, sigma2: np.ndarray, valid_from: int) -> VolSeries:
    sigma = np.sqrt(np.maximum(sigma2, 0.0))
    sigma = np.maximum(sigma, SIGMA_FLOOR)
    sigma[:valid_from] = np.nan
    return VolSeries(dates=dates, sigma=sigma, valid_from=valid_from)


def _weighted_sigma2(y2: np.ndarray, h: np.ndarray, engine: str) -> np.ndarray:
    """sigma2[t] = sum_k h[k-1] * y2[t-k], defined for t >= len(h)."""
    T, L = len(y2), len(h)
    out = np.full(T, np.nan)
    if engine == "convolution":
        conv = np.convolve(y2, h)
        out[L:] = conv[L - 1 : T - 1]
    elif engine == "recursion":
        # Delay-line state z = (y2(t-1), ..., y2(t-L)); z(t+1) = shift(z) + e1*y2(t).
        z = np.zeros(L)
        for t in range(T):
            if t >= L:
                out[t] = h @ z
            z[1:] = z[:-1]
            z[0] = y2[t]
    else:
        raise InvalidParameterError(f"unknown engine {engine!r}")
    return out


def maxflat_vol(
    r: ReturnSeries,
    weights: LagWeights,
    *,
    engine: str = "convolution",
    min_burn_in: int = DEFAULT_MIN_BURN_IN,
) -> VolSeries:
    """Volatility from filter-derived lag weights on squared returns.

    The two engines (direct convolution, delay-line state recursion) give
    the same numbers to float rounding; convolution is the fast default.
    """
    L = weights.truncation_length
    valid_from = max(L, min_burn_in)
    if len(r) <= valid_from:
        raise InsufficientHistoryError(
            f"series length {len(r)} does not exceed burn-in {valid_from}"
        )
    sigma2 = _weighted_sigma2(r.y**2, weights.h, engine)
    return _finalize(r.dates, sigma2, valid_from)


def pwma_vol(
    r: ReturnSeries,
    alpha: float = 1.2,
    L: int = 750,
    *,
    min_burn_in: int = DEFAULT_MIN_BURN_IN,
) -> VolSeries:
    """Power-law weighted scheme: lag-k weight proportional to k^(-alpha)."""
    if alpha <= 0.0:
        raise InvalidParameterError(f"power-law exponent must be > 0, got {alpha}")
    if L < 1:
        raise InvalidParameterError(f"horizon must be >= 1, got {L}")
    k = np.arange(1, L + 1, dtype=float)
    h = k**-alpha
    h /= h.sum()
    valid_from = max(L, min_burn_in)
    if len(r) <= valid_from:
        raise InsufficientHistoryError(
            f"series length {len(r)} does not exceed burn-in {valid_from}"
        )
    sigma2 = _weighted_sigma2(r.y**2, h, "convolution")
    return _finalize(r.dates, sigma2, valid_from)


def rolling_vol(r: ReturnSeries, W: int) -> VolSeries:
    """Flat-window realized volatility: sigma2(t) = mean of last W squared returns.

    Implemented with running sums rather than the shared convolution core,
    so the flat-weight special case of the filter estimator has a truly
    independent counterpart.
    """
    if W < 2:
        raise InvalidParameterError(f"window must be >= 2, got {W}")
    if len(r) < W + 1:
        raise InsufficientHistoryError(
            f"series length {len(r)} is below window + 1 = {W + 1}"
        )
    y2 = r.y**2
    csum = np.concatenate([[0.0], np.cumsum(y2)])
    sigma2 = np.full(len(r), np.nan)
    # window ending at t-1 inclusive: sum of y2[t-W .. t-1]
    sigma2[W:] = (csum[W:-1] - csum[: len(r) - W]) / W
    return _finalize(r.dates, sigma2, valid_from=W)


def ewma_vol(
    r: ReturnSeries,
    lam: float = 0.94,
    *,
    seed_window: int = EWMA_SEED_WINDOW,
    min_burn_in: int = DEFAULT_MIN_BURN_IN,
) -> VolSeries:
    """Exponentially weighted variance recursion.

    sigma2(t) = lam * sigma2(t-1) + (1 - lam) * y2(t-1), seeded at index
    seed_window with the sample variance of the first seed_window returns.
    """
    if not 0.0 < lam < 1.0:
        raise InvalidParameterError(f"decay must lie in (0, 1), got {lam}")
    if seed_window < 2:
        raise InvalidParameterError("seed window must be >= 2")
    valid_from = max(seed_window, min_burn_in)
    if len(r) <= valid_from:
        raise InsufficientHistoryError(
            f"series length {len(r)} does not exceed burn-in {valid_from}"
        )
    y2 = r.y**2
    sigma2 = np.full(len(r), np.nan)
    sigma2[seed_window] = np.var(r.y[:seed_window], ddof=1)
    for t in range(seed_window + 1, len(r)):
        sigma2[t] = lam * sigma2[t - 1] + (1.0 - lam) * y2[t - 1]
    return _finalize(r.dates, sigma2, valid_from)


def constant_vol(r: ReturnSeries, value: float = 1.0) -> VolSeries:
    """sigma identically `value`; the no-adjustment baseline."""
    if value <= 0.0:
        raise InvalidParameterError("constant sigma must be positive")
    return VolSeries(dates=r.dates, sigma=np.full(len(r), value), valid_from=0)


def residuals(r: ReturnSeries, v: VolSeries) -> np.ndarray:
    """Whitened residuals x(t) = y(t) / sigma(t); NaN before valid_from."""
    if len(r) != len(v.sigma) or not r.dates.equals(v.dates):
        raise AlignmentError("return and volatility series are not aligned")
    x = np.full(len(r), np.nan)
    x[v.valid_from:] = r.y[v.valid_from:] / v.sigma[v.valid_from:]
    return x


# ---------------------------------------------------------------------------
# Panel driver

ROLLING_METHODS = {"rolling250": 250, "rolling500": 500}
PANEL_METHODS = ("maxflat", "ewma", "pwma", "rolling250", "rolling500", "none")


def estimate_panel(
    adj_close: pd.DataFrame,
    method: str,
    *,
    weights: LagWeights | None = None,
    ewma_lambda: float = 0.94,
    pwma_alpha: float = 1.2,
    pwma_length: int = 750,
    demean: str = "full",
    min_burn_in: int = DEFAULT_MIN_BURN_IN,
) -> pd.DataFrame:
    """Per-ticker sigma panel (date x ticker) under one estimation scheme.

    Tickers with too little history for the scheme get an all-NaN column
    instead of raising; the single-series functions stay strict.
    """
    if method not in PANEL_METHODS:
        raise InvalidParameterError(f"unknown volatility method {method!r}")
    if method == "maxflat" and weights is None:
        raise InvalidParameterError("maxflat panel estimation requires lag weights")

    out = pd.DataFrame(np.nan, index=adj_close.index, columns=adj_close.columns)
    for ticker in adj_close.columns:
        prices = adj_close[ticker].dropna()
        if len(prices) < 2:
            continue
        r = demean_log_returns(prices, mode=demean, ticker=ticker)
        try:
            if method == "maxflat":
                v = maxflat_vol(r, weights, min_burn_in=min_burn_in)
            elif method == "ewma":
                v = ewma_vol(r, ewma_lambda, min_burn_in=min_burn_in)
            elif method == "pwma":
                v = pwma_vol(r, pwma_alpha, pwma_length, min_burn_in=min_burn_in)
            elif method in ROLLING_METHODS:
                v = rolling_vol(r, ROLLING_METHODS[method])
            else:
                v = constant_vol(r)
        except InsufficientHistoryError:
            continue
        out.loc[v.dates, ticker] = v.sigma
    return out


def vol_long_frame(sigma_wide: pd.DataFrame, method: str) -> pd.DataFrame:
    """Long-form (date, ticker, method, sigma) rows, defined cells only."""
    long = sigma_wide.stack().rename("sigma").reset_index()
    long.columns = ["date", "ticker", "sigma"]
    long.insert(2, "method", method)
    return long.sort_values(["date", "ticker"]).reset_index(drop=True)
