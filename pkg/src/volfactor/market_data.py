"""Point-in-time market panel: loading, eligibility screens, synthesis.

CSV schemas (header row required, dates ISO-8601, UTF-8):

  prices.csv     date,ticker,close,adj_factor,turnover_cny,suspended,is_st,list_date
  universe.csv   date,ticker            (membership-on-date rows)
  benchmark.csv  date,level
  factors.csv    date,ticker,factor,value

Membership and every eligibility rule depend only on data at or before
the query date, so appending future rows never changes a historical
answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .errors import DataError, LoadError

PRICE_COLUMNS = [
    "date",
    "ticker",
    "close",
    "adj_factor",
    "turnover_cny",
    "suspended",
    "is_st",
    "list_date",
]

LIQUIDITY_THRESHOLD_CNY = 10_000_000.0
LISTING_AGE_DAYS = 91
TURNOVER_WINDOW = 20

# Eligibility rules in priority order; the first failure is the reason.
RULE_UNIVERSE = "universe"
RULE_ST = "st"
RULE_SUSPENDED = "suspended"
RULE_UNTRADEABLE = "untradeable"
RULE_LISTING_AGE = "listing-age"
RULE_LIQUIDITY = "liquidity"


@dataclass(frozen=True)
class MarketPanel:
    """Wide per-field frames (date x ticker) plus per-ticker listing dates."""

    close: pd.DataFrame
    adj_factor: pd.DataFrame
    turnover: pd.DataFrame
    suspended: pd.DataFrame
    is_st: pd.DataFrame
    list_date: pd.Series
    universe: pd.DataFrame
    benchmark: pd.Series

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.close.index

    @property
    def tickers(self) -> list[str]:
        return list(self.close.columns)

    def adjusted_close(self) -> pd.DataFrame:
        return self.close * self.adj_factor

    def marked_close(self) -> pd.DataFrame:
        """Adjusted closes with the last price carried over untraded days."""
        return self.adjusted_close().ffill()

    def truncate(self, last_date) -> "MarketPanel":
        """Panel restricted to dates <= last_date (replay support)."""
        last_date = pd.Timestamp(last_date)
        return MarketPanel(
            close=self.close.loc[:last_date],
            adj_factor=self.adj_factor.loc[:last_date],
            turnover=self.turnover.loc[:last_date],
            suspended=self.suspended.loc[:last_date],
            is_st=self.is_st.loc[:last_date],
            list_date=self.list_date,
            universe=self.universe.loc[:last_date],
            benchmark=self.benchmark.loc[:last_date],
        )


@dataclass(frozen=True)
class EligibilityReport:
    """Eligible tickers on one date plus the first failing rule per exclusion."""

    date: pd.Timestamp
    eligible: list[str]
    reasons: dict[str, str]


def _read_csv(path, required: list[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype=str)
    except FileNotFoundError:
        raise LoadError(f"input file not found: {path}")
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise LoadError(f"{path}: missing column(s) {missing}")
    extra = [c for c in df.columns if c not in required]
    if extra:
        raise LoadError(f"{path}: unexpected column(s) {extra}")
    return df


def _parse_dates(df: pd.DataFrame, column: str, path) -> pd.Series:
    parsed = pd.to_datetime(df[column], format="%Y-%m-%d", errors="coerce")
    bad = parsed.isna() & df[column].notna()
    if bad.any():
        row = int(np.flatnonzero(bad.values)[0])
        raise LoadError(
            f"{path}: unparseable date {df[column].iloc[row]!r} at row {row + 2}"
        )
    return parsed


def _parse_floats(df: pd.DataFrame, column: str, path) -> pd.Series:
    parsed = pd.to_numeric(df[column], errors="coerce")
    bad = parsed.isna() & df[column].notna()
    if bad.any():
        row = int(np.flatnonzero(bad.values)[0])
        raise LoadError(
            f"{path}: unparseable number {df[column].iloc[row]!r} in {column} at row {row + 2}"
        )
    return parsed.astype(float)


def _check_duplicates(df: pd.DataFrame, keys: list[str], path) -> None:
    dup = df.duplicated(subset=keys, keep="first")
    if dup.any():
        row = int(np.flatnonzero(dup.values)[0])
        key = tuple(df.iloc[row][k] for k in keys)
        raise LoadError(f"{path}: duplicate key {key} at row {row + 2}")


def load_panel(prices_path, universe_path, benchmark_path) -> MarketPanel:
    """Load and validate the three core CSVs into a panel."""
    raw = _read_csv(prices_path, PRICE_COLUMNS)
    raw["date"] = _parse_dates(raw, "date", prices_path)
    raw["list_date"] = _parse_dates(raw, "list_date", prices_path)
    for col in ("close", "adj_factor", "turnover_cny"):
        raw[col] = _parse_floats(raw, col, prices_path)
    for col in ("suspended", "is_st"):
        vals = _parse_floats(raw, col, prices_path)
        if not vals.isin([0.0, 1.0]).all():
            row = int(np.flatnonzero(~vals.isin([0.0, 1.0]).values)[0])
            raise LoadError(f"{prices_path}: {col} must be 0 or 1 at row {row + 2}")
        raw[col] = vals.astype(bool)
    _check_duplicates(raw, ["date", "ticker"], prices_path)

    trading = ~raw["suspended"] & raw["close"].notna()
    bad_price = trading & ~(raw["close"] > 0.0)
    if bad_price.any():
        r = raw[bad_price].iloc[0]
        raise DataError(
            f"nonpositive close {r['close']} for {r['ticker']} on {r['date'].date()}"
        )
    if not (raw["adj_factor"] > 0.0).all():
        r = raw[~(raw["adj_factor"] > 0.0)].iloc[0]
        raise DataError(
            f"nonpositive adjustment factor for {r['ticker']} on {r['date'].date()}"
        )

    per_ticker = raw.groupby("ticker")["list_date"].nunique(dropna=False)
    if (per_ticker > 1).any():
        t = per_ticker[per_ticker > 1].index[0]
        raise LoadError(f"{prices_path}: inconsistent list_date for ticker {t}")
    list_date = raw.groupby("ticker")["list_date"].first().sort_index()

    def pivot(col):
        return raw.pivot(index="date", columns="ticker", values=col).sort_index()

    close = pivot("close")
    suspended = pivot("suspended").fillna(False).astype(bool)
    is_st = pivot("is_st").fillna(False).astype(bool)

    uni = _read_csv(universe_path, ["date", "ticker"])
    uni["date"] = _parse_dates(uni, "date", universe_path)
    _check_duplicates(uni, ["date", "ticker"], universe_path)
    uni["member"] = True
    universe = (
        uni.pivot(index="date", columns="ticker", values="member")
        .reindex(index=close.index, columns=close.columns)
        .fillna(False)
        .astype(bool)
    )

    bench = _read_csv(benchmark_path, ["date", "level"])
    bench["date"] = _parse_dates(bench, "date", benchmark_path)
    bench["level"] = _parse_floats(bench, "level", benchmark_path)
    _check_duplicates(bench, ["date"], benchmark_path)
    if not (bench["level"] > 0.0).all():
        raise DataError(f"{benchmark_path}: benchmark level must be positive")
    benchmark = bench.set_index("date")["level"].sort_index()

    return MarketPanel(
        close=close,
        adj_factor=pivot("adj_factor"),
        turnover=pivot("turnover_cny"),
        suspended=suspended,
        is_st=is_st,
        list_date=list_date,
        universe=universe,
        benchmark=benchmark,
    )


def write_panel(panel: MarketPanel, prices_path, universe_path, benchmark_path) -> None:
    """Emit the panel back to the CSV schemas (inverse of load_panel).

    One price row is written per (date, ticker) cell with a defined close.
    """
    rows = []
    for date in panel.dates:
        d = date.strftime("%Y-%m-%d")
        for ticker in panel.tickers:
            c = panel.close.at[date, ticker]
            if pd.isna(c):
                continue
            rows.append(
                (
                    d,
                    ticker,
                    repr(float(c)),
                    repr(float(panel.adj_factor.at[date, ticker])),
                    repr(float(panel.turnover.at[date, ticker])),
                    int(panel.suspended.at[date, ticker]),
                    int(panel.is_st.at[date, ticker]),
                    panel.list_date[ticker].strftime("%Y-%m-%d"),
                )
            )
    with open(prices_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(PRICE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")

    with open(universe_path, "w", encoding="utf-8") as fh:
        fh.write("date,ticker\n")
        for date in panel.universe.index:
            d = date.strftime("%Y-%m-%d")
            for ticker in panel.universe.columns:
                if panel.universe.at[date, ticker]:
                    fh.write(f"{d},{ticker}\n")

    with open(benchmark_path, "w", encoding="utf-8") as fh:
        fh.write("date,level\n")
        for date, level in panel.benchmark.items():
            fh.write(f"{date.strftime('%Y-%m-%d')},{float(level)!r}\n")


def load_factor_table(path) -> pd.DataFrame:
    """Long-form factor rows with parsed dates and numeric values."""
    df = _read_csv(path, ["date", "ticker", "factor", "value"])
    df["date"] = _parse_dates(df, "date", path)
    df["value"] = _parse_floats(df, "value", path)
    _check_duplicates(df, ["date", "ticker", "factor"], path)
    return df


def eligibility_filter(
    panel: MarketPanel,
    date,
    *,
    liquidity_threshold: float = LIQUIDITY_THRESHOLD_CNY,
    listing_age_days: int = LISTING_AGE_DAYS,
    turnover_window: int = TURNOVER_WINDOW,
) -> EligibilityReport:
    """Tradeable-universe screen on one date.

    Eligible iff: in the index universe that day, not flagged ST, not
    suspended, carrying a positive close, listed at least
    ``listing_age_days`` calendar days, and trailing-``turnover_window``
    mean daily turnover at or above ``liquidity_threshold`` yuan.
    """
    date = pd.Timestamp(date)
    if date not in panel.dates:
        raise KeyError(f"{date.date()} is not a panel trading date")
    idx = panel.dates.get_loc(date)
    tickers = panel.tickers

    member = panel.universe.loc[date]
    st = panel.is_st.loc[date]
    susp = panel.suspended.loc[date]
    has_price = panel.close.loc[date].notna() & (panel.close.loc[date] > 0)
    age_ok = (date - panel.list_date.reindex(tickers)).dt.days >= listing_age_days
    window = panel.turnover.iloc[max(0, idx - turnover_window + 1) : idx + 1]
    liquid = window.fillna(0.0).mean() >= liquidity_threshold

    eligible = []
    reasons: dict[str, str] = {}
    for t in tickers:
        if not member[t]:
            reasons[t] = RULE_UNIVERSE
        elif st[t]:
            reasons[t] = RULE_ST
        elif susp[t]:
            reasons[t] = RULE_SUSPENDED
        elif not has_price[t]:
            reasons[t] = RULE_UNTRADEABLE
        elif not age_ok[t]:
            reasons[t] = RULE_LISTING_AGE
        elif not liquid[t]:
            reasons[t] = RULE_LIQUIDITY
        else:
            eligible.append(t)
    return EligibilityReport(date=date, eligible=eligible, reasons=reasons)


# ---------------------------------------------------------------------------
# Synthetic panels


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a reproducible synthetic market panel."""

    seed: int = 0
    n_tickers: int = 60
    n_dates: int = 750
    start: str = "2016-01-04"
    base_vol: float = 0.015
    market_vol_share: float = 0.5
    regime_var_ratio: float = 4.0
    regime_persistence: float = 0.97
    drift: float = 0.0002
    beta_low: float = 0.5
    beta_high: float = 1.5
    ic: Optional[float] = None
    factor_name: str = "synthfwd"
    price_low: float = 8.0
    price_high: float = 80.0
    turnover_base: float = 5e7

    def __post_init__(self):
        if self.n_tickers < 1 or self.n_dates < 2:
            raise ValueError("synthetic panel needs >= 1 ticker and >= 2 dates")
        if self.regime_var_ratio <= 0 or self.base_vol <= 0:
            raise ValueError("variance parameters must be positive")
        if self.ic is not None and not -1.0 <= self.ic <= 1.0:
            raise ValueError("information coefficient must lie in [-1, 1]")


@dataclass(frozen=True)
class SynthResult:
    panel: MarketPanel
    regimes: np.ndarray
    betas: pd.Series
    factors: Optional[pd.DataFrame]


def month_end_schedule(dates: pd.DatetimeIndex) -> pd.DatetimeIndex:
    """Last trading date of each calendar month present in `dates`."""
    s = pd.Series(dates, index=dates)
    return pd.DatetimeIndex(s.groupby([dates.year, dates.month]).max().values)


def synth_panel(spec: SynthSpec) -> SynthResult:
    """Reproducible panel with a two-state variance regime.

    Log returns are a one-factor model: r_i = drift + beta_i * m + e_i,
    with both the common and idiosyncratic shocks scaled up in the high
    regime so realized variance clusters.  When ``spec.ic`` is set, a
    synthetic factor is emitted on the day before each month-end whose
    cross-sectional correlation with the coming month's return is ic; at
    ic = 1 the factor ranks reproduce the forward-return ranks exactly.
    """
    rng = np.random.default_rng(spec.seed)
    T, N = spec.n_dates, spec.n_tickers
    dates = pd.bdate_range(spec.start, periods=T)
    tickers = [f"S{i:04d}" for i in range(N)]

    stay = spec.regime_persistence
    flips = rng.random(T - 1) > stay
    regimes = np.zeros(T, dtype=int)
    regimes[1:] = np.cumsum(flips) % 2

    scale = np.where(regimes == 1, np.sqrt(spec.regime_var_ratio), 1.0)
    sigma_m = spec.base_vol * np.sqrt(spec.market_vol_share)
    sigma_e = spec.base_vol * np.sqrt(1.0 - spec.market_vol_share)
    betas = pd.Series(np.linspace(spec.beta_low, spec.beta_high, N), index=tickers)

    m = rng.standard_normal(T - 1) * sigma_m * scale[1:]
    eps = rng.standard_normal((T - 1, N)) * sigma_e * scale[1:, None]
    r = spec.drift + betas.values[None, :] * m[:, None] + eps

    p0 = rng.uniform(spec.price_low, spec.price_high, N)
    close = np.empty((T, N))
    close[0] = p0
    close[1:] = p0 * np.exp(np.cumsum(r, axis=0))

    close_df = pd.DataFrame(close, index=dates, columns=tickers)
    turnover = pd.DataFrame(
        spec.turnover_base * (1.0 + 0.1 * rng.random((T, N))), index=dates, columns=tickers
    )
    falsy = pd.DataFrame(False, index=dates, columns=tickers)
    list_date = pd.Series(dates[0] - pd.Timedelta(days=400), index=tickers)
    universe = pd.DataFrame(True, index=dates, columns=tickers)

    schedule = month_end_schedule(dates)
    benchmark = _equal_weight_benchmark(close_df, schedule)

    factor_rows = None
    if spec.ic is not None:
        factor_rows = _forward_return_factor(close_df, schedule, spec, rng)

    panel = MarketPanel(
        close=close_df,
        adj_factor=pd.DataFrame(1.0, index=dates, columns=tickers),
        turnover=turnover,
        suspended=falsy,
        is_st=falsy.copy(),
        list_date=list_date,
        universe=universe,
        benchmark=benchmark,
    )
    return SynthResult(panel=panel, regimes=regimes, betas=betas, factors=factor_rows)


def _equal_weight_benchmark(close: pd.DataFrame, schedule, level0: float = 1000.0) -> pd.Series:
    """Equal-weight index rebalanced on the schedule, fractional and costless."""
    dates = close.index
    level = np.empty(len(dates))
    level[0] = level0
    anchor_i = 0
    anchor_level = level0
    rebalance = set(schedule)
    for i in range(1, len(dates)):
        rel = close.iloc[i] / close.iloc[anchor_i]
        level[i] = anchor_level * rel.mean()
        if dates[i] in rebalance:
            anchor_i = i
            anchor_level = level[i]
    return pd.Series(level, index=dates)


def _forward_return_factor(close, schedule, spec: SynthSpec, rng) -> pd.DataFrame:
    dates = close.index
    rows = []
    for j in range(len(schedule) - 1):
        d, d_next = schedule[j], schedule[j + 1]
        pos = dates.get_loc(d)
        if pos == 0:
            continue
        signal_date = dates[pos - 1]
        fwd = close.loc[d_next] / close.loc[d] - 1.0
        z = (fwd - fwd.mean()) / fwd.std(ddof=0)
        noise = rng.standard_normal(len(z))
        value = spec.ic * z.values + np.sqrt(max(0.0, 1.0 - spec.ic**2)) * noise
        for t, v in zip(close.columns, value):
            rows.append((signal_date, t, spec.factor_name, v))
    return pd.DataFrame(rows, columns=["date", "ticker", "factor", "value"])
