"""Monthly-rebalance long-only portfolio simulation.

Mechanics: on each month-end trading day the engine marks the book at
adjusted close, selects targets from a score vector computed strictly
before that day, and trades at close +/- a fixed per-share slippage with
separate buy/sell commission rates.  Share counts are rounded down to
whole lots; if the buy program exceeds available cash every buy is scaled
back proportionally, so cash never goes negative.  Suspended names held
in the book cannot be traded; their value is carved out of the rebalance
budget and rejoins it once trading resumes.

All cash arithmetic is plain float yuan at full precision (no cent
rounding), so commission amounts like 5.005 match hand ledgers exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .errors import AlignmentError, LookAheadError
from .factors import ScoreVector
from .market_data import MarketPanel, eligibility_filter, month_end_schedule

_BPS = 1e-4


@dataclass(frozen=True)
class PortfolioSpec:
    """Selection rule, weighting, and the cost model of one run."""

    selection: tuple
    weighting: str = "equal"
    buy_commission_bps: float = 5.0
    sell_commission_bps: float = 1.5
    slippage_cny_per_share: float = 0.01
    lot_size: int = 100
    initial_capital: float = 100_000_000.0

    def __post_init__(self):
        kind = self.selection[0]
        if kind == "topn":
            if len(self.selection) != 2 or self.selection[1] < 1:
                raise ValueError("topn selection needs N >= 1")
        elif kind == "quantile":
            _, lo, hi = self.selection
            if not (0 <= lo < hi):
                raise ValueError("quantile selection needs 0 <= lo < hi")
        else:
            raise ValueError(f"unknown selection kind {kind!r}")
        if self.weighting not in ("equal", "rank_proportional"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if min(self.buy_commission_bps, self.sell_commission_bps,
               self.slippage_cny_per_share) < 0:
            raise ValueError("cost parameters must be >= 0")
        if self.lot_size < 1 or self.initial_capital <= 0:
            raise ValueError("lot size must be >= 1 and capital positive")


@dataclass(frozen=True)
class Trade:
    date: pd.Timestamp
    ticker: str
    shares: int  # positive = buy, negative = sell
    price: float  # execution price including slippage
    commission: float
    slippage: float


@dataclass
class BacktestResult:
    nav: pd.Series
    benchmark_nav: pd.Series
    cash: pd.Series
    holdings_history: dict
    trades: list[Trade]
    turnover: pd.Series
    schedule: pd.DatetimeIndex
    warnings: list[str] = field(default_factory=list)

    @property
    def total_commission(self) -> float:
        return sum(t.commission for t in self.trades)

    @property
    def total_slippage(self) -> float:
        return sum(t.slippage for t in self.trades)

    def trades_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                (t.date, t.ticker, t.shares, t.price, t.commission, t.slippage)
                for t in self.trades
            ],
            columns=["date", "ticker", "shares", "price", "commission", "slippage"],
        )

    def holdings_frame(self) -> pd.DataFrame:
        rows = []
        for date in sorted(self.holdings_history):
            for ticker, shares in sorted(self.holdings_history[date].items()):
                rows.append((date, ticker, shares))
        return pd.DataFrame(rows, columns=["date", "ticker", "shares"])


def select_topn(scores: pd.Series, eligible, N: int) -> tuple[list[str], list[str]]:
    """The N highest-scored eligible tickers; ties broken by ticker.

    Returns (selection, warnings).  A short cross-section selects
    everything available and records the shortfall.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    warnings = []
    ranked = _ranked_eligible(scores, eligible)
    if not ranked:
        return [], ["empty-selection: no eligible scored tickers"]
    if len(ranked) < N:
        warnings.append(f"selection-shortfall: wanted {N}, only {len(ranked)} eligible")
    return ranked[:N], warnings


def quantile_buckets(scores: pd.Series, eligible, boundaries) -> tuple[list[list[str]], list[str]]:
    """Slices of the descending-score ordering at the given rank cuts."""
    boundaries = list(boundaries)
    if len(boundaries) < 2 or boundaries[0] != 0:
        raise ValueError("boundaries must start at 0 and contain at least one cut")
    if any(b >= c for b, c in zip(boundaries, boundaries[1:])):
        raise ValueError("boundaries must be strictly increasing")
    warnings = []
    ranked = _ranked_eligible(scores, eligible)
    buckets = []
    for lo, hi in zip(boundaries[:-1], boundaries[1:]):
        bucket = ranked[lo:hi]
        if len(bucket) < hi - lo:
            warnings.append(
                f"bucket-truncated: [{lo},{hi}) got {len(bucket)} of {hi - lo} names"
            )
        buckets.append(bucket)
    return buckets, warnings


def _ranked_eligible(scores: pd.Series, eligible) -> list[str]:
    eligible = set(eligible)
    s = scores[[t for t in sorted(scores.index) if t in eligible]].dropna()
    ranked = s.sort_values(ascending=False, kind="stable")
    return list(ranked.index)


def rebalance(
    holdings: dict,
    cash: float,
    targets: list[str],
    spec: PortfolioSpec,
    prices: pd.Series,
    suspended,
    date,
    target_weights: Optional[pd.Series] = None,
) -> tuple[list[Trade], dict, float, list[str]]:
    """Trade from current holdings to the target list at one date's prices.

    Targets are valued at close and bought/sold at close +/- slippage.
    Returns (trades, new_holdings, new_cash, warnings).
    """
    suspended = set(suspended)
    warnings = []
    slip = spec.slippage_cny_per_share
    lot = spec.lot_size

    equity = cash + sum(sh * prices[t] for t, sh in holdings.items())
    frozen = {t: sh for t, sh in holdings.items() if t in suspended}
    if frozen:
        warnings.append(f"suspended-held: {sorted(frozen)} retained through rebalance")
    budget = equity - sum(sh * prices[t] for t, sh in frozen.items())

    tradable_targets = []
    for t in targets:
        if t in suspended:
            warnings.append(f"target-suspended: {t} skipped")
        elif t not in prices.index or not np.isfinite(prices[t]) or prices[t] <= 0:
            warnings.append(f"target-unpriced: {t} skipped")
        else:
            tradable_targets.append(t)

    if target_weights is not None and tradable_targets:
        w = target_weights.reindex(tradable_targets).astype(float)
        if w.isna().any() or (w < 0).any() or w.sum() <= 0:
            raise ValueError("target weights must be nonnegative with positive sum")
        w = w / w.sum()
    else:
        w = pd.Series(
            1.0 / len(tradable_targets) if tradable_targets else 0.0,
            index=tradable_targets,
        )

    target_shares = {
        t: math.floor(budget * w[t] / prices[t] / lot) * lot for t in tradable_targets
    }

    trades: list[Trade] = []
    new_holdings = dict(frozen)

    # Sells first so the proceeds fund the buy program.
    for t in sorted(holdings):
        if t in suspended:
            continue
        tgt = target_shares.get(t, 0)
        delta = holdings[t] - tgt
        if delta > 0:
            px = prices[t] - slip
            notional = delta * px
            commission = notional * spec.sell_commission_bps * _BPS
            cash += notional - commission
            trades.append(
                Trade(date, t, -delta, px, commission, delta * slip)
            )
        if tgt > 0:
            new_holdings[t] = tgt if delta >= 0 else holdings[t]

    # Buy program, scaled back proportionally if it exceeds cash.
    desired = {}
    for t in tradable_targets:
        have = holdings.get(t, 0)
        if target_shares[t] > have:
            desired[t] = target_shares[t] - have

    def build(scale):
        shares = {t: math.floor(d * scale / lot) * lot for t, d in desired.items()}
        cost = sum(
            n * (prices[t] + slip) * (1.0 + spec.buy_commission_bps * _BPS)
            for t, n in shares.items()
        )
        return shares, cost

    scale = 1.0
    shares, cost = build(scale)
    guard = 0
    while cost > cash and any(shares.values()):
        shrink = cash / cost if cost > 0 else 0.0
        scale = min(scale * shrink, scale * 0.999999)
        shares, cost = build(scale)
        guard += 1
        if guard > 200:
            shares, cost = {t: 0 for t in desired}, 0.0
            warnings.append("buy-scaling: could not fit any buys, staying in cash")
            break
    if scale < 1.0 and any(shares.values()):
        warnings.append(f"buy-scaling: buys scaled to {scale:.6f} of target")

    for t in sorted(desired):
        n = shares[t]
        if n <= 0:
            continue
        px = prices[t] + slip
        notional = n * px
        commission = notional * spec.buy_commission_bps * _BPS
        cash -= notional + commission
        trades.append(Trade(date, t, n, px, commission, n * slip))
        new_holdings[t] = holdings.get(t, 0) + n

    new_holdings = {t: sh for t, sh in new_holdings.items() if sh > 0}
    return trades, new_holdings, cash, warnings


def run_backtest(
    panel: MarketPanel,
    scores: dict,
    spec: PortfolioSpec,
    *,
    start=None,
    end=None,
    schedule: Optional[pd.DatetimeIndex] = None,
    liquidity_threshold: float = None,
    listing_age_days: int = None,
) -> BacktestResult:
    """Simulate the strategy over the panel and score stream.

    `scores` maps each rebalance date to the ScoreVector to trade on; the
    vector must be timestamped strictly before its rebalance date or the
    run aborts (look-ahead guard).  A scheduled rebalance without scores
    holds the book and records a warning.  Daily NAV is marked at
    adjusted close with suspended names carried at their last price.
    """
    dates = panel.dates
    if start is not None:
        dates = dates[dates >= pd.Timestamp(start)]
    if end is not None:
        dates = dates[dates <= pd.Timestamp(end)]
    if len(dates) == 0:
        raise ValueError("empty date range")
    if schedule is None:
        schedule = month_end_schedule(dates)
    else:
        schedule = pd.DatetimeIndex(schedule)
        missing = [d for d in schedule if d not in panel.dates]
        if missing:
            raise ValueError(f"schedule dates not in panel: {missing}")
    schedule = schedule[(schedule >= dates[0]) & (schedule <= dates[-1])]
    if len(schedule) == 0:
        raise ValueError("no rebalance dates inside the run range")

    elig_kwargs = {}
    if liquidity_threshold is not None:
        elig_kwargs["liquidity_threshold"] = liquidity_threshold
    if listing_age_days is not None:
        elig_kwargs["listing_age_days"] = listing_age_days

    marked = panel.marked_close()
    run_dates = dates[dates >= schedule[0]]

    holdings: dict = {}
    cash = spec.initial_capital
    nav = np.empty(len(run_dates))
    cash_track = np.empty(len(run_dates))
    trades: list[Trade] = []
    turnover: dict = {}
    holdings_history: dict = {}
    warnings: list[str] = []
    rebalance_set = set(schedule)

    for i, t in enumerate(run_dates):
        if t in rebalance_set:
            sv = scores.get(t)
            if sv is None:
                warnings.append(f"no-scores: holding through rebalance {t.date()}")
            else:
                if sv.date >= t:
                    raise LookAheadError(
                        f"score dated {sv.date.date()} may not trade at rebalance {t.date()}"
                    )
                report = eligibility_filter(panel, t, **elig_kwargs)
                day_trades, holdings, cash, w = _rebalance_on(
                    panel, marked, holdings, cash, sv, spec, t, report.eligible
                )
                warnings.extend(w)
                trades.extend(day_trades)
                turnover[t] = sum(abs(tr.shares) * tr.price for tr in day_trades)
                holdings_history[t] = dict(holdings)
        px = marked.loc[t]
        nav[i] = cash + sum(sh * px[tk] for tk, sh in holdings.items())
        cash_track[i] = cash

    nav = pd.Series(nav, index=run_dates)
    bench = panel.benchmark.reindex(run_dates)
    if bench.isna().any():
        missing = run_dates[bench.isna().values][0]
        raise AlignmentError(
            f"benchmark level missing on {missing.date()}", module="backtest_engine"
        )
    benchmark_nav = spec.initial_capital * bench / bench.iloc[0]

    return BacktestResult(
        nav=nav,
        benchmark_nav=benchmark_nav,
        cash=pd.Series(cash_track, index=run_dates),
        holdings_history=holdings_history,
        trades=trades,
        turnover=pd.Series(turnover, dtype=float),
        schedule=schedule,
        warnings=warnings,
    )


def _rebalance_on(panel, marked, holdings, cash, sv: ScoreVector, spec, date, eligible):
    warnings = []
    kind = spec.selection[0]
    if kind == "topn":
        targets, w = select_topn(sv.adjusted, eligible, spec.selection[1])
        warnings.extend(w)
    else:
        _, lo, hi = spec.selection
        ranked = _ranked_eligible(sv.adjusted, eligible)
        targets = ranked[lo:hi]
        if len(targets) < hi - lo:
            warnings.append(
                f"bucket-truncated: [{lo},{hi}) got {len(targets)} of {hi - lo} names"
            )

    weights = None
    if spec.weighting == "rank_proportional" and targets:
        weights = sv.adjusted.reindex(targets)

    suspended_now = set(panel.suspended.columns[panel.suspended.loc[date]])
    day_trades, holdings, cash, w2 = rebalance(
        holdings, cash, targets, spec, marked.loc[date], suspended_now, date, weights
    )
    warnings.extend(w2)
    return day_trades, holdings, cash, warnings
