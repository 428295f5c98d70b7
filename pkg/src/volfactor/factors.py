"""Cross-sectional factor processing.

Per date: clamp outliers to robust bounds, turn each factor into
normalized midranks (flipping factors where a low reading is good),
average the available ranks into a composite, then divide the composite
by a per-stock volatility estimate.  All operations are pure per-date
transforms on pandas Series indexed by ticker; missing values stay NaN
throughout and are never silently zero-filled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import EmptyCrossSectionError

# Consistency factor making the median absolute deviation comparable to a
# standard deviation under normality.
MAD_SCALE = 1.4826
DEFAULT_WINSOR_NMADS = 3.0

CATEGORIES = ("Value", "Quality", "Growth", "Tech")

# Stock-screen factor metadata: higher is better except recent realized
# volatility and leverage.  Overridable per run.
DEFAULT_DIRECTIONS = {
    "VOL20": -1,
    "DebtsAssetRatio": -1,
}

DEFAULT_CATEGORIES = {
    "EP": "Value",
    "EB": "Value",
    "CFP": "Value",
    "CTOP": "Value",
    "CFO2EV": "Quality",
    "ROE": "Quality",
    "ROA": "Quality",
    "GrossIncomeRatio": "Quality",
    "ARTRate": "Quality",
    "DebtsAssetRatio": "Quality",
    "OperatingRevenueGrowRate": "Growth",
    "NetProfitGrowRate": "Growth",
    "SUE": "Growth",
    "FEARNG": "Growth",
    "FSALESG": "Growth",
    "REVS20": "Tech",
    "VOL20": "Tech",
    "ILLIQUIDITY": "Tech",
}


@dataclass(frozen=True)
class FactorPanel:
    """Raw factor values per (date, ticker), one wide frame per factor."""

    frames: dict[str, pd.DataFrame]
    directions: dict[str, int]
    categories: dict[str, str]

    def __post_init__(self):
        for name in self.frames:
            d = self.directions.get(name)
            if d not in (1, -1):
                raise ValueError(f"factor {name!r} needs a direction in {{+1, -1}}")
            c = self.categories.get(name)
            if c not in CATEGORIES:
                raise ValueError(f"factor {name!r} needs a category in {CATEGORIES}")

    @property
    def factor_names(self) -> list[str]:
        return sorted(self.frames)

    def cross_section(self, name: str, date) -> pd.Series:
        frame = self.frames[name]
        if date not in frame.index:
            return pd.Series(dtype=float)
        return frame.loc[date].dropna()

    @classmethod
    def from_long(cls, table: pd.DataFrame, directions=None, categories=None) -> "FactorPanel":
        """Build from long-form (date, ticker, factor, value) rows.

        Unknown factors default to direction +1; price-derived ("Tech")
        is the fallback category for names outside the standard screen.
        """
        dirs = dict(DEFAULT_DIRECTIONS)
        cats = dict(DEFAULT_CATEGORIES)
        if directions:
            dirs.update(directions)
        if categories:
            cats.update(categories)
        frames = {}
        for name, sub in table.groupby("factor"):
            frames[str(name)] = sub.pivot(index="date", columns="ticker", values="value").sort_index()
        return cls(
            frames=frames,
            directions={n: dirs.get(n, 1) for n in frames},
            categories={n: cats.get(n, "Tech") for n in frames},
        )


@dataclass(frozen=True)
class ScoreVector:
    """Composite and volatility-adjusted scores for one signal date."""

    date: pd.Timestamp
    composite: pd.Series
    adjusted: pd.Series
    method: str = "none"


def winsorize(values: pd.Series, n_mads: float = DEFAULT_WINSOR_NMADS) -> pd.Series:
    """Clamp a cross-section to median +/- n_mads scaled MADs.

    A zero MAD (more than half the values identical) leaves the input
    unchanged rather than collapsing it to a point.
    """
    values = pd.Series(values, dtype=float)
    present = values.dropna()
    if len(present) < 2:
        raise EmptyCrossSectionError(
            f"winsorize needs >= 2 non-missing values, got {len(present)}"
        )
    med = float(present.median())
    mad = float((present - med).abs().median())
    if mad == 0.0:
        return values.copy()
    half_width = n_mads * MAD_SCALE * mad
    return values.clip(med - half_width, med + half_width)


def rank_normalize(values: pd.Series, direction: int = 1) -> pd.Series:
    """Midranks divided by the non-missing count, in (0, 1].

    direction -1 negates values before ranking so that low raw readings
    earn high ranks.  Missing values stay missing.
    """
    if direction not in (1, -1):
        raise ValueError(f"direction must be +1 or -1, got {direction!r}")
    values = pd.Series(values, dtype=float)
    m = values.notna().sum()
    if m == 0:
        raise EmptyCrossSectionError("rank_normalize needs >= 1 non-missing value")
    ranks = (values * direction).rank(method="average")
    return ranks / m


def composite_score(
    panel: FactorPanel,
    date,
    tickers=None,
    n_mads: float = DEFAULT_WINSOR_NMADS,
) -> pd.Series:
    """Equal-weight mean of the available per-factor normalized ranks.

    Factors with a single valid observation on the date are ranked
    unwinsorized; factors with none contribute nothing.  Tickers with no
    available factor at all are excluded from the result.
    """
    rank_columns = []
    for name in panel.factor_names:
        xs = panel.cross_section(name, date)
        if tickers is not None:
            xs = xs.reindex([t for t in tickers if t in xs.index]).dropna()
        if len(xs) == 0:
            continue
        if len(xs) >= 2:
            xs = winsorize(xs, n_mads)
        rank_columns.append(rank_normalize(xs, panel.directions[name]))
    if not rank_columns:
        raise EmptyCrossSectionError(f"no factor has coverage on {date}")
    ranks = pd.concat(rank_columns, axis=1)
    composite = ranks.mean(axis=1)
    return composite.dropna().sort_index()


def vol_adjust(composite: pd.Series, sigma: pd.Series) -> pd.Series:
    """Composite divided by sigma; names without a defined sigma drop out."""
    sigma = pd.Series(sigma, dtype=float)
    usable = sigma.reindex(composite.index)
    usable = usable[usable.notna() & (usable > 0.0)]
    adjusted = composite.loc[usable.index] / usable
    return adjusted.sort_index()


def scores_to_frame(scores: list[ScoreVector]) -> pd.DataFrame:
    """Long-form (date, ticker, composite, adjusted, method) export rows."""
    rows = []
    for sv in scores:
        adj = sv.adjusted
        for ticker, comp in sv.composite.items():
            a = adj.get(ticker, np.nan)
            rows.append((sv.date, ticker, comp, a, sv.method))
    return pd.DataFrame(rows, columns=["date", "ticker", "composite", "adjusted", "method"])
