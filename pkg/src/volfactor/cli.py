"""Batch command-line surface.

Subcommands: design, vol, compare, quantile, benchmark.  Each command
reads one config file (or a previous run manifest), writes plain CSV and
JSON outputs into --out, and finishes by writing a run manifest (full
config echo plus input digests) so any run can be reproduced
byte-for-byte.  Runs without data files generate a seeded synthetic
panel instead.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import filter_design, state_space, vol_estimators
from .backtest import PortfolioSpec, run_backtest
from .config import RunConfig, file_digest, load_config, write_manifest
from .errors import ConfigError, EmptyCrossSectionError, VolfactorError
from .factors import FactorPanel, ScoreVector, composite_score, vol_adjust
from .market_data import (
    MarketPanel,
    SynthSpec,
    eligibility_filter,
    load_factor_table,
    load_panel,
    month_end_schedule,
    synth_panel,
)
from .metrics import report as metrics_report

COMPARE_METHODS = ("ewma", "rolling250", "rolling500", "pwma", "none", "maxflat")


# ---------------------------------------------------------------------------
# Shared plumbing


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row) + "\n")


def _cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, pd.Timestamp):
        return x.strftime("%Y-%m-%d")
    return str(x)


def _designed_weights(cfg: RunConfig) -> state_space.LagWeights:
    spec = filter_design.FilterSpec(order=cfg.filter.order, cutoff=cfg.filter.cutoff)
    filt = filter_design.discretize(spec)
    ss = state_space.to_controller_canonical(filt)
    raw = state_space.impulse_weights(ss, cfg.filter.truncation)
    return state_space.validate_weights(raw, cfg.filter.weight_mode)


def _load_inputs(cfg: RunConfig, need_factors: bool):
    """Panel + factor table from CSVs, or a seeded synthetic pair."""
    if cfg.universe.synthetic or not cfg.universe.prices:
        synth = synth_panel(
            SynthSpec(
                seed=cfg.universe.seed,
                n_tickers=cfg.universe.n_tickers,
                n_dates=cfg.universe.n_dates,
                start=cfg.universe.start,
                ic=cfg.universe.ic,
                regime_var_ratio=cfg.universe.regime_var_ratio,
            )
        )
        return synth.panel, synth.factors, {}
    panel = load_panel(cfg.universe.prices, cfg.universe.universe, cfg.universe.benchmark)
    inputs = {
        cfg.universe.prices: file_digest(cfg.universe.prices),
        cfg.universe.universe: file_digest(cfg.universe.universe),
        cfg.universe.benchmark: file_digest(cfg.universe.benchmark),
    }
    table = None
    if need_factors:
        if not cfg.universe.factors:
            raise ConfigError("this command needs universe.factors (factor CSV path)")
        table = load_factor_table(cfg.universe.factors)
        inputs[cfg.universe.factors] = file_digest(cfg.universe.factors)
    return panel, table, inputs


def _sigma_panel(panel: MarketPanel, method: str, cfg: RunConfig) -> pd.DataFrame:
    weights = _designed_weights(cfg) if method == "maxflat" else None
    return vol_estimators.estimate_panel(
        panel.marked_close(),
        method,
        weights=weights,
        ewma_lambda=cfg.vol.ewma_lambda,
        pwma_alpha=cfg.vol.pwma_alpha,
        pwma_length=cfg.vol.pwma_length,
        demean=cfg.vol.demean,
        min_burn_in=cfg.vol.min_burn_in,
    )


def _build_scores(panel, factor_panel: FactorPanel, sigma: pd.DataFrame, method, cfg):
    """One ScoreVector per rebalance date, signal-dated the prior trading day."""
    scores = {}
    for d in month_end_schedule(panel.dates):
        pos = panel.dates.get_loc(d)
        if pos == 0:
            continue
        s = panel.dates[pos - 1]
        elig = eligibility_filter(
            panel,
            s,
            liquidity_threshold=cfg.universe.liquidity_threshold,
            listing_age_days=cfg.universe.listing_age_days,
        )
        try:
            composite = composite_score(
                factor_panel, s, tickers=elig.eligible, n_mads=cfg.factors.winsor_nmads
            )
        except EmptyCrossSectionError:
            continue
        sig = sigma.loc[s] if s in sigma.index else pd.Series(dtype=float)
        adjusted = vol_adjust(composite, sig)
        scores[d] = ScoreVector(date=s, composite=composite, adjusted=adjusted, method=method)
    return scores


def _portfolio_spec(cfg: RunConfig, selection) -> PortfolioSpec:
    return PortfolioSpec(
        selection=selection,
        weighting=cfg.backtest.weighting,
        buy_commission_bps=cfg.backtest.buy_commission_bps,
        sell_commission_bps=cfg.backtest.sell_commission_bps,
        slippage_cny_per_share=cfg.backtest.slippage_cny_per_share,
        lot_size=cfg.backtest.lot_size,
        initial_capital=cfg.backtest.initial_capital,
    )


def _run(panel, scores, cfg, selection):
    spec = _portfolio_spec(cfg, selection)
    usable = sorted(d for d, sv in scores.items() if len(sv.adjusted) > 0)
    if not usable:
        raise EmptyCrossSectionError("no rebalance date has any scored ticker")
    start = usable[0]
    if cfg.backtest.start:
        start = max(start, pd.Timestamp(cfg.backtest.start))
    end = pd.Timestamp(cfg.backtest.end) if cfg.backtest.end else None
    return run_backtest(
        panel,
        scores,
        spec,
        start=start,
        end=end,
        liquidity_threshold=cfg.universe.liquidity_threshold,
        listing_age_days=cfg.universe.listing_age_days,
    )


def _common_start(streams: dict) -> pd.Timestamp:
    """First rebalance date on which every method has a scored ticker."""
    usable = None
    for stream in streams.values():
        dates = {d for d, sv in stream.items() if len(sv.adjusted) > 0}
        usable = dates if usable is None else usable & dates
    if not usable:
        raise EmptyCrossSectionError(
            "no rebalance date is scored by every method in the comparison"
        )
    return min(usable)


def _equity_rows(result):
    return [
        (d, float(result.nav[d]), float(result.benchmark_nav[d]))
        for d in result.nav.index
    ]


def _write_metrics(path: Path, rep) -> None:
    path.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands


def cmd_design(cfg: RunConfig, out_dir: Path) -> list[str]:
    """Decay table (maxflat/ewma/pwma side by side) + frequency response."""
    weights = _designed_weights(cfg)
    L = weights.truncation_length
    k = np.arange(1, L + 1, dtype=float)

    lam = cfg.vol.ewma_lambda
    ewma = (1.0 - lam) * lam ** (k - 1)
    ewma /= ewma.sum()
    pwma = k ** -cfg.vol.pwma_alpha
    pwma /= pwma.sum()
    maxflat = weights.h / weights.h.sum() if not weights.normalized else weights.h

    _write_csv(
        out_dir / "decay.csv",
        ["lag", "maxflat", "ewma", "pwma"],
        zip(k.astype(int), maxflat, ewma, pwma),
    )

    filt = filter_design.discretize(
        filter_design.FilterSpec(order=cfg.filter.order, cutoff=cfg.filter.cutoff)
    )
    freqs = np.linspace(0.0, 0.5, 501)
    mags = filter_design.discrete_magnitude(filt, freqs)
    _write_csv(out_dir / "frequency_response.csv", ["freq", "magnitude"], zip(freqs, mags))
    return ["decay.csv", "frequency_response.csv"]


def cmd_vol(cfg: RunConfig, out_dir: Path, panel: MarketPanel) -> list[str]:
    """Long-form volatility panel for the configured method (or all)."""
    methods = COMPARE_METHODS if cfg.vol.method == "none" else (cfg.vol.method,)
    outputs = []
    for method in methods:
        sigma = _sigma_panel(panel, method, cfg)
        long = vol_estimators.vol_long_frame(sigma, method)
        name = f"vol_{method}.csv"
        _write_csv(
            out_dir / name,
            ["date", "ticker", "method", "sigma"],
            long.itertuples(index=False),
        )
        outputs.append(name)
    return outputs


def cmd_compare(cfg: RunConfig, out_dir: Path, panel, factor_panel) -> list[str]:
    """Six-method comparison under identical selection rules."""
    streams = {
        m: _build_scores(panel, factor_panel, _sigma_panel(panel, m, cfg), m, cfg)
        for m in COMPARE_METHODS
    }
    start = _common_start(streams)
    saved_start = cfg.backtest.start
    cfg.backtest.start = max(
        pd.Timestamp(saved_start) if saved_start else start, start
    ).strftime("%Y-%m-%d")
    try:
        results = {}
        for m in COMPARE_METHODS:
            result = _run(panel, streams[m], cfg, ("topn", cfg.backtest.top_n))
            results[m] = (result, metrics_report(result.nav, result.benchmark_nav))
    finally:
        cfg.backtest.start = saved_start

    outputs = []
    rows = []
    for m in COMPARE_METHODS:
        result, rep = results[m]
        mdir = out_dir / m
        mdir.mkdir(exist_ok=True)
        _write_csv(mdir / "equity_curve.csv", ["date", "nav", "benchmark_nav"], _equity_rows(result))
        _write_metrics(mdir / "metrics.json", rep)
        outputs += [f"{m}/equity_curve.csv", f"{m}/metrics.json"]
        rows.append(
            (m, rep.total_return, rep.sharpe, rep.alpha, rep.beta, rep.max_drawdown)
        )
    _write_csv(
        out_dir / "compare_metrics.csv",
        ["method", "total_return", "sharpe", "alpha", "beta", "max_drawdown"],
        rows,
    )
    outputs.append("compare_metrics.csv")
    return outputs


def cmd_quantile(cfg: RunConfig, out_dir: Path, panel, factor_panel) -> list[str]:
    """Per-bucket equity curves for the configured rank boundaries."""
    sigma = _sigma_panel(panel, cfg.vol.method, cfg)
    scores = _build_scores(panel, factor_panel, sigma, cfg.vol.method, cfg)
    bounds = cfg.backtest.boundaries
    curves = {}
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        result = _run(panel, scores, cfg, ("quantile", lo, hi))
        curves[f"bucket_{lo}_{hi}"] = result
    names = list(curves)
    first = curves[names[0]]
    rows = []
    for d in first.nav.index:
        rows.append(
            (d, *[float(curves[n].nav[d]) for n in names], float(first.benchmark_nav[d]))
        )
    _write_csv(out_dir / "quantile_curves.csv", ["date", *names, "benchmark_nav"], rows)
    return ["quantile_curves.csv"]


def cmd_benchmark(cfg: RunConfig, out_dir: Path, panel, factor_panel) -> list[str]:
    """Top-N portfolio vs the index: equity curve + metrics."""
    sigma = _sigma_panel(panel, cfg.vol.method, cfg)
    scores = _build_scores(panel, factor_panel, sigma, cfg.vol.method, cfg)
    result = _run(panel, scores, cfg, ("topn", cfg.backtest.top_n))
    rep = metrics_report(result.nav, result.benchmark_nav)
    _write_csv(out_dir / "equity_curve.csv", ["date", "nav", "benchmark_nav"], _equity_rows(result))
    _write_metrics(out_dir / "metrics.json", rep)
    return ["equity_curve.csv", "metrics.json"]


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volfactor",
        description="Filter-based volatility estimation and factor portfolio backtests",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("design", "write decay and frequency-response tables"),
        ("vol", "write per-ticker volatility panels"),
        ("compare", "run the six-method estimator comparison"),
        ("quantile", "run score-rank bucket backtests"),
        ("benchmark", "run the top-N portfolio against the index"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", type=Path, default=None, help="config file or run manifest")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed for a synthetic run")
        p.add_argument(
            "--strict-weights",
            action="store_true",
            help="fail on any lag-weight constraint violation instead of repairing",
        )
    return parser


def run_command(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.universe.seed = args.seed
        cfg.universe.synthetic = True
    if args.strict_weights:
        cfg.filter.weight_mode = "strict"
    if args.out is not None:
        cfg.report.out_dir = str(args.out)

    out_dir = Path(cfg.report.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    command = args.command
    inputs: dict = {}
    if command == "design":
        outputs = cmd_design(cfg, out_dir)
    else:
        need_factors = command != "vol"
        panel, table, inputs = _load_inputs(cfg, need_factors)
        if command == "vol":
            outputs = cmd_vol(cfg, out_dir, panel)
        else:
            if table is None:
                raise ConfigError(f"{command} needs factor data (file or synthetic)")
            factor_panel = FactorPanel.from_long(table, directions=cfg.factors.directions)
            if command == "compare":
                outputs = cmd_compare(cfg, out_dir, panel, factor_panel)
            elif command == "quantile":
                outputs = cmd_quantile(cfg, out_dir, panel, factor_panel)
            else:
                outputs = cmd_benchmark(cfg, out_dir, panel, factor_panel)

    write_manifest(out_dir / "manifest.json", command, cfg, inputs, outputs)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except VolfactorError as exc:
        print(f"error [{exc.module}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
