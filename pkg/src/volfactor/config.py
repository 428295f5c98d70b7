"""Run configuration: a sectioned key-value file with strict keys.

Every key has a documented default below; a key the schema does not know
is a hard error rather than a silently ignored typo.  A config can also
be rehydrated from a previously written run manifest (JSON), which is
how byte-identical re-runs work.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

_WEIGHT_MODES = ("clip", "strict")
_VOL_METHODS = ("maxflat", "ewma", "pwma", "rolling250", "rolling500", "none")
_WEIGHTINGS = ("equal", "rank_proportional")
_DEMEAN_MODES = ("full", "expanding")


@dataclass
class FilterSection:
    """Low-pass design: order, discrete cutoff, weight handling."""

    order: int = 2
    cutoff: float = 1.0 / 500.0
    weight_mode: str = "clip"
    truncation: int = 750


@dataclass
class VolSection:
    method: str = "maxflat"
    ewma_lambda: float = 0.94
    pwma_alpha: float = 1.2
    pwma_length: int = 750
    demean: str = "full"
    min_burn_in: int = 250


@dataclass
class FactorsSection:
    # "name:+1,name:-1" pairs overriding the built-in direction table
    directions: dict = field(default_factory=dict)
    winsor_nmads: float = 3.0


@dataclass
class UniverseSection:
    prices: str = ""
    universe: str = ""
    benchmark: str = ""
    factors: str = ""
    liquidity_threshold: float = 10_000_000.0
    listing_age_days: int = 91
    synthetic: bool = False
    seed: int = 0
    n_tickers: int = 60
    n_dates: int = 750
    ic: float = 0.2
    regime_var_ratio: float = 4.0
    start: str = "2016-01-04"


@dataclass
class BacktestSection:
    top_n: int = 50
    weighting: str = "equal"
    buy_commission_bps: float = 5.0
    sell_commission_bps: float = 1.5
    slippage_cny_per_share: float = 0.01
    lot_size: int = 100
    initial_capital: float = 100_000_000.0
    start: str = ""
    end: str = ""
    boundaries: list = field(default_factory=lambda: [0, 50, 100, 200])


@dataclass
class ReportSection:
    out_dir: str = "out"


_SECTIONS = {
    "filter": FilterSection,
    "vol": VolSection,
    "factors": FactorsSection,
    "universe": UniverseSection,
    "backtest": BacktestSection,
    "report": ReportSection,
}


@dataclass
class RunConfig:
    filter: FilterSection = field(default_factory=FilterSection)
    vol: VolSection = field(default_factory=VolSection)
    factors: FactorsSection = field(default_factory=FactorsSection)
    universe: UniverseSection = field(default_factory=UniverseSection)
    backtest: BacktestSection = field(default_factory=BacktestSection)
    report: ReportSection = field(default_factory=ReportSection)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.filter.weight_mode not in _WEIGHT_MODES:
            raise ConfigError(f"filter.weight_mode must be one of {_WEIGHT_MODES}")
        if not 0.0 < self.filter.cutoff < 0.5:
            raise ConfigError("filter.cutoff must lie in (0, 0.5)")
        if self.vol.method not in _VOL_METHODS:
            raise ConfigError(f"vol.method must be one of {_VOL_METHODS}")
        if self.vol.demean not in _DEMEAN_MODES:
            raise ConfigError(f"vol.demean must be one of {_DEMEAN_MODES}")
        if self.backtest.weighting not in _WEIGHTINGS:
            raise ConfigError(f"backtest.weighting must be one of {_WEIGHTINGS}")
        b = self.backtest.boundaries
        if len(b) < 2 or b[0] != 0 or any(x >= y for x, y in zip(b, b[1:])):
            raise ConfigError("backtest.boundaries must start at 0 and strictly increase")
        for name, sign in self.factors.directions.items():
            if sign not in (1, -1):
                raise ConfigError(f"factors.directions[{name}] must be +1 or -1")

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in _SECTIONS}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        kwargs = {}
        for name, section_cls in _SECTIONS.items():
            body = dict(data.get(name, {}))
            allowed = {f.name for f in fields(section_cls)}
            bad = set(body) - allowed
            if bad:
                raise ConfigError(f"unknown key(s) in [{name}]: {sorted(bad)}")
            kwargs[name] = section_cls(**body)
        return cls(**kwargs)


def _convert(section: str, key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            return [int(x) for x in raw.split(",") if x.strip()]
        if isinstance(default, dict):
            out = {}
            for pair in raw.split(","):
                if not pair.strip():
                    continue
                name, _, sign = pair.partition(":")
                out[name.strip()] = int(sign)
            return out
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse [{section}] {key} = {raw!r}")


def load_config(path) -> RunConfig:
    """Read a config file (sectioned key-value) or a run manifest (.json)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        manifest = json.loads(path.read_text(encoding="utf-8"))
        if "config" not in manifest:
            raise ConfigError(f"{path} is not a run manifest (no 'config' entry)")
        return RunConfig.from_dict(manifest["config"])

    parser = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    data: dict = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        defaults = _SECTIONS[section]()
        body = {}
        for key, raw in parser.items(section):
            if not hasattr(defaults, key):
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            body[key] = _convert(section, key, raw, getattr(defaults, key))
        data[section] = body
    return RunConfig.from_dict(data)


def file_digest(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(path, command: str, config: RunConfig, inputs: dict, outputs: list) -> None:
    """Reproducibility record: full config echo, input digests, output names."""
    manifest = {
        "command": command,
        "config": config.to_dict(),
        "inputs": {str(k): v for k, v in sorted(inputs.items())},
        "outputs": sorted(str(o) for o in outputs),
    }
    Path(path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
