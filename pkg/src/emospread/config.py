"""
Pipeline configuration.

A YAML file with the sections ``sample``, ``data``, ``filters``,
``calendar``, ``emotions``, ``model``, ``test`` and ``output``.  Relative
paths resolve against the directory of the config file.  The environment
variable ``EMOSPREAD_OUTPUT_DIR`` overrides ``output.dir``.

Example::

    sample: {start: 2015-03-02, end: 2019-08-31}
    country: IT
    seed: 20150302
    data:
      gkg_files: [gkg/*.tsv]
      market_csv: market_it.csv
      market_columns: {date: Date, spread: BTP_BUND, crd: FTSEMIB, liq: BIDASK, vstoxx: V2X}
      lexicon: lexicon.yaml
    filters:
      outlets: [ilsole24ore.com, repubblica.it]
      theme_prefixes: [WB_1104_]
      focus: {mode: domestic, countries: [IT]}
    emotions: {names: [Distress, Panic], lm: LM, window: 5}
    model: {q: 0.95, h: [1, 5]}
    test: {mu: 0.3, alpha: 0.05}
    output: {dir: report}
"""

from __future__ import annotations

import glob
import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from datetime import date, time
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import yaml

from .emotions import FULL_SAMPLE, ESTIMATION_WINDOW, LexiconMap, load_lexicons
from .errors import ConfigError
from .gkg import DOMESTIC, DOMESTIC_OR_PAIRED, ArticleFilterConfig, Focus, GkgSchema, TradingCalendar
from .market import DEFAULT_COLUMNS
from .rolling import DEFAULT_GRID

OUTPUT_ENV = "EMOSPREAD_OUTPUT_DIR"
SECTIONS = ("sample", "country", "seed", "data", "filters", "calendar", "emotions", "model", "test", "output")


@dataclass
class PipelineConfig:
    start: date = date(2015, 3, 2)
    end: date = date(2019, 8, 31)
    country: str = "IT"
    seed: int = 20150302
    base_dir: Path = Path(".")
    gkg_files: Tuple[str, ...] = ()
    market_csv: str = ""
    market_columns: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_COLUMNS))
    lexicon: str = ""
    gkg_schema: GkgSchema = GkgSchema()
    outlets: Tuple[str, ...] = ()
    theme_prefixes: Tuple[str, ...] = ("WB_1104_",)
    min_words: int = 100
    min_theme_keywords: int = 4
    focus_mode: str = DOMESTIC
    focus_countries: Tuple[str, ...] = ()
    market_open: time = time(9, 0)
    market_close: time = time(17, 30)
    timezone_offset_hours: int = 1
    holidays: Tuple[date, ...] = ()
    emotion_names: Tuple[str, ...] = ("Distress", "Panic")
    lm_name: str = "LM"
    window_w: int = 5
    carry_forward: bool = False
    scale_scope: str = FULL_SAMPLE
    q: Tuple[float, ...] = (0.95,)
    h: Tuple[int, ...] = (1,)
    window_T0: Optional[int] = None
    ci_level: float = 0.90
    ci_columns: Tuple[str, ...] = ("lm", "emotion")
    quantile_grid: Tuple[float, ...] = DEFAULT_GRID
    sweep: bool = True
    rolling_ci: bool = True
    mu: float = 0.30
    alpha: float = 0.05
    hac_bandwidth: object = "auto"
    per_window_sigma: bool = False
    output_dir: str = "report"
    output_override: Optional[str] = None

    # -- derived objects -------------------------------------------------

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def gkg_paths(self) -> List[Path]:
        out = []
        for pattern in self.gkg_files:
            hits = sorted(glob.glob(str(self.resolve(pattern))))
            if not hits:
                raise ConfigError(f"GKG input not found: {pattern}")
            out.extend(Path(h) for h in hits)
        return out

    def market_path(self) -> Path:
        return self.resolve(self.market_csv)

    def lexicon_path(self) -> Path:
        return self.resolve(self.lexicon)

    def output_path(self) -> Path:
        """Output directory: explicit override, then the environment, then the config."""
        override = self.output_override or os.environ.get(OUTPUT_ENV)
        return Path(override) if override else self.resolve(self.output_dir)

    def focus(self) -> Focus:
        countries = self.focus_countries or (self.country,)
        return Focus(self.focus_mode, tuple(countries))

    def article_filter(self) -> ArticleFilterConfig:
        return ArticleFilterConfig(
            frozenset(self.outlets), self.theme_prefixes, self.focus(), self.min_words, self.min_theme_keywords
        )

    def calendar(self) -> TradingCalendar:
        return TradingCalendar(self.market_open, self.market_close, self.timezone_offset_hours, frozenset(self.holidays))

    def lexicons(self) -> Dict[str, LexiconMap]:
        lex = load_lexicons(self.lexicon_path())
        missing = [n for n in (*self.emotion_names, self.lm_name) if n not in lex]
        if missing:
            raise ConfigError(f"lexicon {self.lexicon} lacks {', '.join(missing)}")
        return lex

    # -- validation and echo ---------------------------------------------

    def validate(self) -> "PipelineConfig":
        """Check parameters and that every referenced input exists."""
        if not self.start < self.end:
            raise ConfigError(f"sample start {self.start} must precede end {self.end}")
        if not self.lexicon:
            raise ConfigError("data.lexicon is required")
        if not self.lexicon_path().is_file():
            raise ConfigError(f"lexicon file not found: {self.lexicon_path()}")
        if not self.market_csv or not self.market_path().is_file():
            raise ConfigError(f"market CSV not found: {self.market_path()}")
        if not self.gkg_files:
            raise ConfigError("data.gkg_files is empty")
        self.gkg_paths()
        if not self.outlets:
            raise ConfigError("filters.outlets is empty")
        if self.focus_mode not in (DOMESTIC, DOMESTIC_OR_PAIRED):
            raise ConfigError(f"unknown focus mode {self.focus_mode!r}")
        if self.scale_scope not in (FULL_SAMPLE, ESTIMATION_WINDOW):
            raise ConfigError(f"unknown scale scope {self.scale_scope!r}")
        for q in (*self.q, *self.quantile_grid):
            if not 0 < q < 1:
                raise ConfigError(f"quantile level {q} outside (0, 1)")
        if any(h < 0 for h in self.h) or not self.h:
            raise ConfigError("model.h must be a non-empty list of non-negative lags")
        if not 0 < self.mu < 1:
            raise ConfigError("test.mu must lie in (0, 1)")
        if not self.emotion_names:
            raise ConfigError("emotions.names is empty")
        try:
            self.focus()
            self.article_filter()
            self.calendar()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.lexicons()
        return self

    def echo(self) -> dict:
        """Every effective parameter, defaults included; output location excluded."""
        return {
            "sample": {"start": self.start.isoformat(), "end": self.end.isoformat()},
            "country": self.country,
            "seed": self.seed,
            "data": {
                "gkg_files": list(self.gkg_files),
                "market_csv": self.market_csv,
                "market_columns": dict(sorted(self.market_columns.items())),
                "lexicon": self.lexicon,
                "gkg_schema": {
                    "record_id": self.gkg_schema.record_id,
                    "date": self.gkg_schema.date,
                    "source": self.gkg_schema.source,
                    "themes": self.gkg_schema.themes,
                    "locations": self.gkg_schema.locations,
                    "gcam": self.gkg_schema.gcam,
                    "n_columns": self.gkg_schema.n_columns,
                    "location_country_pos": self.gkg_schema.location_country_pos,
                    "word_count_key": self.gkg_schema.word_count_key,
                    "separator": self.gkg_schema.separator,
                },
            },
            "filters": {
                "outlets": sorted(self.outlets),
                "theme_prefixes": list(self.theme_prefixes),
                "min_words": self.min_words,
                "min_theme_keywords": self.min_theme_keywords,
                "focus": {"mode": self.focus_mode, "countries": list(self.focus().countries)},
            },
            "calendar": {
                "market_open": self.market_open.strftime("%H:%M"),
                "market_close": self.market_close.strftime("%H:%M"),
                "timezone_offset_hours": self.timezone_offset_hours,
                "holidays": [d.isoformat() for d in sorted(self.holidays)],
            },
            "emotions": {
                "names": list(self.emotion_names),
                "lm": self.lm_name,
                "window": self.window_w,
                "carry_forward": self.carry_forward,
                "scale_scope": self.scale_scope,
            },
            "model": {
                "q": list(self.q),
                "h": list(self.h),
                "window_T0": self.window_T0,
                "ci_level": self.ci_level,
                "ci_columns": list(self.ci_columns),
                "quantile_grid": list(self.quantile_grid),
                "sweep": self.sweep,
                "rolling_ci": self.rolling_ci,
            },
            "test": {
                "mu": self.mu,
                "alpha": self.alpha,
                "hac_bandwidth": self.hac_bandwidth,
                "per_window_sigma": self.per_window_sigma,
            },
        }

    def digest(self) -> str:
        blob = json.dumps(self.echo(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        for key in ("q", "h", "emotion_names"):
            if key in kwargs and not isinstance(kwargs[key], (list, tuple)):
                kwargs[key] = (kwargs[key],)
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return replace(self, **kwargs)


def _as_date(v, where: str) -> date:
    if isinstance(v, date):
        return v
    try:
        return date.fromisoformat(str(v))
    except ValueError as exc:
        raise ConfigError(f"{where}: bad date {v!r}") from exc


def _as_time(v, where: str) -> time:
    if isinstance(v, int):  # YAML 1.1 reads 09:00 as a sexagesimal integer
        return time(v // 60, v % 60)
    try:
        return time.fromisoformat(str(v))
    except ValueError as exc:
        raise ConfigError(f"{where}: bad time {v!r}") from exc


def _tuple(v) -> tuple:
    if v is None:
        return ()
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def config_from_mapping(data: Mapping, base_dir=".") -> PipelineConfig:
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")
    cfg = PipelineConfig(base_dir=Path(base_dir))
    kw = {}
    sample = data.get("sample") or {}
    if "start" in sample:
        kw["start"] = _as_date(sample["start"], "sample.start")
    if "end" in sample:
        kw["end"] = _as_date(sample["end"], "sample.end")
    for key in ("country", "seed"):
        if key in data:
            kw[key] = data[key]
    d = data.get("data") or {}
    if "gkg_files" in d:
        kw["gkg_files"] = tuple(str(p) for p in _tuple(d["gkg_files"]))
    if "market_csv" in d:
        kw["market_csv"] = str(d["market_csv"])
    if "market_columns" in d:
        cols = dict(DEFAULT_COLUMNS)
        cols.update({str(k): str(v) for k, v in d["market_columns"].items()})
        kw["market_columns"] = cols
    if "lexicon" in d:
        kw["lexicon"] = str(d["lexicon"])
    if "gkg_schema" in d:
        try:
            kw["gkg_schema"] = GkgSchema.from_mapping(d["gkg_schema"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"data.gkg_schema: {exc}") from exc
    f = data.get("filters") or {}
    if "outlets" in f:
        kw["outlets"] = tuple(str(o) for o in _tuple(f["outlets"]))
    if "theme_prefixes" in f:
        kw["theme_prefixes"] = tuple(str(t) for t in _tuple(f["theme_prefixes"]))
    for key in ("min_words", "min_theme_keywords"):
        if key in f:
            kw[key] = int(f[key])
    focus = f.get("focus") or {}
    if "mode" in focus:
        kw["focus_mode"] = str(focus["mode"])
    if "countries" in focus:
        kw["focus_countries"] = tuple(str(c) for c in _tuple(focus["countries"]))
    c = data.get("calendar") or {}
    if "market_open" in c:
        kw["market_open"] = _as_time(c["market_open"], "calendar.market_open")
    if "market_close" in c:
        kw["market_close"] = _as_time(c["market_close"], "calendar.market_close")
    if "timezone_offset_hours" in c:
        kw["timezone_offset_hours"] = int(c["timezone_offset_hours"])
    if "holidays" in c:
        kw["holidays"] = tuple(_as_date(x, "calendar.holidays") for x in _tuple(c["holidays"]))
    e = data.get("emotions") or {}
    if "names" in e:
        kw["emotion_names"] = tuple(str(x) for x in _tuple(e["names"]))
    if "lm" in e:
        kw["lm_name"] = str(e["lm"])
    if "window" in e:
        kw["window_w"] = int(e["window"])
    if "carry_forward" in e:
        kw["carry_forward"] = bool(e["carry_forward"])
    if "scale_scope" in e:
        kw["scale_scope"] = str(e["scale_scope"])
    m = data.get("model") or {}
    if "q" in m:
        kw["q"] = tuple(float(x) for x in _tuple(m["q"]))
    if "h" in m:
        kw["h"] = tuple(int(x) for x in _tuple(m["h"]))
    if "window_T0" in m:
        kw["window_T0"] = None if m["window_T0"] is None else int(m["window_T0"])
    if "ci_level" in m:
        kw["ci_level"] = float(m["ci_level"])
    if "ci_columns" in m:
        kw["ci_columns"] = tuple(str(x) for x in _tuple(m["ci_columns"]))
    if "quantile_grid" in m:
        kw["quantile_grid"] = tuple(float(x) for x in _tuple(m["quantile_grid"]))
    for key in ("sweep", "rolling_ci"):
        if key in m:
            kw[key] = bool(m[key])
    t = data.get("test") or {}
    for key, conv in (("mu", float), ("alpha", float), ("per_window_sigma", bool)):
        if key in t:
            kw[key] = conv(t[key])
    if "hac_bandwidth" in t:
        bw = t["hac_bandwidth"]
        kw["hac_bandwidth"] = bw if bw == "auto" else int(bw)
    o = data.get("output") or {}
    if "dir" in o:
        kw["output_dir"] = str(o["dir"])
    try:
        return replace(cfg, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return config_from_mapping(data, base_dir=path.resolve().parent)
