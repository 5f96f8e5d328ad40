"""
Daily emotion indicators from GCAM word counts.

For each trading day the emotion share is the number of words an emotion
lexicon assigns to the selected articles divided by the total word count of
those articles.  The indicator is the mean share over the last ``w`` open
market days, rescaled to unit sample variance.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import yaml

from .errors import ConfigError, DegenerateSeries, EmptyDay, WindowTooLong, ZeroDenominator
from .gkg import GkgRecord

FULL_SAMPLE = "full_sample"
ESTIMATION_WINDOW = "estimation_window"


@dataclass(frozen=True)
class LexiconMap:
    emotion_name: str
    gcam_keys: FrozenSet[str] = frozenset()
    raw_word_list: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if not self.gcam_keys and not self.raw_word_list:
            raise ValueError(f"lexicon {self.emotion_name!r} has neither GCAM keys nor words")


def load_lexicons(path) -> Dict[str, LexiconMap]:
    """Read a YAML lexicon map.

    Expected layout::

        emotions:
          Distress:
            gcam_keys: [c6.1, c6.4]
          LM:
            gcam_keys: [c5.1]
            word_list: lm_negative.txt    # optional, one term per line

    Word-list paths are resolved relative to the lexicon file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"lexicon file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    entries = data.get("emotions", data)
    if not isinstance(entries, dict) or not entries:
        raise ConfigError(f"no emotions defined in {path}")
    out = {}
    for name, spec in entries.items():
        spec = spec or {}
        words: FrozenSet[str] = frozenset()
        if spec.get("word_list"):
            wpath = (path.parent / spec["word_list"]).resolve()
            if not wpath.is_file():
                raise ConfigError(f"word list not found: {wpath}")
            words = frozenset(
                w.strip().lower() for w in wpath.read_text(encoding="utf-8").splitlines() if w.strip()
            )
        try:
            out[str(name)] = LexiconMap(str(name), frozenset(map(str, spec.get("gcam_keys", []))), words)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return out


_TOKEN = re.compile(r"[a-z]+(?:'[a-z]+)?")


def count_text_words(text: str, words: FrozenSet[str]) -> Tuple[int, int]:
    """(emotion words, total words) in raw text; for when article text is available."""
    tokens = _TOKEN.findall(text.lower())
    return sum(1 for t in tokens if t in words), len(tokens)


@dataclass(frozen=True)
class DailySentimentRow:
    date: Optional[date]
    wc_emotion: int
    wc_total: int

    @property
    def share(self) -> float:
        if self.wc_total == 0:
            raise ZeroDenominator("total word count is zero")
        return self.wc_emotion / self.wc_total


def daily_emotion_share(bundle: Sequence[GkgRecord], lex: LexiconMap, day: Optional[date] = None) -> DailySentimentRow:
    if not bundle:
        raise EmptyDay(f"no articles for {day}")
    keys = lex.gcam_keys
    wc_emotion = 0
    wc_total = 0
    for rec in bundle:
        wc_emotion += sum(rec.gcam.get(k, 0) for k in keys)
        wc_total += rec.word_count or 0
    if wc_total == 0:
        raise ZeroDenominator(f"total word count is zero on {day}")
    return DailySentimentRow(day, wc_emotion, wc_total)


def smooth(shares, w: int = 5, carry_forward: bool = False) -> np.ndarray:
    """Trailing ``w``-day mean of daily shares; NaN marks missing days.

    Values before the ``w``-th observation are NaN.  A window containing a
    missing day yields NaN unless ``carry_forward`` is set, in which case the
    mean runs over the ``w`` most recent available days.
    """
    x = np.asarray(shares, dtype=float)
    if w < 1:
        raise ValueError("window must be >= 1")
    if x.shape[0] < w:
        raise WindowTooLong(f"series of length {x.shape[0]} is shorter than window {w}")
    out = np.full(x.shape, np.nan)
    if not carry_forward:
        for t in range(w - 1, x.shape[0]):
            out[t] = x[t - w + 1:t + 1].sum() / w
        return out
    avail = np.flatnonzero(~np.isnan(x))
    for t in range(x.shape[0]):
        k = np.searchsorted(avail, t, side="right")
        if k >= w:
            out[t] = x[avail[k - w:k]].sum() / w
    return out


def standardize(series, scope: str = FULL_SAMPLE, window_bounds: Optional[Tuple[int, int]] = None) -> Tuple[np.ndarray, float]:
    """Divide by the sample standard deviation over the scoping region.

    ``window_bounds`` is a ``(start, stop)`` index slice and is required when
    ``scope`` is the estimation window.  NaNs are ignored.
    """
    x = np.asarray(series, dtype=float)
    if scope == FULL_SAMPLE:
        region = x
    elif scope == ESTIMATION_WINDOW:
        if window_bounds is None:
            raise ValueError("estimation-window scaling needs window_bounds")
        region = x[window_bounds[0]:window_bounds[1]]
    else:
        raise ValueError(f"unknown scale scope {scope!r}")
    region = region[~np.isnan(region)]
    if region.shape[0] < 2:
        raise DegenerateSeries("need at least two observations to scale")
    sd = float(np.std(region, ddof=1))
    if not sd > 0:
        raise DegenerateSeries("series has zero variance")
    return x / sd, sd


@dataclass
class EmotionSeries:
    emotion_name: str
    country: str
    focus: str
    dates: List[date]
    raw_share: np.ndarray
    smoothed: np.ndarray
    standardized: np.ndarray
    window_w: int = 5
    scale: float = 1.0
    scale_scope: str = FULL_SAMPLE
    wc_emotion: np.ndarray = field(default=None, repr=False)
    wc_total: np.ndarray = field(default=None, repr=False)

    def value_map(self) -> Dict[date, float]:
        return {d: float(v) for d, v in zip(self.dates, self.standardized) if not np.isnan(v)}

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("date,raw_share,smoothed,standardized\n")
            for d, a, b, c in zip(self.dates, self.raw_share, self.smoothed, self.standardized):
                fh.write(f"{d.isoformat()},{_fmt(a)},{_fmt(b)},{_fmt(c)}\n")

    @classmethod
    def read_csv(cls, path, emotion_name: str, country: str = "", focus: str = "") -> "EmotionSeries":
        dates, cols = [], ([], [], [])
        with open(path, encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                dates.append(date.fromisoformat(row["date"]))
                for col, key in zip(cols, ("raw_share", "smoothed", "standardized")):
                    col.append(float(row[key]) if row[key] else np.nan)
        return cls(emotion_name, country, focus, dates, *(np.array(c, dtype=float) for c in cols))


def _fmt(v) -> str:
    return "" if np.isnan(v) else repr(float(v))


def build_emotion_series(
    bundles: Mapping[date, Sequence[GkgRecord]],
    dates: Sequence[date],
    lex: LexiconMap,
    country: str = "",
    focus: str = "",
    w: int = 5,
    scale_scope: str = FULL_SAMPLE,
    window_bounds: Optional[Tuple[int, int]] = None,
    carry_forward: bool = False,
) -> EmotionSeries:
    """Daily share, trailing mean and unit-variance rescaling for one lexicon.

    ``dates`` is the open-market calendar; days without articles (or with a
    zero word total) are missing rather than zero.
    """
    dates = list(dates)
    n = len(dates)
    raw = np.full(n, np.nan)
    wc_e = np.zeros(n, dtype=np.int64)
    wc_t = np.zeros(n, dtype=np.int64)
    for i, d in enumerate(dates):
        bundle = bundles.get(d)
        if not bundle:
            continue
        try:
            row = daily_emotion_share(bundle, lex, d)
        except (EmptyDay, ZeroDenominator):
            continue
        wc_e[i], wc_t[i] = row.wc_emotion, row.wc_total
        raw[i] = row.share
    sm = smooth(raw, w, carry_forward=carry_forward)
    std, scale = standardize(sm, scale_scope, window_bounds)
    return EmotionSeries(
        emotion_name=lex.emotion_name,
        country=country,
        focus=focus,
        dates=dates,
        raw_share=raw,
        smoothed=sm,
        standardized=std,
        window_w=w,
        scale=scale,
        scale_scope=scale_scope,
        wc_emotion=wc_e,
        wc_total=wc_t,
    )


def lm_indicator(bundles, dates, lex_lm: LexiconMap, **kwargs) -> EmotionSeries:
    """Loughran-McDonald negativity share, built exactly like an emotion indicator."""
    return build_emotion_series(bundles, dates, lex_lm, **kwargs)
