"""
Streaming parser and article filters for GDELT GKG-style metadata files.

Each input line is one news article.  Column positions are declared by a
:class:`GkgSchema` so that files with drifting layouts load without code
changes.  Selected articles are bucketed into trading days following market
opening hours, with weekend news moved to the following Monday.
"""

from __future__ import annotations

import json
import logging
import statistics
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import BadGcam, BadTimestamp, MalformedLine

log = logging.getLogger(__name__)

DOMESTIC = "domestic"
DOMESTIC_OR_PAIRED = "domestic_or_paired"


@dataclass(frozen=True)
class GkgSchema:
    """Column layout of a GKG-style TSV file (0-based indices).

    Defaults follow the GKG 2.1 layout: record id, DATE, SourceCommonName,
    V1 Themes, V1 Locations and GCAM.
    """

    record_id: int = 0
    date: int = 1
    source: int = 3
    themes: int = 7
    locations: int = 9
    gcam: int = 17
    n_columns: Optional[int] = 27
    location_country_pos: int = 2
    word_count_key: str = "wc"
    separator: str = "\t"

    @property
    def min_columns(self) -> int:
        return max(self.record_id, self.date, self.source, self.themes, self.locations, self.gcam) + 1

    @classmethod
    def from_mapping(cls, data: Mapping) -> "GkgSchema":
        return cls(**dict(data))


@dataclass(frozen=True)
class GkgRecord:
    record_id: str
    published_at_utc: datetime
    outlet: str
    themes: Tuple[str, ...]
    locations: Tuple[Tuple[str, int], ...]
    gcam: Mapping[str, int]
    word_count: Optional[int]

    @property
    def word_count_missing(self) -> bool:
        return self.word_count is None

    def to_json(self) -> str:
        return json.dumps(
            {
                "record_id": self.record_id,
                "published_at_utc": self.published_at_utc.strftime("%Y%m%d%H%M%S"),
                "outlet": self.outlet,
                "themes": list(self.themes),
                "locations": [list(loc) for loc in self.locations],
                "gcam": dict(sorted(self.gcam.items())),
                "word_count": self.word_count,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "GkgRecord":
        d = json.loads(text)
        return cls(
            record_id=d["record_id"],
            published_at_utc=parse_timestamp(d["published_at_utc"]),
            outlet=d["outlet"],
            themes=tuple(d["themes"]),
            locations=tuple((c, int(n)) for c, n in d["locations"]),
            gcam={k: int(v) for k, v in d["gcam"].items()},
            word_count=d["word_count"],
        )


@dataclass(frozen=True)
class Focus:
    """Location focus: one domestic country, or a domestic/partner pair."""

    mode: str
    countries: Tuple[str, ...]

    @classmethod
    def domestic(cls, country: str) -> "Focus":
        return cls(DOMESTIC, (country,))

    @classmethod
    def paired(cls, country_a: str, country_b: str) -> "Focus":
        return cls(DOMESTIC_OR_PAIRED, (country_a, country_b))

    def __post_init__(self):
        expected = {DOMESTIC: 1, DOMESTIC_OR_PAIRED: 2}
        if self.mode not in expected:
            raise ValueError(f"unknown focus mode {self.mode!r}")
        if len(self.countries) != expected[self.mode]:
            raise ValueError(f"focus {self.mode} needs {expected[self.mode]} countries")

    @property
    def label(self) -> str:
        return "-".join(self.countries) + ("" if self.mode == DOMESTIC else "-paired")


@dataclass
class ArticleFilterConfig:
    outlet_allowlist: frozenset
    theme_prefixes: Tuple[str, ...]
    focus: Focus
    min_words: int = 100
    min_theme_keywords: int = 4

    def __post_init__(self):
        self.outlet_allowlist = frozenset(_norm_outlet(o) for o in self.outlet_allowlist)
        self.theme_prefixes = tuple(self.theme_prefixes)
        if self.min_words < 1:
            raise ValueError("min_words must be >= 1")
        if self.min_theme_keywords < 1:
            raise ValueError("min_theme_keywords must be >= 1")
        if not self.outlet_allowlist:
            raise ValueError("outlet allowlist must not be empty")
        if not self.theme_prefixes:
            raise ValueError("at least one theme prefix is required")


@dataclass
class TradingCalendar:
    market_open: time = time(9, 0)
    market_close: time = time(17, 30)
    timezone_offset_hours: int = 1
    holidays: frozenset = frozenset()

    def __post_init__(self):
        self.holidays = frozenset(self.holidays)
        if not self.market_open < self.market_close:
            raise ValueError("market_open must precede market_close")
        weekend = sorted(d for d in self.holidays if d.weekday() >= 5)
        if weekend:
            raise ValueError(f"holidays fall on weekends: {weekend}")

    def is_trading_day(self, d: date) -> bool:
        return d.weekday() < 5 and d not in self.holidays

    def next_trading_day(self, d: date) -> date:
        d = d + timedelta(days=1)
        while not self.is_trading_day(d):
            d += timedelta(days=1)
        return d

    def trading_days(self, start: date, end: date) -> List[date]:
        out, d = [], start
        while d <= end:
            if self.is_trading_day(d):
                out.append(d)
            d += timedelta(days=1)
        return out


# ---------------------------------------------------------------------------
# parsing


def _norm_outlet(name: str) -> str:
    return name.strip().lower()


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if len(text) != 14 or not text.isdigit():
        raise BadTimestamp(f"expected YYYYMMDDHHMMSS, got {text!r}")
    try:
        return datetime.strptime(text, "%Y%m%d%H%M%S").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise BadTimestamp(f"invalid timestamp {text!r}") from exc


def parse_gcam(blob: str) -> Dict[str, int]:
    """Parse a comma-delimited ``key:count`` GCAM field; duplicate keys are summed."""
    out: Dict[str, int] = {}
    blob = blob.strip()
    if not blob:
        return out
    for entry in blob.split(","):
        entry = entry.strip()
        if not entry:
            continue
        key, sep, value = entry.rpartition(":")
        if not sep or not key:
            raise BadGcam(f"GCAM entry without key: {entry!r}")
        value = value.strip()
        if not value.isdigit():
            raise BadGcam(f"GCAM count is not a non-negative integer: {entry!r}")
        out[key] = out.get(key, 0) + int(value)
    return out


def parse_locations(blob: str, country_pos: int = 2) -> Tuple[Tuple[str, int], ...]:
    counts: Counter = Counter()
    for block in blob.split(";"):
        if not block.strip():
            continue
        parts = block.split("#")
        if len(parts) <= country_pos:
            continue
        cc = parts[country_pos].strip()
        if cc:
            counts[cc] += 1
    return tuple(sorted(counts.items()))


def parse_themes(blob: str) -> Tuple[str, ...]:
    # V2 themes carry ",offset" after the code
    return tuple(t.split(",")[0].strip() for t in blob.split(";") if t.strip())


def parse_gkg_line(line: str, schema: GkgSchema = GkgSchema()) -> GkgRecord:
    cols = line.rstrip("\r\n").split(schema.separator)
    if schema.n_columns is not None and len(cols) != schema.n_columns:
        raise MalformedLine(f"expected {schema.n_columns} columns, got {len(cols)}")
    if len(cols) < schema.min_columns:
        raise MalformedLine(f"expected at least {schema.min_columns} columns, got {len(cols)}")
    gcam = parse_gcam(cols[schema.gcam])
    return GkgRecord(
        record_id=cols[schema.record_id],
        published_at_utc=parse_timestamp(cols[schema.date]),
        outlet=cols[schema.source].strip(),
        themes=parse_themes(cols[schema.themes]),
        locations=parse_locations(cols[schema.locations], schema.location_country_pos),
        gcam=gcam,
        word_count=gcam.get(schema.word_count_key),
    )


def format_gkg_line(record: GkgRecord, schema: GkgSchema = GkgSchema()) -> str:
    """Serialise a record into a line that :func:`parse_gkg_line` reads back."""
    width = schema.n_columns or schema.min_columns
    cols = [""] * width
    cols[schema.record_id] = record.record_id
    cols[schema.date] = record.published_at_utc.strftime("%Y%m%d%H%M%S")
    cols[schema.source] = record.outlet
    cols[schema.themes] = ";".join(record.themes)
    blocks = []
    for cc, n in record.locations:
        parts = ["1", f"Place {cc}", "", "", "0", "0", cc]
        parts[schema.location_country_pos] = cc
        blocks.extend(["#".join(parts)] * n)
    cols[schema.locations] = ";".join(blocks)
    gcam = dict(record.gcam)
    if record.word_count is not None:
        gcam[schema.word_count_key] = record.word_count
    else:
        gcam.pop(schema.word_count_key, None)
    cols[schema.gcam] = ",".join(f"{k}:{v}" for k, v in gcam.items())
    return schema.separator.join(cols)


@dataclass
class ParseStats:
    lines: int = 0
    parsed: int = 0
    errors: Counter = field(default_factory=Counter)


def iter_gkg_lines(lines: Iterable[str], schema: GkgSchema = GkgSchema(), stats: Optional[ParseStats] = None) -> Iterator[GkgRecord]:
    """Parse lines lazily; malformed lines are counted in ``stats`` and skipped."""
    stats = stats if stats is not None else ParseStats()
    for line in lines:
        if not line.strip():
            continue
        stats.lines += 1
        try:
            rec = parse_gkg_line(line, schema)
        except (MalformedLine, BadTimestamp, BadGcam) as exc:
            stats.errors[type(exc).__name__] += 1
            log.debug("skipping line %d: %s", stats.lines, exc)
            continue
        stats.parsed += 1
        yield rec


def iter_gkg_files(paths: Sequence, schema: GkgSchema = GkgSchema(), stats: Optional[ParseStats] = None) -> Iterator[GkgRecord]:
    for path in paths:
        with open(path, encoding="utf-8", errors="replace") as fh:
            yield from iter_gkg_lines(fh, schema, stats)


# ---------------------------------------------------------------------------
# filters


def infer_main_location(record: GkgRecord) -> Optional[str]:
    """Country mentioned strictly more often than any other; None on ties or no locations."""
    top = _top_countries(record)
    return top[0] if len(top) == 1 else None


def _top_countries(record: GkgRecord) -> List[str]:
    if not record.locations:
        return []
    best = max(n for _, n in record.locations)
    return [cc for cc, n in record.locations if n == best]


def passes_focus(record: GkgRecord, cfg: ArticleFilterConfig) -> bool:
    focus = cfg.focus
    top = _top_countries(record)
    if focus.mode == DOMESTIC:
        return top == [focus.countries[0]]
    if len(top) == 1:
        return top[0] in focus.countries
    return set(top) == set(focus.countries)


def theme_keyword_count(record: GkgRecord, prefixes: Sequence[str]) -> int:
    prefixes = tuple(prefixes)
    return sum(1 for t in record.themes if t.startswith(prefixes))


def passes_theme_filter(record: GkgRecord, cfg: ArticleFilterConfig) -> bool:
    return theme_keyword_count(record, cfg.theme_prefixes) >= cfg.min_theme_keywords


def passes_length(record: GkgRecord, cfg: ArticleFilterConfig) -> bool:
    return record.word_count is not None and record.word_count >= cfg.min_words


def passes_outlet(record: GkgRecord, cfg: ArticleFilterConfig) -> bool:
    return _norm_outlet(record.outlet) in cfg.outlet_allowlist


def assign_trading_day(published_at_utc: datetime, cal: TradingCalendar) -> Optional[date]:
    """Trading date an article counts toward, or None when it is omitted.

    Local time is UTC shifted by the calendar offset.  In-session and
    pre-open articles belong to the same day; after-close articles move to
    the next trading day.  Weekend articles go to Monday unless Monday is a
    holiday, and holiday articles are dropped.
    """
    if published_at_utc.tzinfo is not None:
        published_at_utc = published_at_utc.astimezone(timezone.utc).replace(tzinfo=None)
    local = published_at_utc + timedelta(hours=cal.timezone_offset_hours)
    d = local.date()
    if d in cal.holidays:
        return None
    if d.weekday() >= 5:
        monday = d + timedelta(days=7 - d.weekday())
        return monday if monday not in cal.holidays else None
    if local.time() > cal.market_close:
        return cal.next_trading_day(d)
    return d


# reasons an article fails, in the order the filters are applied
REJECT_REASONS = ("too_short", "outlet", "theme", "focus", "omitted")


@dataclass
class ArticleSelection:
    by_day: Dict[date, List[GkgRecord]]
    rejected: Counter
    n_input: int
    parse_stats: Optional[ParseStats] = None

    @property
    def n_selected(self) -> int:
        return sum(len(v) for v in self.by_day.values())

    def counts(self) -> Dict[date, int]:
        return {d: len(v) for d, v in sorted(self.by_day.items())}


def rejection_reason(record: GkgRecord, cfg: ArticleFilterConfig, cal: TradingCalendar) -> Tuple[Optional[str], Optional[date]]:
    if not passes_length(record, cfg):
        return "too_short", None
    if not passes_outlet(record, cfg):
        return "outlet", None
    if not passes_theme_filter(record, cfg):
        return "theme", None
    if not passes_focus(record, cfg):
        return "focus", None
    day = assign_trading_day(record.published_at_utc, cal)
    if day is None:
        return "omitted", None
    return None, day


def select_articles(records: Iterable[GkgRecord], cfg: ArticleFilterConfig, cal: TradingCalendar, parse_stats: Optional[ParseStats] = None) -> ArticleSelection:
    """Apply the length, outlet, theme and focus filters and bucket by trading day.

    Records inside each day keep input order after a stable sort on
    ``(published_at_utc, record_id)``, so sharded inputs merge to the same result.
    """
    by_day: Dict[date, List[GkgRecord]] = {}
    rejected: Counter = Counter()
    n = 0
    for rec in records:
        n += 1
        reason, day = rejection_reason(rec, cfg, cal)
        if reason is not None:
            rejected[reason] += 1
            continue
        by_day.setdefault(day, []).append(rec)
    for day in by_day:
        by_day[day].sort(key=lambda r: (r.published_at_utc, r.record_id))
    return ArticleSelection(dict(sorted(by_day.items())), rejected, n, parse_stats)


def daily_volume(selection: ArticleSelection, cal: TradingCalendar, start: date, end: date) -> List[Tuple[date, int]]:
    """Article count per trading day in ``[start, end]``, zeros included."""
    counts = selection.counts()
    return [(d, counts.get(d, 0)) for d in cal.trading_days(start, end)]


def source_gaps(volume: Sequence[Tuple[date, int]], window: int = 20, drop: float = 0.5) -> List[dict]:
    """Days whose count falls more than ``drop`` below the trailing ``window``-day median."""
    warnings = []
    for i in range(window, len(volume)):
        med = statistics.median(c for _, c in volume[i - window:i])
        d, c = volume[i]
        if med > 0 and c < (1.0 - drop) * med:
            warnings.append({"date": d, "count": c, "trailing_median": med})
    return warnings


def write_volume_csv(path, volume: Sequence[Tuple[date, int]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,count\n")
        for d, c in volume:
            fh.write(f"{d.isoformat()},{c}\n")


def write_bundles(path, selection: ArticleSelection) -> None:
    """One JSON object per selected article, tagged with its trading date."""
    with open(path, "w", encoding="utf-8") as fh:
        for d, recs in selection.by_day.items():
            for rec in recs:
                obj = json.loads(rec.to_json())
                obj["trading_date"] = d.isoformat()
                fh.write(json.dumps(obj, sort_keys=True) + "\n")


def read_bundles(path) -> Dict[date, List[GkgRecord]]:
    out: Dict[date, List[GkgRecord]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            d = date.fromisoformat(obj.pop("trading_date"))
            out.setdefault(d, []).append(GkgRecord.from_json(json.dumps(obj)))
    return dict(sorted(out.items()))
