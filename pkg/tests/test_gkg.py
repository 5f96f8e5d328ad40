import json
from collections import Counter
from datetime import date, datetime, time, timezone

import pytest
from hypothesis import given, settings, strategies as st

from emospread.errors import BadGcam, BadTimestamp, MalformedLine
from emospread.gkg import (
    ArticleFilterConfig,
    Focus,
    GkgRecord,
    GkgSchema,
    ParseStats,
    TradingCalendar,
    assign_trading_day,
    format_gkg_line,
    infer_main_location,
    iter_gkg_files,
    iter_gkg_lines,
    parse_gcam,
    parse_gkg_line,
    parse_locations,
    parse_themes,
    parse_timestamp,
    passes_focus,
    read_bundles,
    select_articles,
    source_gaps,
    theme_keyword_count,
    write_bundles,
)

UTC = timezone.utc


def rec(**kw):
    base = dict(
        record_id="r1",
        published_at_utc=datetime(2015, 3, 4, 10, 0, tzinfo=UTC),
        outlet="ilsole24ore.com",
        themes=("WB_1104_A",) * 4,
        locations=(("IT", 3), ("SP", 1)),
        gcam={"c6.1": 3},
        word_count=500,
    )
    base.update(kw)
    return GkgRecord(**base)


def cfg(focus=None, **kw):
    return ArticleFilterConfig(
        frozenset(["ilsole24ore.com"]), ("WB_1104_",), focus or Focus.domestic("IT"), **kw
    )


# -- parsing -----------------------------------------------------------------


def test_parse_timestamp():
    assert parse_timestamp("20150302093000") == datetime(2015, 3, 2, 9, 30, tzinfo=UTC)
    for bad in ("2015030209300", "2015-03-02", "20151302093000", ""):
        with pytest.raises(BadTimestamp):
            parse_timestamp(bad)


def test_parse_gcam():
    assert parse_gcam("wc:120,c6.1:3,c6.1:2") == {"wc": 120, "c6.1": 5}
    assert parse_gcam("") == {}
    # keys may contain colons; the count follows the last one
    assert parse_gcam("v10.1:x:7") == {"v10.1:x": 7}
    for bad in ("wc", "wc:-1", "wc:1.5", ":4"):
        with pytest.raises(BadGcam):
            parse_gcam(bad)


def test_parse_locations_counts_blocks_per_country():
    blob = "1#Rome, Italy#IT#IT07#41.9#12.5#-1;4#Madrid#SP#SP29#0#0#1;1#Milan#IT#IT09#0#0#2"
    assert parse_locations(blob) == (("IT", 2), ("SP", 1))
    assert parse_locations("") == ()
    assert parse_locations("1#Broken") == ()


def test_parse_themes_strips_offsets():
    assert parse_themes("WB_1104_X,120;TAX_Y;;EPU_Z,7") == ("WB_1104_X", "TAX_Y", "EPU_Z")


def test_parse_line_column_count():
    with pytest.raises(MalformedLine):
        parse_gkg_line("a\tb\tc")


def test_schema_drift_is_configuration():
    schema = GkgSchema.from_mapping({"record_id": 0, "date": 1, "source": 2, "themes": 3, "locations": 4, "gcam": 5, "n_columns": 6})
    line = "\t".join(["X1", "20150302120000", "repubblica.it", "WB_1104_A;WB_1104_B", "1#Rome#IT#a#0#0#0", "wc:150,c6.1:2"])
    r = parse_gkg_line(line, schema)
    assert r.outlet == "repubblica.it" and r.word_count == 150 and r.locations == (("IT", 1),)


def test_missing_word_count_is_none():
    r = rec(word_count=None)
    back = parse_gkg_line(format_gkg_line(r))
    assert back.word_count is None and back.word_count_missing


names = st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789", min_size=1, max_size=12)


@settings(max_examples=60, deadline=None)
@given(
    rid=names,
    ts=st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2030, 1, 1)),
    themes=st.lists(names, max_size=8),
    locs=st.dictionaries(st.sampled_from(["IT", "SP", "FR", "GM", "US"]), st.integers(1, 5)),
    gcam=st.dictionaries(st.from_regex(r"c[0-9]{1,2}\.[0-9]{1,2}", fullmatch=True), st.integers(0, 10_000)),
    wc=st.one_of(st.none(), st.integers(0, 100_000)),
)
def test_format_parse_round_trip(rid, ts, themes, locs, gcam, wc):
    r = GkgRecord(
        rid, ts.replace(microsecond=0, tzinfo=UTC), "example.com", tuple(themes), tuple(sorted(locs.items())), gcam, wc
    )
    back = parse_gkg_line(format_gkg_line(r))
    expected_gcam = dict(gcam)
    if wc is not None:
        expected_gcam["wc"] = wc
    assert back.record_id == r.record_id
    assert back.published_at_utc == r.published_at_utc
    assert back.themes == r.themes
    assert back.locations == r.locations
    assert dict(back.gcam) == expected_gcam
    assert back.word_count == wc


def test_record_json_round_trip():
    r = rec()
    assert GkgRecord.from_json(r.to_json()) == r


def test_iter_lines_counts_errors():
    good = format_gkg_line(rec())
    stats = ParseStats()
    out = list(iter_gkg_lines([good, "bad\tline", "", good], stats=stats))
    assert len(out) == 2
    assert stats.lines == 3 and stats.parsed == 2 and stats.errors == Counter({"MalformedLine": 1})


# -- filters -----------------------------------------------------------------


def test_infer_main_location():
    assert infer_main_location(rec(locations=(("IT", 3), ("SP", 1)))) == "IT"
    assert infer_main_location(rec(locations=(("IT", 2), ("SP", 2)))) is None
    assert infer_main_location(rec(locations=())) is None


def test_focus_modes():
    tie = rec(locations=(("IT", 2), ("SP", 2)))
    sp = rec(locations=(("SP", 2), ("IT", 1)))
    three = rec(locations=(("FR", 2), ("IT", 2), ("SP", 2)))
    dom, pair = cfg(), cfg(Focus.paired("IT", "SP"))
    assert not passes_focus(tie, dom) and passes_focus(tie, pair)
    assert not passes_focus(sp, dom) and passes_focus(sp, pair)
    assert not passes_focus(three, pair)


def test_theme_counting_uses_prefixes():
    r = rec(themes=("WB_1104_A", "WB_1104_A", "XWB_1104_B", "wb_1104_c", "WB_11"))
    assert theme_keyword_count(r, ("WB_1104_",)) == 2


def test_filter_config_validation():
    with pytest.raises(ValueError):
        ArticleFilterConfig(frozenset(), ("WB",), Focus.domestic("IT"))
    with pytest.raises(ValueError):
        Focus("domestic", ("IT", "SP"))


# -- trading calendar --------------------------------------------------------

CAL = TradingCalendar(holidays=frozenset([date(2015, 4, 6)]))


@pytest.mark.parametrize(
    "utc, expected",
    [
        (datetime(2015, 3, 4, 10, 0), date(2015, 3, 4)),  # in session
        (datetime(2015, 3, 4, 16, 30), date(2015, 3, 4)),  # 17:30 local, at the close
        (datetime(2015, 3, 4, 16, 31), date(2015, 3, 5)),  # after the close
        (datetime(2015, 3, 4, 6, 0), date(2015, 3, 4)),  # before the open
        (datetime(2015, 3, 3, 23, 30), date(2015, 3, 4)),  # local date already next day
        (datetime(2015, 3, 6, 18, 0), date(2015, 3, 9)),  # Friday evening
        (datetime(2015, 3, 7, 12, 0), date(2015, 3, 9)),  # Saturday
        (datetime(2015, 3, 8, 12, 0), date(2015, 3, 9)),  # Sunday
        (datetime(2015, 4, 6, 10, 0), None),  # holiday
        (datetime(2015, 4, 4, 10, 0), None),  # weekend before a holiday Monday
        (datetime(2015, 4, 2, 18, 0), date(2015, 4, 3)),
        (datetime(2015, 4, 3, 18, 0), date(2015, 4, 7)),  # Friday after close skips the holiday
    ],
)
def test_assign_trading_day(utc, expected):
    assert assign_trading_day(utc.replace(tzinfo=UTC), CAL) == expected


def test_calendar_rejects_weekend_holiday():
    with pytest.raises(ValueError):
        TradingCalendar(holidays=frozenset([date(2015, 3, 7)]))


def test_trading_days():
    days = CAL.trading_days(date(2015, 4, 2), date(2015, 4, 8))
    assert days == [date(2015, 4, 2), date(2015, 4, 3), date(2015, 4, 7), date(2015, 4, 8)]


# -- selection ---------------------------------------------------------------


def test_select_articles_reasons_and_buckets(tmp_path):
    records = [
        rec(record_id="a"),
        rec(record_id="b", word_count=99),
        rec(record_id="c", outlet="other.com"),
        rec(record_id="d", themes=("WB_1104_A",) * 3),
        rec(record_id="e", locations=(("FR", 3),)),
        rec(record_id="f", published_at_utc=datetime(2015, 4, 6, 10, tzinfo=UTC)),
        rec(record_id="g", published_at_utc=datetime(2015, 3, 7, 10, tzinfo=UTC)),
        rec(record_id="h", word_count=100, outlet="  ILSOLE24ORE.com"),
    ]
    sel = select_articles(records, cfg(), CAL)
    assert sel.rejected == Counter({"too_short": 1, "outlet": 1, "theme": 1, "focus": 1, "omitted": 1})
    assert {d: [r.record_id for r in v] for d, v in sel.by_day.items()} == {
        date(2015, 3, 4): ["a", "h"],
        date(2015, 3, 9): ["g"],
    }
    path = tmp_path / "b.jsonl"
    write_bundles(path, sel)
    assert read_bundles(path) == sel.by_day


def test_selection_is_order_independent():
    records = [rec(record_id=f"r{i}", published_at_utc=datetime(2015, 3, 4, 9 + i % 5, tzinfo=UTC)) for i in range(10)]
    a = select_articles(records, cfg(), CAL)
    b = select_articles(list(reversed(records)), cfg(), CAL)
    assert a.by_day == b.by_day


def test_source_gaps_flags_drop():
    vol = [(date(2015, 1, 1), 10)] * 20 + [(date(2015, 2, 2), 4), (date(2015, 2, 3), 9)]
    gaps = source_gaps(vol, window=20, drop=0.5)
    assert [g["date"] for g in gaps] == [date(2015, 2, 2)]


def test_fixture_file_parses(fixtures_dir):
    stats = ParseStats()
    recs = list(iter_gkg_files([fixtures_dir / "gkg_fixture.tsv"], stats=stats))
    expected = json.loads((fixtures_dir / "gkg_fixture_expected.json").read_text())
    assert len(recs) == 500 == len(expected["records"])
    assert sum(stats.errors.values()) == expected["malformed_lines"]
