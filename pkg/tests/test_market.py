from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emospread.errors import BadRow, DuplicateDate, EmptyFile, EmptyYear
from emospread.events import DEFAULT_EVENTS, Event, EventCalendar
from emospread.market import MarketSeries, descriptive_stats, differenced, load_market_csv, lower_quantile
from oracles import sorted_quantile_lower

HEADER = "date,spread,crd,liq,vstoxx\n"


def test_load_small_file(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text(HEADER + "2015-03-02,100,0.1,1.0,20\n2015-03-03,101,-0.2,1.1,21\n2015-03-04,99,0.3,,22\n")
    m = load_market_csv(p, country="IT")
    assert len(m) == 3 and m.country == "IT"
    assert np.isnan(m.liq[2])


def test_column_mapping(tmp_path):
    p = tmp_path / "bbg.csv"
    p.write_text("Date,BTP_BUND,FTSEMIB,BIDASK,V2X,extra\n2015-03-02,100,0.1,1.0,20,x\n")
    m = load_market_csv(p, {"date": "Date", "spread": "BTP_BUND", "crd": "FTSEMIB", "liq": "BIDASK", "vstoxx": "V2X"})
    assert m.spread[0] == 100 and m.vstoxx[0] == 20


def test_shuffled_rows_equal_sorted(tmp_path):
    rows = [f"2015-03-{d:02d},{100 + d},{d / 10},{1 + d / 100},{20 + d}\n" for d in range(2, 20)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text(HEADER + "".join(rows))
    rng = np.random.default_rng(0)
    b.write_text(HEADER + "".join(rows[i] for i in rng.permutation(len(rows))))
    ma, mb = load_market_csv(a), load_market_csv(b)
    assert ma.dates == mb.dates
    for f in ("spread", "crd", "liq", "vstoxx"):
        np.testing.assert_array_equal(getattr(ma, f), getattr(mb, f))


def test_load_errors(tmp_path):
    p = tmp_path / "dup.csv"
    p.write_text(HEADER + "2015-03-02,1,1,1,1\n2015-03-02,2,2,2,2\n")
    with pytest.raises(DuplicateDate):
        load_market_csv(p)
    p.write_text("")
    with pytest.raises(EmptyFile):
        load_market_csv(p)
    p.write_text(HEADER)
    with pytest.raises(EmptyFile):
        load_market_csv(p)
    p.write_text(HEADER + "2015-03-02,abc,1,1,1\n")
    with pytest.raises(BadRow):
        load_market_csv(p)
    p.write_text("date,spread\n2015-03-02,1\n")
    with pytest.raises(BadRow):
        load_market_csv(p)


def test_series_invariants():
    with pytest.raises(DuplicateDate):
        MarketSeries("IT", [date(2015, 1, 2)] * 2, *(np.zeros(2),) * 4)
    with pytest.raises(ValueError):
        MarketSeries("IT", [date(2015, 1, 3), date(2015, 1, 2)], *(np.zeros(2),) * 4)


def series(values, start=date(2015, 1, 1)):
    n = len(values)
    v = np.asarray(values, dtype=float)
    return MarketSeries("IT", [start + timedelta(days=i) for i in range(n)], v, v, v, v)


def test_lower_quantile_examples():
    x = np.arange(1, 101)
    assert lower_quantile(x, 0.05) == 5 and lower_quantile(x, 0.95) == 95


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60), st.floats(0.01, 0.99))
def test_lower_quantile_matches_sort_oracle(values, q):
    assert lower_quantile(values, q) == sorted_quantile_lower(values, q)


def test_descriptive_stats_constant_and_ramp():
    rows = descriptive_stats(series([7.0] * 30), by_year=False)
    spread = next(r for r in rows if r["variable"] == "Spread")
    assert spread["sd"] == 0 and spread["p05"] == spread["p95"] == spread["mean"] == 7.0
    rows = descriptive_stats(series(np.arange(1, 101)), by_year=False)
    spread = next(r for r in rows if r["variable"] == "Spread")
    assert (spread["p05"], spread["p95"]) == (5.0, 95.0)
    d = next(r for r in rows if r["variable"] == "DeltaSpread")
    assert d["n"] == 99 and d["mean"] == 1.0


def test_descriptive_stats_by_year():
    m = series(np.arange(400.0), start=date(2015, 12, 1))
    rows = descriptive_stats(m)
    assert {r["group"] for r in rows} == {2015, 2016, 2017}
    with pytest.raises(EmptyYear):
        descriptive_stats(m, years=[2014])


def test_differenced_lengths():
    d = differenced(series(np.arange(10.0) ** 2))
    assert all(len(v) == 9 for v in d.values())
    np.testing.assert_array_equal(d["d_spread"], np.arange(1, 19, 2))


def test_event_calendar(tmp_path, caplog):
    cal = EventCalendar()
    assert len(cal) == 16
    e11 = next(e for e in DEFAULT_EVENTS if e.id == 11)
    assert e11.date == date(2018, 5, 29) and e11.label == "Political crisis in Italy and in Spain"
    with caplog.at_level("WARNING"):
        kept = cal.write_csv(tmp_path / "ev.csv", date(2018, 1, 1), date(2018, 12, 31))
    assert [e.id for e in kept] == [9, 10, 11, 12, 13, 14]
    assert "outside the sample" in caplog.text
    lines = (tmp_path / "ev.csv").read_text().splitlines()
    assert lines[0] == "id,date,label" and len(lines) == 7
    with pytest.raises(ValueError):
        EventCalendar([Event(1, date(2015, 1, 1), "a"), Event(1, date(2015, 1, 2), "b")])
