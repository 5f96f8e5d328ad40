import math
from datetime import date, datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emospread.emotions import (
    ESTIMATION_WINDOW,
    FULL_SAMPLE,
    EmotionSeries,
    LexiconMap,
    build_emotion_series,
    count_text_words,
    daily_emotion_share,
    load_lexicons,
    smooth,
    standardize,
)
from emospread.errors import ConfigError, DegenerateSeries, EmptyDay, WindowTooLong, ZeroDenominator
from emospread.gkg import GkgRecord
from oracles import window_means

LEX = LexiconMap("Distress", frozenset(["c6.1", "c6.4"]))


def article(wc, **gcam):
    gcam = {k.replace("_", "."): v for k, v in gcam.items()}
    return GkgRecord("x", datetime(2015, 3, 2, tzinfo=timezone.utc), "o", (), (), gcam, wc)


def test_daily_share_pools_words():
    row = daily_emotion_share([article(100, c6_1=3), article(300, c6_1=1, c6_4=4, c5_1=9)], LEX)
    assert (row.wc_emotion, row.wc_total) == (8, 400)
    assert row.share == 8 / 400


def test_daily_share_errors():
    with pytest.raises(EmptyDay):
        daily_emotion_share([], LEX)
    with pytest.raises(ZeroDenominator):
        daily_emotion_share([article(None, c6_1=3)], LEX)


def test_smooth_examples():
    np.testing.assert_array_equal(smooth([1, 2, 3, 4, 5, 6], 3)[2:], [2, 3, 4, 5])
    assert np.isnan(smooth([1, 2, 3], 3)[:2]).all()
    with pytest.raises(WindowTooLong):
        smooth([1, 2], 3)
    with pytest.raises(ValueError):
        smooth([1, 2], 0)


def test_smooth_gap_and_carry_forward():
    x = [1.0, 2.0, np.nan, 4.0, 5.0, 6.0]
    out = smooth(x, 2)
    assert math.isnan(out[2]) and math.isnan(out[3]) and out[4] == 4.5
    cf = smooth(x, 2, carry_forward=True)
    assert cf[3] == 3.0 and cf[2] == 1.5


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=20, max_size=80), st.integers(1, 20))
def test_smooth_matches_loop_oracle(values, w):
    got = smooth(values, w)
    want = window_means(values, w)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_standardize_scopes():
    x = np.array([1.0, 2.0, 3.0, 4.0, np.nan, 10.0])
    z, sd = standardize(x)
    assert sd == pytest.approx(np.nanstd(x, ddof=1))
    assert np.nanstd(z, ddof=1) == pytest.approx(1.0, abs=1e-12)
    z2, sd2 = standardize(x, ESTIMATION_WINDOW, (0, 4))
    assert sd2 == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    np.testing.assert_allclose(z2[:4], np.array([1, 2, 3, 4]) / sd2)
    with pytest.raises(ValueError):
        standardize(x, ESTIMATION_WINDOW)
    with pytest.raises(DegenerateSeries):
        standardize(np.ones(5))
    with pytest.raises(DegenerateSeries):
        standardize([1.0])


def test_count_text_words():
    assert count_text_words("Panic! The panic spread; markets feared.", frozenset(["panic", "feared"])) == (3, 6)


def test_load_lexicons(tmp_path):
    (tmp_path / "words.txt").write_text("Fear\npanic\n\n")
    (tmp_path / "lex.yaml").write_text(
        "emotions:\n  Distress:\n    gcam_keys: [c6.1]\n  LM:\n    gcam_keys: [c5.1]\n    word_list: words.txt\n"
    )
    lex = load_lexicons(tmp_path / "lex.yaml")
    assert lex["Distress"].gcam_keys == frozenset(["c6.1"])
    assert lex["LM"].raw_word_list == frozenset(["fear", "panic"])
    with pytest.raises(ConfigError):
        load_lexicons(tmp_path / "missing.yaml")
    (tmp_path / "empty.yaml").write_text("emotions:\n  X: {}\n")
    with pytest.raises(ConfigError):
        load_lexicons(tmp_path / "empty.yaml")


def test_build_series_marks_missing_days(tmp_path):
    days = [date(2015, 3, d) for d in (2, 3, 4, 5, 6, 9, 10)]
    bundles = {d: [article(100, c6_1=i + 1)] for i, d in enumerate(days) if d != date(2015, 3, 5)}
    s = build_emotion_series(bundles, days, LEX, w=2)
    assert np.isnan(s.raw_share[3])
    np.testing.assert_allclose(s.raw_share[[0, 1, 2]], [0.01, 0.02, 0.03])
    assert np.isnan(s.smoothed[3]) and np.isnan(s.smoothed[4])
    assert np.nanstd(s.standardized, ddof=1) == pytest.approx(1.0, abs=1e-12)
    path = tmp_path / "e.csv"
    s.write_csv(path)
    back = EmotionSeries.read_csv(path, "Distress")
    np.testing.assert_array_equal(back.standardized, s.standardized)
    assert back.dates == s.dates
    assert s.value_map().keys() == {d for d, v in zip(days, s.standardized) if not np.isnan(v)}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.integers(3, 20))
def test_standardized_unit_sd(seed, w):
    rng = np.random.default_rng(seed)
    shares = rng.uniform(0.001, 0.05, size=200)
    z, _ = standardize(smooth(shares, w), FULL_SAMPLE)
    assert abs(np.nanstd(z, ddof=1) - 1.0) <= 1e-12
