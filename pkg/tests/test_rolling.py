import math
from datetime import date, timedelta

import numpy as np
import pytest

from emospread.emotions import EmotionSeries
from emospread.errors import CalendarMismatch, InsufficientRows
from emospread.market import MarketSeries
from emospread.quantreg import RegressionFrame, check_loss, fit_quantile, solve_qr
from emospread.rolling import (
    FRAME_COLUMNS,
    RollingConfig,
    build_regression_frame,
    oos_forecast_errors,
    quantile_sweep,
    read_forecasts_csv,
    read_frame_csv,
    rescale_news_columns,
    rolling_fit,
    write_forecasts_csv,
    write_frame_csv,
    write_sweep_csv,
)


def weekdays(n, start=date(2015, 3, 2)):
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def news(name, dates, values):
    v = np.asarray(values, dtype=float)
    return EmotionSeries(name, "IT", "IT", list(dates), v, v, v)


def toy_inputs(n=8):
    dates = weekdays(n)
    k = np.arange(n, dtype=float)
    market = MarketSeries("IT", dates, 100 + k**2, 10 + k, 1 + 0.5 * k, 20 - k)
    lm = news("LM", dates, 1000 + k)
    emo = news("Distress", dates, 2000 + k)
    return market, lm, emo


def test_frame_alignment_by_hand():
    market, lm, emo = toy_inputs()
    fr = build_regression_frame(market, lm, emo, q=0.9, h=2, min_rows=1)
    assert fr.names == list(FRAME_COLUMNS)
    # first row i = 2: target spread[3] - spread[2] = 9 - 4, news from day 0
    assert fr.target[0] == 5.0
    assert fr.columns["d_spread"][0] == 3.0  # spread[2] - spread[1]
    assert fr.columns["crd"][0] == 12.0
    assert fr.columns["d_liq"][0] == 0.5
    assert fr.columns["d_vstoxx"][0] == -1.0
    assert fr.columns["lm"][0] == 1000.0 and fr.columns["emotion"][0] == 2000.0
    assert fr.row_dates[0] == market.dates[3]
    assert len(fr) == 8 - 1 - 2


def test_frame_drops_missing_news_rows():
    market, lm, emo = toy_inputs()
    emo.standardized[1] = np.nan
    fr = build_regression_frame(market, lm, emo, h=0, min_rows=1)
    # row 1 uses news day 1 and is dropped; row 0 needs a lagged difference
    assert fr.row_dates[0] == market.dates[3]
    assert len(fr) == 5


def test_frame_errors():
    market, lm, emo = toy_inputs()
    odd = news("Distress", [market.dates[0] + timedelta(days=5)], [1.0])  # a Saturday
    with pytest.raises(CalendarMismatch):
        build_regression_frame(market, lm, odd)
    with pytest.raises(InsufficientRows):
        build_regression_frame(market, lm, emo, h=1)


def random_frame(n=160, seed=0, q=0.9):
    rng = np.random.default_rng(seed)
    cols = {"intercept": np.ones(n)}
    for c in FRAME_COLUMNS[1:]:
        cols[c] = rng.normal(size=n)
    y = cols["crd"] + (1 + 0.3 * np.abs(cols["emotion"])) * rng.normal(size=n)
    return RegressionFrame(y, cols, q=q, h=1, row_dates=weekdays(n))


def test_rolling_config_validation():
    with pytest.raises(ValueError):
        RollingConfig(q=1.0)
    with pytest.raises(ValueError):
        RollingConfig(h=-1)
    fr = random_frame(40)
    assert RollingConfig().resolve_window(random_frame(100)) == 50
    with pytest.raises(ValueError):
        RollingConfig(window_T0=15).resolve_window(fr)


def test_rolling_windows_match_independent_fits():
    fr = random_frame(90)
    cfg = RollingConfig(q=0.9, window_T0=60)
    path = rolling_fit(fr, cfg, with_ci=False)
    assert len(path.entries) == 90 - 60
    X_aug = fr.design()
    X_bench = fr.drop("emotion").design()
    for k, e in enumerate(path.entries):
        assert e.window_start == fr.row_dates[k] and e.window_end == fr.row_dates[k + 59]
        rows = slice(k, k + 60)
        ref_aug = solve_qr(X_aug[rows], fr.target[rows], 0.9)[0]
        ref_bench = solve_qr(X_bench[rows], fr.target[rows], 0.9)[0]
        obj = lambda X, b: check_loss(fr.target[rows] - X[rows] @ b, 0.9).sum()
        got_aug = np.array(list(e.augmented.coefficients.values()))
        got_bench = np.array(list(e.benchmark.coefficients.values()))
        assert obj(X_aug, got_aug) == pytest.approx(obj(X_aug, ref_aug), rel=1e-10, abs=1e-10)
        assert obj(X_bench, got_bench) == pytest.approx(obj(X_bench, ref_bench), rel=1e-10, abs=1e-10)
        assert e.r1_diff >= -1e-12  # nested models


def test_rolling_ci_and_csv(tmp_path):
    fr = random_frame(60, seed=3)
    path = rolling_fit(fr, RollingConfig(q=0.5, window_T0=55))
    e = path.entries[0]
    lo, hi = e.augmented.ci["emotion"]
    assert lo <= e.augmented.coefficients["emotion"] <= hi
    assert "emotion" not in e.benchmark.ci and "lm" in e.benchmark.ci
    path.write_csv(tmp_path / "r.csv")
    path.write_r1_csv(tmp_path / "r1.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 1 + len(path.entries)
    assert lines[0].startswith("window_end,window_start,status,aug_intercept")
    assert math.isnan(path.coefficient("emotion", "benchmark")[0])


def test_degenerate_emotion_window():
    fr = random_frame(60)
    fr.columns["emotion"][:40] = 0.0
    path = rolling_fit(fr, RollingConfig(q=0.5, window_T0=30), with_ci=False)
    statuses = [e.status for e in path.entries]
    assert statuses[0] == "emotion_degenerate" and statuses[-1] == "ok"
    assert "emotion" not in path.entries[0].augmented.coefficients


def test_forecast_windows_and_values():
    fr = random_frame(80, seed=5)
    cfg = RollingConfig(q=0.9, h=2, window_T0=50)
    recs = oos_forecast_errors(fr, cfg)
    assert len(recs) == 80 - 50 - 2
    for r in recs:
        j = fr.row_dates.index(r.target_date)
        lo = j - 2 - 50
        assert r.window_start == fr.row_dates[lo] and r.window_end == fr.row_dates[lo + 49]
        assert r.window_end < r.target_date
        fit = fit_quantile(fr.subset(slice(lo, lo + 50)))
        x = fr.design()[j]
        assert r.forecast_augmented == pytest.approx(float(x @ np.array(list(fit.coefficients.values()))), abs=1e-9)
        assert r.loss_augmented == pytest.approx(check_loss(r.realized - r.forecast_augmented, 0.9))
    assert recs[0].loss_differential == recs[0].loss_augmented - recs[0].loss_benchmark


def test_forecasts_ignore_the_future():
    fr = random_frame(90, seed=6)
    cfg = RollingConfig(q=0.95, h=1, window_T0=40)
    base = oos_forecast_errors(fr, cfg)
    cut = 70
    bad = RegressionFrame(fr.target.copy(), {k: v.copy() for k, v in fr.columns.items()}, fr.q, fr.h, list(fr.row_dates))
    bad.target[cut + 1:] = 1e6
    for k in FRAME_COLUMNS[1:]:
        bad.columns[k][cut + 1:] = -1e6
    corrupted = oos_forecast_errors(bad, cfg)
    d = fr.row_dates[cut]
    before = [(a, b) for a, b in zip(base, corrupted) if a.target_date <= d]
    assert before and all(a == b for a, b in before)


def test_rescale_uses_first_window_only():
    fr = random_frame(100)
    out = rescale_news_columns(fr, 40)
    sd = np.std(fr.columns["emotion"][:40], ddof=1)
    np.testing.assert_allclose(out.columns["emotion"], fr.columns["emotion"] / sd)
    np.testing.assert_array_equal(out.columns["crd"], fr.columns["crd"])


def test_csv_round_trips(tmp_path):
    fr = random_frame(70)
    write_frame_csv(tmp_path / "f.csv", fr)
    back = read_frame_csv(tmp_path / "f.csv", 0.9, 1)
    np.testing.assert_array_equal(back.target, fr.target)
    assert back.names == fr.names and back.row_dates == fr.row_dates
    recs = oos_forecast_errors(fr, RollingConfig(q=0.9, window_T0=50))
    write_forecasts_csv(tmp_path / "fc.csv", recs)
    assert read_forecasts_csv(tmp_path / "fc.csv") == recs


def test_quantile_sweep(tmp_path):
    fr = random_frame(200, seed=8)
    rows = quantile_sweep(fr, (0.1, 0.5, 0.9), with_ci=True)
    assert [r["q"] for r in rows] == [0.1, 0.5, 0.9]
    assert all(r["lo"] <= r["coefficient"] <= r["hi"] for r in rows)
    write_sweep_csv(tmp_path / "s.csv", rows)
    assert (tmp_path / "s.csv").read_text().startswith("q,column,coefficient,ci_lo,ci_hi\n")
