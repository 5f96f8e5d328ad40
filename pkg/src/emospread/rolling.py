"""
Emotion-augmented quantile regressions over rolling windows.

A frame row pairs next-day spread change with today's market covariates and
the news indicators lagged ``h`` trading days.  The augmented model carries
both the LM negativity indicator and one emotion indicator; the benchmark
drops the emotion.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .emotions import EmotionSeries, standardize, ESTIMATION_WINDOW
from .errors import (
    CalendarMismatch,
    EmospreadError,
    InsufficientRows,
    UnboundedInterval,
)
from .market import MarketSeries
from .quantreg import (
    INTERCEPT,
    QuantileFit,
    RegressionFrame,
    check_loss,
    fit_quantile,
    predict,
    rank_inversion_ci,
)

FRAME_COLUMNS = (INTERCEPT, "d_spread", "crd", "d_liq", "d_vstoxx", "lm", "emotion")
EMOTION = "emotion"
LM = "lm"
DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


def build_regression_frame(
    market: MarketSeries,
    lm: EmotionSeries,
    emotion: EmotionSeries,
    q: float = 0.95,
    h: int = 1,
    min_rows: Optional[int] = None,
) -> RegressionFrame:
    """Align market covariates and lagged news indicators.

    Row ``i`` targets ``spread[i+1] - spread[i]`` and carries ``d_spread``,
    ``crd``, ``d_liq`` and ``d_vstoxx`` at ``i`` plus the LM and emotion
    indicators at market date ``i - h``.  Rows with any missing input are
    dropped.  Differences span calendar gaps between consecutive trading days.
    """
    if h < 0:
        raise ValueError("lag h must be non-negative")
    mdates = market.dates
    mset = set(mdates)
    lo, hi = mdates[0], mdates[-1]
    for s in (lm, emotion):
        stray = [d for d in s.dates if lo <= d <= hi and d not in mset]
        if stray:
            raise CalendarMismatch(
                f"{s.emotion_name} has {len(stray)} dates off the market calendar (first {stray[0]})"
            )
    lm_map = lm.value_map()
    emo_map = emotion.value_map()

    target, rows, row_dates = [], [], []
    for i in range(max(1, h), len(mdates) - 1):
        news_day = mdates[i - h]
        if news_day not in lm_map or news_day not in emo_map:
            continue
        values = (
            1.0,
            market.spread[i] - market.spread[i - 1],
            market.crd[i],
            market.liq[i] - market.liq[i - 1],
            market.vstoxx[i] - market.vstoxx[i - 1],
            lm_map[news_day],
            emo_map[news_day],
        )
        y = market.spread[i + 1] - market.spread[i]
        if not all(math.isfinite(v) for v in values) or not math.isfinite(y):
            continue
        target.append(y)
        rows.append(values)
        row_dates.append(mdates[i + 1])
    need = len(FRAME_COLUMNS) + 1 if min_rows is None else min_rows
    if len(rows) < need:
        raise InsufficientRows(f"only {len(rows)} usable rows, need {need}")
    arr = np.array(rows, dtype=float)
    return RegressionFrame(
        target=np.array(target),
        columns={name: arr[:, k] for k, name in enumerate(FRAME_COLUMNS)},
        q=q,
        h=h,
        row_dates=row_dates,
    )


def write_frame_csv(path, frame: RegressionFrame) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,target," + ",".join(frame.names) + "\n")
        for i, d in enumerate(frame.row_dates):
            vals = ",".join(repr(float(frame.columns[k][i])) for k in frame.names)
            fh.write(f"{d.isoformat()},{float(frame.target[i])!r},{vals}\n")


def read_frame_csv(path, q: float, h: int) -> RegressionFrame:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = header[2:]
        dates, target, rows = [], [], []
        for row in reader:
            dates.append(date.fromisoformat(row[0]))
            target.append(float(row[1]))
            rows.append([float(v) for v in row[2:]])
    arr = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return RegressionFrame(np.array(target), {k: arr[:, j] for j, k in enumerate(names)}, q, h, dates)


@dataclass
class RollingConfig:
    q: float = 0.95
    h: int = 1
    window_T0: Optional[int] = None
    ci_level: float = 0.90
    ci_columns: Tuple[str, ...] = (LM, EMOTION)
    benchmark_drop: Tuple[str, ...] = (EMOTION,)
    quantile_grid: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if self.h < 0:
            raise ValueError("h must be non-negative")
        self.ci_columns = tuple(self.ci_columns)
        self.benchmark_drop = tuple(self.benchmark_drop)

    def resolve_window(self, frame: RegressionFrame) -> int:
        """Window length; half the usable frame when not configured."""
        t0 = self.window_T0 if self.window_T0 is not None else len(frame) // 2
        if t0 <= len(frame.names) + 10:
            raise ValueError(f"window_T0={t0} must exceed the number of regressors + 10")
        return t0


@dataclass
class WindowEstimate:
    window_start: date
    window_end: date
    augmented: Optional[QuantileFit]
    benchmark: Optional[QuantileFit]
    status: str = "ok"

    @property
    def r1_diff(self) -> float:
        r1 = [f.pseudo_r1 if f is not None else None for f in (self.augmented, self.benchmark)]
        if None in r1:
            return math.nan
        return r1[0] - r1[1]


@dataclass
class RollingCoefficientPath:
    entries: List[WindowEstimate]
    columns: Tuple[str, ...]
    window_T0: int
    skipped: List[Tuple[date, str]] = field(default_factory=list)

    def coefficient(self, name: str, model: str = "augmented") -> np.ndarray:
        out = []
        for e in self.entries:
            fit = getattr(e, model)
            out.append(fit.coefficients.get(name, math.nan) if fit is not None else math.nan)
        return np.array(out)

    def write_csv(self, path) -> None:
        header = ["window_end", "window_start", "status"]
        for model in ("aug", "bench"):
            for c in self.columns:
                header += [f"{model}_{c}", f"{model}_{c}_lo", f"{model}_{c}_hi"]
        header += ["r1_aug", "r1_bench", "r1_diff"]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for e in self.entries:
                row = [e.window_end.isoformat(), e.window_start.isoformat(), e.status]
                for fit in (e.augmented, e.benchmark):
                    for c in self.columns:
                        coef = fit.coefficients.get(c, math.nan) if fit else math.nan
                        lo, hi = fit.ci.get(c, (math.nan, math.nan)) if fit else (math.nan, math.nan)
                        row += [_fmt(coef), _fmt(lo), _fmt(hi)]
                r1a = e.augmented.pseudo_r1 if e.augmented else math.nan
                r1b = e.benchmark.pseudo_r1 if e.benchmark else math.nan
                row += [_fmt(r1a), _fmt(r1b), _fmt(e.r1_diff)]
                fh.write(",".join(row) + "\n")

    def write_r1_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("window_end,r1_augmented,r1_benchmark,r1_diff\n")
            for e in self.entries:
                r1a = e.augmented.pseudo_r1 if e.augmented else math.nan
                r1b = e.benchmark.pseudo_r1 if e.benchmark else math.nan
                fh.write(f"{e.window_end.isoformat()},{_fmt(r1a)},{_fmt(r1b)},{_fmt(e.r1_diff)}\n")


def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _degenerate(frame: RegressionFrame, name: str) -> bool:
    col = frame.columns.get(name)
    return col is not None and bool(np.all(col == col[0]))


class _WarmFitter:
    """Fits successive windows, seeding each solve with the previous basis."""

    def __init__(self):
        self.basis: Dict[Tuple[str, ...], Tuple[int, ...]] = {}

    def fit(self, frame: RegressionFrame, shift: int = 0) -> QuantileFit:
        key = tuple(frame.names)
        prev = self.basis.get(key)
        seed = None if prev is None else [i - shift for i in prev]
        fit = fit_quantile(frame, basis=seed)
        self.basis[key] = fit.basis
        return fit


def _fit_models(window: RegressionFrame, cfg: RollingConfig, fitter: _WarmFitter, shift: int, with_ci: bool):
    status = "ok"
    aug_frame = window
    if _degenerate(window, EMOTION):
        aug_frame = window.drop(EMOTION)
        status = "emotion_degenerate"
    bench_frame = window.drop(*cfg.benchmark_drop)
    aug = fitter.fit(aug_frame, shift)
    bench = fitter.fit(bench_frame, shift)
    if with_ci:
        for fit, fr in ((aug, aug_frame), (bench, bench_frame)):
            fit.ci_level = cfg.ci_level
            for c in cfg.ci_columns:
                if c not in fr.columns:
                    continue
                try:
                    fit.ci[c] = rank_inversion_ci(fr, c, level=cfg.ci_level, fit=fit)
                except UnboundedInterval:
                    fit.ci[c] = (-math.inf, math.inf)
                    status = "ci_unbounded"
    return aug, bench, status


def rolling_fit(frame: RegressionFrame, cfg: RollingConfig, with_ci: bool = True) -> RollingCoefficientPath:
    """Fit both models on every window of ``window_T0`` consecutive rows.

    Windows end at rows ``T0-1 .. n-2`` so that each window is followed by
    one out-of-sample row.  A window whose fit fails is skipped and listed
    in ``skipped``.
    """
    frame = frame.with_quantile(cfg.q)
    t0 = cfg.resolve_window(frame)
    n = len(frame)
    if n < t0 + 1:
        raise InsufficientRows(f"frame has {n} rows, rolling windows need {t0 + 1}")
    fitter = _WarmFitter()
    entries, skipped = [], []
    for k in range(0, n - t0):
        window = frame.subset(slice(k, k + t0))
        end = frame.row_dates[k + t0 - 1]
        try:
            aug, bench, status = _fit_models(window, cfg, fitter, shift=1 if k else 0, with_ci=with_ci)
        except EmospreadError as exc:
            skipped.append((end, f"{type(exc).__name__}: {exc}"))
            fitter.basis.clear()
            continue
        entries.append(WindowEstimate(frame.row_dates[k], end, aug, bench, status))
    return RollingCoefficientPath(entries, tuple(frame.names), t0, skipped)


@dataclass
class ForecastRecord:
    target_date: date
    realized: float
    forecast_augmented: float
    forecast_benchmark: float
    loss_augmented: float
    loss_benchmark: float
    window_start: date
    window_end: date

    @property
    def loss_differential(self) -> float:
        return self.loss_augmented - self.loss_benchmark


FORECAST_HEADER = (
    "target_date,realized,forecast_augmented,forecast_benchmark,"
    "loss_augmented,loss_benchmark,window_start,window_end"
)


def write_forecasts_csv(path, records: Sequence[ForecastRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(FORECAST_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.target_date.isoformat()},{r.realized!r},{r.forecast_augmented!r},"
                f"{r.forecast_benchmark!r},{r.loss_augmented!r},{r.loss_benchmark!r},"
                f"{r.window_start.isoformat()},{r.window_end.isoformat()}\n"
            )


def read_forecasts_csv(path) -> List[ForecastRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                ForecastRecord(
                    date.fromisoformat(row["target_date"]),
                    float(row["realized"]),
                    float(row["forecast_augmented"]),
                    float(row["forecast_benchmark"]),
                    float(row["loss_augmented"]),
                    float(row["loss_benchmark"]),
                    date.fromisoformat(row["window_start"]),
                    date.fromisoformat(row["window_end"]),
                )
            )
    return out


def rescale_news_columns(frame: RegressionFrame, t0: int, columns=(LM, EMOTION)) -> RegressionFrame:
    """Rescale news columns to unit variance over the first ``t0`` rows only."""
    cols = dict(frame.columns)
    for c in columns:
        if c in cols:
            cols[c], _ = standardize(cols[c], ESTIMATION_WINDOW, (0, t0))
    return RegressionFrame(frame.target, cols, frame.q, frame.h, list(frame.row_dates))


def oos_forecast_errors(frame: RegressionFrame, cfg: RollingConfig) -> List[ForecastRecord]:
    """One-step-ahead check losses of the augmented and benchmark models.

    Row ``j`` is forecast from a fit on rows ``j-h-T0 .. j-h-1``, so every
    estimation target precedes the forecast target by at least ``h + 1``
    rows.  Forecasts run for ``j = T0 + h .. n - 1``.
    """
    frame = frame.with_quantile(cfg.q)
    t0 = cfg.resolve_window(frame)
    h = cfg.h
    n = len(frame)
    if n <= t0 + h + 1:
        raise InsufficientRows(f"frame has {n} rows; forecasting needs more than {t0 + h + 1}")
    fitter = _WarmFitter()
    out = []
    first = True
    for j in range(t0 + h, n):
        lo = j - h - t0
        window = frame.subset(slice(lo, lo + t0))
        try:
            aug, bench, _ = _fit_models(window, cfg, fitter, shift=0 if first else 1, with_ci=False)
        except EmospreadError:
            fitter.basis.clear()
            first = True
            continue
        first = False
        row = {k: float(v[j]) for k, v in frame.columns.items()}
        f_aug = predict(aug, row)
        f_bench = predict(bench, row)
        y = float(frame.target[j])
        out.append(
            ForecastRecord(
                target_date=frame.row_dates[j],
                realized=y,
                forecast_augmented=f_aug,
                forecast_benchmark=f_bench,
                loss_augmented=check_loss(y - f_aug, cfg.q),
                loss_benchmark=check_loss(y - f_bench, cfg.q),
                window_start=frame.row_dates[lo],
                window_end=frame.row_dates[lo + t0 - 1],
            )
        )
    return out


def quantile_sweep(
    frame: RegressionFrame,
    grid: Sequence[float] = DEFAULT_GRID,
    columns: Sequence[str] = (EMOTION,),
    level: float = 0.90,
    with_ci: bool = True,
) -> List[dict]:
    """Full-sample fit at each quantile level; one row per (q, column)."""
    rows = []
    basis = None
    for q in grid:
        fr = frame.with_quantile(q)
        fit = fit_quantile(fr, basis=basis)
        basis = fit.basis
        for c in columns:
            lo = hi = math.nan
            if with_ci:
                try:
                    lo, hi = rank_inversion_ci(fr, c, level=level, fit=fit)
                except UnboundedInterval:
                    lo, hi = -math.inf, math.inf
            rows.append({"q": q, "column": c, "coefficient": fit.coefficients[c], "lo": lo, "hi": hi})
    return rows


def write_sweep_csv(path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("q,column,coefficient,ci_lo,ci_hi\n")
        for r in rows:
            fh.write(f"{r['q']!r},{r['column']},{_fmt(r['coefficient'])},{_fmt(r['lo'])},{_fmt(r['hi'])}\n")
