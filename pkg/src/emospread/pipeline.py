"""
End-to-end orchestration: ingest, emotions, frames, rolling fits, forecasts,
fluctuation tests and the report bundle.

Every stage reads its inputs from the output directory when they are not
passed in memory, so stages can be run one at a time from the command line
or all at once with :func:`run_pipeline`.  Outputs are plain CSV/JSON with
no timestamps, so identical inputs give byte-identical bundles.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy

from . import __version__
from .config import PipelineConfig
from .emotions import EmotionSeries, build_emotion_series
from .errors import EmospreadError, StageError
from .events import DEFAULT_EVENTS, EventCalendar
from .fluctuation import (
    FluctuationConfig,
    FluctuationPath,
    LossDifferentialSeries,
    fluctuation_statistics,
)
from .gkg import (
    ParseStats,
    daily_volume,
    iter_gkg_files,
    read_bundles,
    select_articles,
    source_gaps,
    write_bundles,
    write_volume_csv,
)
from .market import MarketSeries, descriptive_stats, load_market_csv, write_stats_csv
from .rolling import (
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

log = logging.getLogger(__name__)

ARTICLES = "articles.jsonl"
MANIFEST = "manifest.json"
STAGES = ("ingest", "emotions", "frame", "rolling", "forecast", "fluctuation", "report")


def _qtag(q: float) -> str:
    return f"q{q:g}"


def combo_tag(emotion: str, q: float, h: int) -> str:
    return f"{emotion}_{_qtag(q)}_h{h}"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class ReportBundle:
    """Stage results kept in memory plus the files written so far."""

    outdir: Path
    market: Optional[MarketSeries] = None
    emotions: Dict[str, EmotionSeries] = field(default_factory=dict)
    frames: Dict[Tuple[str, int], object] = field(default_factory=dict)
    forecasts: Dict[str, list] = field(default_factory=dict)
    fluctuation: Dict[str, FluctuationPath] = field(default_factory=dict)
    stats: List[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    files: List[str] = field(default_factory=list)

    def path(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.outdir / name


def _stage(name):
    """Re-raise library errors as :class:`StageError` tagged with the stage."""

    def wrap(fn):
        def inner(cfg, bundle, *args, **kwargs):
            log.info("stage %s", name)
            try:
                return fn(cfg, bundle, *args, **kwargs)
            except StageError:
                raise
            except (EmospreadError, OSError, ValueError) as exc:
                raise StageError(name, f"{type(exc).__name__}: {exc}", getattr(exc, "filename", None)) from exc

        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner

    return wrap


def _need(bundle: ReportBundle, name: str, stage: str) -> Path:
    p = bundle.outdir / name
    if not p.is_file():
        raise StageError(stage, f"missing {name}; run the earlier stages first", str(p))
    return p


def load_market(cfg: PipelineConfig) -> MarketSeries:
    return load_market_csv(cfg.market_path(), cfg.market_columns, cfg.country).between(cfg.start, cfg.end)


# ---------------------------------------------------------------------------
# stages


@_stage("ingest")
def stage_ingest(cfg: PipelineConfig, bundle: ReportBundle):
    stats = ParseStats()
    records = iter_gkg_files(cfg.gkg_paths(), cfg.gkg_schema, stats)
    cal = cfg.calendar()
    selection = select_articles(records, cfg.article_filter(), cal, stats)
    # keep only the configured sample
    selection.by_day = {d: v for d, v in selection.by_day.items() if cfg.start <= d <= cfg.end}
    write_bundles(bundle.path(ARTICLES), selection)
    volume = daily_volume(selection, cal, cfg.start, cfg.end)
    write_volume_csv(bundle.path("volume.csv"), volume)
    gaps = source_gaps(volume)
    for g in gaps:
        log.warning("article volume drop on %s: %d vs median %.1f", g["date"], g["count"], g["trailing_median"])
    summary = {
        "lines": stats.lines,
        "parsed": stats.parsed,
        "parse_errors": dict(sorted(stats.errors.items())),
        "input_records": selection.n_input,
        "selected": selection.n_selected,
        "rejected": dict(sorted(selection.rejected.items())),
        "focus": cfg.focus().label,
        "volume_warnings": [g["date"].isoformat() for g in gaps],
    }
    with open(bundle.path("ingest_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    bundle.summary["ingest"] = summary
    return selection


@_stage("emotions")
def stage_emotions(cfg: PipelineConfig, bundle: ReportBundle, by_day=None) -> Dict[str, EmotionSeries]:
    lex = cfg.lexicons()
    if by_day is None:
        by_day = read_bundles(_need(bundle, ARTICLES, "emotions"))
    market = bundle.market or load_market(cfg)
    bundle.market = market
    out = {}
    for name in (*cfg.emotion_names, cfg.lm_name):
        series = build_emotion_series(
            by_day,
            market.dates,
            lex[name],
            country=cfg.country,
            focus=cfg.focus().label,
            w=cfg.window_w,
            scale_scope=cfg.scale_scope,
            carry_forward=cfg.carry_forward,
        )
        series.write_csv(bundle.path(f"emotion_{name}.csv"))
        out[name] = series
    bundle.emotions = out
    return out


def _emotion(cfg, bundle, name, stage) -> EmotionSeries:
    if name not in bundle.emotions:
        p = _need(bundle, f"emotion_{name}.csv", stage)
        bundle.emotions[name] = EmotionSeries.read_csv(p, name, cfg.country, cfg.focus().label)
    return bundle.emotions[name]


@_stage("frame")
def stage_frame(cfg: PipelineConfig, bundle: ReportBundle):
    market = bundle.market or load_market(cfg)
    bundle.market = market
    lm = _emotion(cfg, bundle, cfg.lm_name, "frame")
    for name in cfg.emotion_names:
        emo = _emotion(cfg, bundle, name, "frame")
        for h in cfg.h:
            fr = build_regression_frame(market, lm, emo, cfg.q[0], h)
            write_frame_csv(bundle.path(f"frame_{name}_h{h}.csv"), fr)
            bundle.frames[(name, h)] = fr
    return bundle.frames


def _frame(cfg, bundle, name, h, q, stage):
    if (name, h) not in bundle.frames:
        p = _need(bundle, f"frame_{name}_h{h}.csv", stage)
        bundle.frames[(name, h)] = read_frame_csv(p, q, h)
    return bundle.frames[(name, h)].with_quantile(q)


def _rolling_config(cfg: PipelineConfig, q: float, h: int) -> RollingConfig:
    return RollingConfig(q=q, h=h, window_T0=cfg.window_T0, ci_level=cfg.ci_level, ci_columns=cfg.ci_columns)


@_stage("rolling")
def stage_rolling(cfg: PipelineConfig, bundle: ReportBundle):
    for name in cfg.emotion_names:
        for h in cfg.h:
            for q in cfg.q:
                fr = _frame(cfg, bundle, name, h, q, "rolling")
                path = rolling_fit(fr, _rolling_config(cfg, q, h), with_ci=cfg.rolling_ci)
                tag = combo_tag(name, q, h)
                path.write_csv(bundle.path(f"rolling_{tag}.csv"))
                path.write_r1_csv(bundle.path(f"r1diff_{tag}.csv"))
                for end, why in path.skipped:
                    log.warning("rolling %s: window ending %s skipped (%s)", tag, end, why)
            if cfg.sweep:
                fr = _frame(cfg, bundle, name, h, cfg.q[0], "rolling")
                rows = quantile_sweep(fr, cfg.quantile_grid, level=cfg.ci_level)
                write_sweep_csv(bundle.path(f"sweep_{name}_h{h}.csv"), rows)


@_stage("forecast")
def stage_forecast(cfg: PipelineConfig, bundle: ReportBundle):
    for name in cfg.emotion_names:
        for h in cfg.h:
            for q in cfg.q:
                fr = _frame(cfg, bundle, name, h, q, "forecast")
                rc = _rolling_config(cfg, q, h)
                # news scale from the first estimation window only
                fr = rescale_news_columns(fr, rc.resolve_window(fr))
                records = oos_forecast_errors(fr, rc)
                tag = combo_tag(name, q, h)
                write_forecasts_csv(bundle.path(f"forecasts_{tag}.csv"), records)
                bundle.forecasts[tag] = records
    return bundle.forecasts


@_stage("fluctuation")
def stage_fluctuation(cfg: PipelineConfig, bundle: ReportBundle):
    fc = FluctuationConfig(mu=cfg.mu, alpha=cfg.alpha, hac_bandwidth=cfg.hac_bandwidth, per_window_sigma=cfg.per_window_sigma)
    verdicts = {}
    for name in cfg.emotion_names:
        for h in cfg.h:
            for q in cfg.q:
                tag = combo_tag(name, q, h)
                records = bundle.forecasts.get(tag)
                if records is None:
                    records = read_forecasts_csv(_need(bundle, f"forecasts_{tag}.csv", "fluctuation"))
                d = LossDifferentialSeries.from_forecasts(records)
                path = fluctuation_statistics(d, fc, zero_variance="inconclusive")
                path.write_csv(bundle.path(f"fluctuation_{tag}.csv"))
                bundle.fluctuation[tag] = path
                verdicts[tag] = {
                    "n_oos": d.n_oos,
                    "m": path.m,
                    "critical_value": path.critical_value,
                    "counts": {v: path.verdicts.count(v) for v in sorted(set(path.verdicts))},
                }
    with open(bundle.path("fluctuation_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(verdicts, fh, indent=2, sort_keys=True)
        fh.write("\n")
    bundle.summary["fluctuation"] = verdicts
    return bundle.fluctuation


@_stage("report")
def stage_report(cfg: PipelineConfig, bundle: ReportBundle, events: Optional[EventCalendar] = None):
    market = bundle.market or load_market(cfg)
    bundle.market = market
    bundle.stats = descriptive_stats(market, by_year=True) + descriptive_stats(market, by_year=False)
    return emit_report(bundle, events or EventCalendar(DEFAULT_EVENTS), cfg)


# ---------------------------------------------------------------------------
# report


def input_digests(cfg: PipelineConfig) -> Dict[str, str]:
    paths = [cfg.market_path(), cfg.lexicon_path(), *cfg.gkg_paths()]
    out = {}
    for p in paths:
        try:
            key = p.resolve().relative_to(cfg.base_dir.resolve()).as_posix()
        except ValueError:
            key = p.name
        out[key] = sha256_file(p)
    return dict(sorted(out.items()))


def emit_report(bundle: ReportBundle, events: EventCalendar, cfg: PipelineConfig) -> Path:
    """Write statistics, the event table and the manifest; return the manifest path."""
    if bundle.stats:
        write_stats_csv(bundle.path("descriptive_stats.csv"), bundle.stats)
    start, end = (cfg.start, cfg.end)
    if bundle.market is not None and len(bundle.market):
        start, end = bundle.market.dates[0], bundle.market.dates[-1]
    events.write_csv(bundle.path("events.csv"), start, end)
    # everything in the directory except the manifest, so stage-by-stage runs are covered too
    names = sorted(p.name for p in bundle.outdir.iterdir() if p.is_file() and p.name != MANIFEST)
    manifest = {
        "config": cfg.echo(),
        "config_sha256": cfg.digest(),
        "inputs": input_digests(cfg),
        "versions": {
            "emospread": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "outputs": {n: sha256_file(bundle.outdir / n) for n in names},
        "summary": _summary_from_disk(bundle, cfg),
    }
    path = bundle.outdir / MANIFEST
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if MANIFEST not in bundle.files:
        bundle.files.append(MANIFEST)
    return path


def _summary_from_disk(bundle: ReportBundle, cfg: PipelineConfig) -> dict:
    out = dict(bundle.summary)
    for key in ("ingest", "fluctuation"):
        p = bundle.outdir / f"{key}_summary.json"
        if key not in out and p.is_file():
            out[key] = json.loads(p.read_text(encoding="utf-8"))
    return out


def verify_manifest(outdir) -> List[str]:
    """Names of declared outputs that are missing or whose digest differs."""
    outdir = Path(outdir)
    manifest = json.loads((outdir / MANIFEST).read_text(encoding="utf-8"))
    bad = []
    for name, digest in manifest["outputs"].items():
        p = outdir / name
        if not p.is_file() or sha256_file(p) != digest:
            bad.append(name)
    return bad


def open_bundle(cfg: PipelineConfig) -> ReportBundle:
    outdir = cfg.output_path()
    outdir.mkdir(parents=True, exist_ok=True)
    return ReportBundle(outdir)


def run_stage(cfg: PipelineConfig, stage: str) -> ReportBundle:
    """Validate ``cfg`` and run one stage against the output directory."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    cfg.validate()
    bundle = open_bundle(cfg)
    fn = {
        "ingest": stage_ingest,
        "emotions": stage_emotions,
        "frame": stage_frame,
        "rolling": stage_rolling,
        "forecast": stage_forecast,
        "fluctuation": stage_fluctuation,
        "report": stage_report,
    }[stage]
    fn(cfg, bundle)
    return bundle


def run_pipeline(cfg: PipelineConfig, events: Optional[EventCalendar] = None) -> ReportBundle:
    """Run every stage for each configured (emotion, q, h) and write the bundle.

    Configuration problems (a missing lexicon, for instance) are raised as
    :class:`~emospread.errors.ConfigError` before any input is read.
    """
    cfg.validate()
    bundle = open_bundle(cfg)
    selection = stage_ingest(cfg, bundle)
    stage_emotions(cfg, bundle, selection.by_day)
    stage_frame(cfg, bundle)
    stage_rolling(cfg, bundle)
    stage_forecast(cfg, bundle)
    stage_fluctuation(cfg, bundle)
    stage_report(cfg, bundle, events)
    return bundle
