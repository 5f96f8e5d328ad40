"""
Synthetic data with known conditional quantiles.

The spread follows a location-scale model

    dS[t+1] = a + d0 dS[t] + b'X[t] + g LM[t-h] + (1 + gamma E[t-h]) eps[t+1]

with ``E`` a non-negative standardized emotion indicator, so the q-th
conditional quantile is linear and the emotion coefficient at level ``q``
equals ``gamma * Q_eps(q)``.  Emotion indicators are built from simulated
daily word counts; :func:`write_synthetic_dataset` also writes a GKG-style
corpus that reproduces those counts through the ingestion filters.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml
from scipy import stats

from .emotions import EmotionSeries, smooth, standardize, FULL_SAMPLE
from .errors import InvalidSpec
from .gkg import GkgRecord, GkgSchema, format_gkg_line
from .market import MarketSeries

EMOTION_KEYS = {"Distress": "syn.distress", "Panic": "syn.panic", "LM": "syn.lm_negative"}
# logit-mean of the daily share for each lexicon
_SHARE_LEVEL = {"Distress": -4.6, "Panic": -5.3, "LM": -3.9}
WB_THEMES = ("WB_1104_MACROECONOMIC_VULNERABILITY_AND_DEBT", "WB_SYN_MACROECONOMIC_AND_STRUCTURAL_POLICIES")
SYNTHETIC_OUTLETS = ("ilsole24ore.com", "repubblica.it", "ansa.it", "milanofinanza.it", "corriere.it")


@dataclass
class DGPSpec:
    n_days: int = 1200
    start: date = date(2015, 3, 2)
    h: int = 1
    intercept: float = 0.0
    delta0: float = 0.1
    b_crd: float = -0.8
    b_liq: float = 3.0
    b_vstoxx: float = 0.4
    b_lm: float = 0.0
    gamma: float = 0.5
    error: str = "normal"
    error_df: float = 5.0
    window_w: int = 5
    driver: str = "Distress"
    country: str = "IT"

    def validate(self):
        if not math.isfinite(self.gamma) or self.gamma < 0:
            raise InvalidSpec("gamma must be finite and >= 0 so the scale 1 + gamma*E stays positive")
        if abs(self.delta0) >= 1:
            raise InvalidSpec("|delta0| must be < 1 for a stationary spread change")
        if self.error not in ("normal", "t"):
            raise InvalidSpec(f"unknown error distribution {self.error!r}")
        if self.error == "t" and self.error_df <= 2:
            raise InvalidSpec("t errors need df > 2")
        if self.driver not in EMOTION_KEYS or self.driver == "LM":
            raise InvalidSpec(f"driver must be one of Distress, Panic, got {self.driver!r}")
        if self.n_days < self.window_w + self.h + 10:
            raise InvalidSpec("n_days too small for the smoothing window and lag")

    @classmethod
    def for_frame_rows(cls, n_rows: int, **kwargs) -> "DGPSpec":
        """Spec whose regression frame has exactly ``n_rows`` rows."""
        spec = cls(**kwargs)
        spec.n_days = n_rows + spec.window_w + spec.h
        return spec


def error_quantile(spec: DGPSpec, q: float) -> float:
    if spec.error == "normal":
        return float(stats.norm.ppf(q))
    return float(stats.t.ppf(q, spec.error_df))


def true_coefficients(spec: DGPSpec, q: float) -> Dict[str, float]:
    """Conditional q-quantile coefficients implied by ``spec``."""
    qe = error_quantile(spec, q)
    return {
        "intercept": spec.intercept + qe,
        "d_spread": spec.delta0,
        "crd": spec.b_crd,
        "d_liq": spec.b_liq,
        "d_vstoxx": spec.b_vstoxx,
        "lm": spec.b_lm,
        "emotion": spec.gamma * qe,
    }


def weekdays(start: date, n: int) -> List[date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


@dataclass
class SimulatedData:
    spec: DGPSpec
    seed: int
    market: MarketSeries
    emotions: Dict[str, EmotionSeries]
    wc_total: np.ndarray
    wc_emotion: Dict[str, np.ndarray] = field(default_factory=dict)

    def true_coefficients(self, q: float) -> Dict[str, float]:
        return true_coefficients(self.spec, q)


def simulate_dgp(spec: DGPSpec, seed: int) -> SimulatedData:
    spec.validate()
    ss = np.random.SeedSequence(seed)
    news_ss, market_ss, noise_ss = ss.spawn(3)
    news_rng = np.random.default_rng(news_ss)
    mkt_rng = np.random.default_rng(market_ss)
    eps_rng = np.random.default_rng(noise_ss)

    n = spec.n_days
    dates = weekdays(spec.start, n)
    wc_total = news_rng.integers(2000, 8000, size=n)
    common = _ar1(news_rng, n, 0.8, 0.25)
    wc_emotion, emotions = {}, {}
    for name in ("Distress", "Panic", "LM"):
        own = _ar1(news_rng, n, 0.8, 0.25)
        loading = 0.0 if name == "Panic" else 1.0
        p = 1.0 / (1.0 + np.exp(-(_SHARE_LEVEL[name] + loading * common + own)))
        counts = news_rng.binomial(wc_total, p)
        wc_emotion[name] = counts
        raw = counts / wc_total
        sm = smooth(raw, spec.window_w)
        std, scale = standardize(sm, FULL_SAMPLE)
        emotions[name] = EmotionSeries(
            name, spec.country, "domestic", list(dates), raw, sm, std, spec.window_w, scale, FULL_SAMPLE,
            counts.astype(np.int64), wc_total.astype(np.int64),
        )

    crd = mkt_rng.normal(0.0, 1.2, size=n)
    d_liq = mkt_rng.normal(0.0, 0.2, size=n)
    d_vstoxx = mkt_rng.normal(0.0, 1.5, size=n)
    if spec.error == "normal":
        eps = eps_rng.standard_normal(n)
    else:
        eps = eps_rng.standard_t(spec.error_df, size=n)
    emo = np.nan_to_num(emotions[spec.driver].standardized, nan=0.0)
    lm = np.nan_to_num(emotions["LM"].standardized, nan=0.0)
    d_spread = np.zeros(n)
    for i in range(n - 1):
        j = i - spec.h
        e_lag = emo[j] if j >= 0 else 0.0
        lm_lag = lm[j] if j >= 0 else 0.0
        d_spread[i + 1] = (
            spec.intercept
            + spec.delta0 * d_spread[i]
            + spec.b_crd * crd[i]
            + spec.b_liq * d_liq[i]
            + spec.b_vstoxx * d_vstoxx[i]
            + spec.b_lm * lm_lag
            + (1.0 + spec.gamma * e_lag) * eps[i + 1]
        )
    market = MarketSeries(
        spec.country,
        list(dates),
        100.0 + np.cumsum(d_spread),
        crd,
        1.0 + np.cumsum(d_liq),
        20.0 + np.cumsum(d_vstoxx),
    )
    return SimulatedData(spec, seed, market, emotions, wc_total.astype(np.int64), wc_emotion)


def _ar1(rng, n, phi, sd):
    x = np.empty(n)
    x[0] = rng.normal(0.0, sd / math.sqrt(1 - phi**2))
    shocks = rng.normal(0.0, sd, size=n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + shocks[t]
    return x


# ---------------------------------------------------------------------------
# on-disk synthetic dataset


def synthetic_records(sim: SimulatedData, seed: int, noise_share: float = 0.15) -> List[GkgRecord]:
    """GKG records whose selected subset reproduces the simulated daily counts.

    Every simulated day is split over one to three articles that pass all
    filters; extra noise records fail exactly one filter each.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])
    country = sim.spec.country
    partner = "SP" if country != "SP" else "IT"
    out: List[GkgRecord] = []
    serial = 0

    def new_id():
        nonlocal serial
        serial += 1
        return f"SYN-{serial:07d}"

    for i, d in enumerate(sim.market.dates):
        k = int(rng.integers(1, 4))
        total = int(sim.wc_total[i])
        words = 100 * np.ones(k, dtype=np.int64) + rng.multinomial(total - 100 * k, np.ones(k) / k)
        split = {name: rng.multinomial(int(c[i]), words / words.sum()) for name, c in sim.wc_emotion.items()}
        for a in range(k):
            gcam = {EMOTION_KEYS[name]: int(split[name][a]) for name in split}
            gcam["c1.1"] = int(rng.integers(0, 50))
            out.append(
                GkgRecord(
                    record_id=new_id(),
                    published_at_utc=_timestamp_for(rng, d),
                    outlet=str(rng.choice(SYNTHETIC_OUTLETS)),
                    themes=_themes(rng, int(rng.integers(4, 8))),
                    locations=tuple(sorted({country: int(rng.integers(2, 6)), partner: 1}.items())),
                    gcam=gcam,
                    word_count=int(words[a]),
                )
            )
        if rng.random() < noise_share:
            out.append(_noise_record(rng, d, new_id(), country, partner))
    return out


def _timestamp_for(rng, d: date) -> datetime:
    """UTC time that a +1h calendar maps to trading day ``d``."""
    roll = rng.random()
    if d.weekday() == 0 and roll < 0.2:
        local = datetime.combine(d - timedelta(days=2), datetime.min.time()) + timedelta(hours=12)
    elif d.weekday() > 0 and roll < 0.3:
        local = datetime.combine(d - timedelta(days=1), datetime.min.time()) + timedelta(hours=19)
    else:
        local = datetime.combine(d, datetime.min.time()) + timedelta(hours=10, minutes=int(rng.integers(0, 420)))
    return (local - timedelta(hours=1)).replace(tzinfo=timezone.utc)


def _themes(rng, n_wb: int):
    wb = [str(rng.choice(WB_THEMES)) for _ in range(n_wb)]
    return tuple(wb + ["TAX_FNCACT", "EPU_ECONOMY"])


def _noise_record(rng, d, rid, country, partner) -> GkgRecord:
    kind = int(rng.integers(0, 4))
    words = int(rng.integers(300, 3000))
    outlet = str(rng.choice(SYNTHETIC_OUTLETS))
    themes = _themes(rng, 5)
    locations = tuple(sorted({country: 3, partner: 1}.items()))
    if kind == 0:
        words = int(rng.integers(10, 100))
    elif kind == 1:
        outlet = "not-an-allowed-outlet.example"
    elif kind == 2:
        themes = _themes(rng, 2)
    else:
        locations = tuple(sorted({"FR": 4, country: 1}.items()))
    gcam = {k: int(rng.integers(0, 40)) for k in EMOTION_KEYS.values()}
    return GkgRecord(rid, _timestamp_for(rng, d), outlet, themes, locations, gcam, words)


def write_synthetic_dataset(spec: DGPSpec, seed: int, outdir) -> Path:
    """Write market CSV, GKG corpus, lexicon and a ready-to-run config.

    Returns the config path.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    sim = simulate_dgp(spec, seed)
    sim.market.write_csv(outdir / "market.csv")
    schema = GkgSchema()
    records = synthetic_records(sim, seed)
    with open(outdir / "synthetic.gkg.tsv", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(format_gkg_line(rec, schema) + "\n")
        fh.write("corrupted\tline\n")
    lexicon = {"emotions": {name: {"gcam_keys": [key]} for name, key in EMOTION_KEYS.items()}}
    with open(outdir / "lexicon.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(lexicon, fh, sort_keys=True)
    truth = {
        "spec": {k: (v.isoformat() if isinstance(v, date) else v) for k, v in asdict(spec).items()},
        "seed": seed,
        "emotion_coefficient_q95": true_coefficients(spec, 0.95)["emotion"],
    }
    with open(outdir / "truth.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(truth, fh, sort_keys=True)
    config = {
        "sample": {"start": sim.market.dates[0].isoformat(), "end": sim.market.dates[-1].isoformat()},
        "country": spec.country,
        "seed": seed,
        "data": {
            "gkg_files": ["synthetic.gkg.tsv"],
            "market_csv": "market.csv",
            "lexicon": "lexicon.yaml",
        },
        "filters": {
            "outlets": list(SYNTHETIC_OUTLETS),
            "theme_prefixes": ["WB_1104_", "WB_SYN_MACROECONOMIC"],
            "min_words": 100,
            "min_theme_keywords": 4,
            "focus": {"mode": "domestic", "countries": [spec.country]},
        },
        "calendar": {"market_open": "09:00", "market_close": "17:30", "timezone_offset_hours": 1},
        "emotions": {"names": ["Distress", "Panic"], "lm": "LM", "window": spec.window_w},
        "model": {"q": 0.95, "h": [spec.h], "ci_level": 0.90},
        "test": {"mu": 0.30, "alpha": 0.05},
        "output": {"dir": "report"},
    }
    path = outdir / "config.yaml"
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=False)
    return path
