"""Daily market covariates: loading, differencing and summary statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import BadRow, DuplicateDate, EmptyFile, EmptyYear

FIELDS = ("spread", "crd", "liq", "vstoxx")
DEFAULT_COLUMNS = {"date": "date", "spread": "spread", "crd": "crd", "liq": "liq", "vstoxx": "vstoxx"}


@dataclass
class MarketSeries:
    """Daily closes for one country.

    ``spread`` (basis points), ``liq`` (bid-ask) and ``vstoxx`` are levels;
    ``crd`` is the domestic equity return in percent.  Differencing happens
    when regression frames are built.
    """

    country: str
    dates: List[date]
    spread: np.ndarray
    crd: np.ndarray
    liq: np.ndarray
    vstoxx: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        for name in FIELDS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has {arr.shape[0]} values for {n} dates")
            setattr(self, name, arr)
        if len(set(self.dates)) != n:
            raise DuplicateDate("duplicate dates in market series")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("market dates must be strictly increasing")

    def __len__(self):
        return len(self.dates)

    def between(self, start: Optional[date], end: Optional[date]) -> "MarketSeries":
        keep = [i for i, d in enumerate(self.dates) if (start is None or d >= start) and (end is None or d <= end)]
        return MarketSeries(
            self.country,
            [self.dates[i] for i in keep],
            *(getattr(self, f)[keep] for f in FIELDS),
        )

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("date,spread,crd,liq,vstoxx\n")
            for i, d in enumerate(self.dates):
                vals = ",".join(repr(float(getattr(self, f)[i])) for f in FIELDS)
                fh.write(f"{d.isoformat()},{vals}\n")


def load_market_csv(path, columns: Optional[Mapping[str, str]] = None, country: str = "") -> MarketSeries:
    """Read a market CSV whose header names are mapped through ``columns``.

    Rows are sorted by date; empty cells load as NaN.
    """
    cols = dict(DEFAULT_COLUMNS)
    cols.update(columns or {})
    path = Path(path)
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFile(f"{path} is empty")
        missing = [v for v in cols.values() if v not in reader.fieldnames]
        if missing:
            raise BadRow(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                d = date.fromisoformat(row[cols["date"]].strip())
                vals = [float(row[cols[f]]) if row[cols[f]].strip() else math.nan for f in FIELDS]
            except (ValueError, AttributeError) as exc:
                raise BadRow(f"{path}:{lineno}: {exc}") from exc
            rows.append((d, vals))
    if not rows:
        raise EmptyFile(f"{path} has no data rows")
    rows.sort(key=lambda r: r[0])
    dates = [r[0] for r in rows]
    for a, b in zip(dates, dates[1:]):
        if a == b:
            raise DuplicateDate(f"{path}: duplicate date {a}")
    data = np.array([r[1] for r in rows], dtype=float)
    return MarketSeries(country, dates, *(data[:, i] for i in range(len(FIELDS))))


def lower_quantile(values, q: float) -> float:
    """Empirical quantile taking the lower optimal vertex of the check loss."""
    x = np.sort(np.asarray(values, dtype=float))
    k = max(int(math.ceil(x.shape[0] * q - 1e-9)) - 1, 0)
    return float(x[k])


def differenced(market: MarketSeries) -> Dict[str, np.ndarray]:
    """First differences across consecutive trading days, aligned to the later date."""
    return {
        "d_spread": np.diff(market.spread),
        "d_liq": np.diff(market.liq),
        "d_vstoxx": np.diff(market.vstoxx),
    }


STAT_ROWS = (
    ("Spread", "spread", False),
    ("DeltaSpread", "spread", True),
    ("CRD", "crd", False),
    ("DeltaLIQ", "liq", True),
    ("DeltaVSTOXX", "vstoxx", True),
)


def descriptive_stats(series: MarketSeries, by_year: bool = True, years: Optional[Sequence[int]] = None) -> List[dict]:
    """Mean, sample s.d., 5th and 95th percentiles per variable (and year)."""
    dates = series.dates
    if not dates:
        raise EmptyYear("market series is empty")
    groups = sorted({d.year for d in dates}) if years is None else list(years)
    out = []
    for label, attr, diff in STAT_ROWS:
        values = getattr(series, attr)
        vdates = dates
        if diff:
            values = np.diff(values)
            vdates = dates[1:]
        keyed = [("all", np.ones(len(vdates), dtype=bool))]
        if by_year:
            yrs = np.array([d.year for d in vdates])
            keyed = [(y, yrs == y) for y in groups]
        for key, mask in keyed:
            v = values[mask]
            v = v[~np.isnan(v)]
            if v.shape[0] == 0:
                raise EmptyYear(f"no {label} observations for {key}")
            out.append(
                {
                    "group": key,
                    "variable": label,
                    "n": int(v.shape[0]),
                    "mean": float(np.mean(v)),
                    "sd": float(np.std(v, ddof=1)) if v.shape[0] > 1 else 0.0,
                    "p05": lower_quantile(v, 0.05),
                    "p95": lower_quantile(v, 0.95),
                }
            )
    return out


def write_stats_csv(path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("group,variable,n,mean,sd,p05,p95\n")
        for r in rows:
            fh.write(
                f"{r['group']},{r['variable']},{r['n']},{r['mean']!r},{r['sd']!r},{r['p05']!r},{r['p95']!r}\n"
            )
