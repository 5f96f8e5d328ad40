"""
Fluctuation test of relative forecast accuracy.

The Diebold-Mariano statistic is computed over a rolling window of ``m``
out-of-sample loss differentials, scaled by a Newey-West long-run variance
of the whole differential series, and compared with a two-sided band whose
critical value controls the family-wise crossing rate over all windows.
Negative statistics favour the augmented (emotion) model.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import TooShort, UnsupportedMu, ZeroVariance

AUGMENTED_BETTER = "AugmentedBetter"
BENCHMARK_BETTER = "BenchmarkBetter"
INCONCLUSIVE = "Inconclusive"

ASYMPTOTIC_N = 10_000
MU_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
ALPHA_GRID = (0.01, 0.05, 0.10)
TABLE_N = (100, 250, 500, 1000, ASYMPTOTIC_N)


class NonPositiveLRV(UserWarning):
    """The Bartlett long-run variance came out non-positive and was truncated."""


def auto_bandwidth(n: int) -> int:
    return int(math.floor(1.3 * float(np.cbrt(n))))


def hac_lrv(series, bandwidth: int) -> float:
    """Newey-West long-run variance with Bartlett weights ``1 - j/(L+1)``.

    Autocovariances are taken about the sample mean with denominator ``n``.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise TooShort("need at least two observations")
    if bandwidth < 0:
        raise ValueError("bandwidth must be non-negative")
    e = x - x.mean()
    lrv = float(e @ e) / n
    for j in range(1, min(bandwidth, n - 1) + 1):
        lrv += 2.0 * (1.0 - j / (bandwidth + 1.0)) * float(e[j:] @ e[:-j]) / n
    if lrv < 0:
        warnings.warn(f"long-run variance {lrv:.3g} truncated to zero", NonPositiveLRV)
        return 0.0
    return lrv


def _batch_lrv(X: np.ndarray, bandwidth: int) -> np.ndarray:
    n = X.shape[1]
    E = X - X.mean(axis=1, keepdims=True)
    lrv = np.einsum("ij,ij->i", E, E) / n
    for j in range(1, min(bandwidth, n - 1) + 1):
        lrv += 2.0 * (1.0 - j / (bandwidth + 1.0)) * np.einsum("ij,ij->i", E[:, j:], E[:, :-j]) / n
    return np.maximum(lrv, 0.0)


def dm_statistic(d, lrv: float) -> float:
    """Diebold-Mariano statistic ``mean(d) / sqrt(lrv / n)``."""
    d = np.asarray(d, dtype=float)
    if not lrv > 0:
        raise ZeroVariance("long-run variance is zero")
    return float(d.mean() / math.sqrt(lrv / d.shape[0]))


@dataclass
class LossDifferentialSeries:
    dates: List[date]
    d: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if len(self.dates) != self.d.shape[0]:
            raise ValueError("dates and differentials differ in length")
        if not np.all(np.isfinite(self.d)):
            raise ValueError("loss differentials must be finite")

    @property
    def n_oos(self) -> int:
        return self.d.shape[0]

    @classmethod
    def from_forecasts(cls, records) -> "LossDifferentialSeries":
        return cls([r.target_date for r in records], np.array([r.loss_differential for r in records]))


@dataclass
class FluctuationConfig:
    mu: float = 0.30
    alpha: float = 0.05
    hac_bandwidth: Union[int, str] = "auto"
    critical_value: Optional[float] = None
    per_window_sigma: bool = False

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must lie in (0, 1)")

    def window(self, n_oos: int) -> int:
        m = int(math.floor(self.mu * n_oos + 0.5))
        if m < 5:
            raise TooShort(f"rolling window m={m} is below 5 (n_oos={n_oos}, mu={self.mu})")
        return m

    def bandwidth(self, n: int) -> int:
        return auto_bandwidth(n) if self.hac_bandwidth == "auto" else int(self.hac_bandwidth)


@dataclass
class FluctuationPath:
    dates: List[date]
    F: np.ndarray
    critical_value: float
    m: int
    sigma: float
    verdicts: List[str] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("date,F,cv_lower,cv_upper,verdict\n")
            for d, f, v in zip(self.dates, self.F, self.verdicts):
                fs = "" if math.isnan(f) else repr(float(f))
                fh.write(f"{d.isoformat()},{fs},{-self.critical_value!r},{self.critical_value!r},{v}\n")

    def any_verdict(self, verdict: str) -> bool:
        return verdict in self.verdicts


def classify(F: float, cv: float) -> str:
    if F < -cv:
        return AUGMENTED_BETTER
    if F > cv:
        return BENCHMARK_BETTER
    return INCONCLUSIVE


def fluctuation_statistics(
    d: LossDifferentialSeries,
    cfg: FluctuationConfig = FluctuationConfig(),
    zero_variance: str = "raise",
) -> FluctuationPath:
    """Rolling DM statistics ``F_j = sum(d[j-m+1..j]) / (sigma * sqrt(m))``.

    ``sigma`` is the HAC long-run standard deviation of the full series (or
    of each window with ``per_window_sigma``).  With ``zero_variance`` set to
    ``"inconclusive"`` identical forecasts give an all-Inconclusive path
    instead of raising :class:`ZeroVariance`.
    """
    n = d.n_oos
    m = cfg.window(n)
    if n < m:
        raise TooShort(f"n_oos={n} is shorter than the window m={m}")
    cv = cfg.critical_value if cfg.critical_value is not None else critical_value(cfg.mu, cfg.alpha, n)
    csum = np.concatenate([[0.0], np.cumsum(d.d)])
    sums = csum[m:] - csum[:-m]
    dates = d.dates[m - 1:]
    if cfg.per_window_sigma:
        bw = cfg.bandwidth(m)
        sig = np.array([math.sqrt(hac_lrv(d.d[j - m:j], bw)) for j in range(m, n + 1)])
        sigma = float("nan")
    else:
        sigma = math.sqrt(hac_lrv(d.d, cfg.bandwidth(n)))
        sig = np.full(sums.shape, sigma)
    if np.any(sig == 0):
        if zero_variance != "inconclusive":
            raise ZeroVariance("loss differentials have zero long-run variance")
        F = np.full(sums.shape, np.nan)
        return FluctuationPath(dates, F, cv, m, sigma, [INCONCLUSIVE] * len(dates))
    F = sums / (sig * math.sqrt(m))
    return FluctuationPath(dates, F, cv, m, sigma, [classify(f, cv) for f in F])


# ---------------------------------------------------------------------------
# critical values


def sup_statistics(
    n: int,
    mus: Sequence[float],
    n_paths: int,
    seed: int,
    sigma: str = "hac",
    batch: Optional[int] = None,
) -> np.ndarray:
    """Simulated ``max_j |F_j|`` under iid standard normal differentials.

    ``sigma="hac"`` scales exactly like :func:`fluctuation_statistics` with
    the automatic bandwidth; ``sigma="known"`` uses the true unit variance,
    which is the limit used for the asymptotic row.  Returns an array of
    shape ``(len(mus), n_paths)``.  Batch ``b`` draws from child ``b`` of
    ``SeedSequence(seed)``; the default batch size depends only on ``n``.
    """
    if batch is None:
        batch = max(1, 2_000_000 // n)
    ms = [int(math.floor(mu * n + 0.5)) for mu in mus]
    out = np.empty((len(mus), n_paths))
    children = np.random.SeedSequence(seed).spawn((n_paths + batch - 1) // batch)
    bw = auto_bandwidth(n)
    for b, child in enumerate(children):
        rng = np.random.Generator(np.random.Philox(child))
        k = min(batch, n_paths - b * batch)
        X = rng.standard_normal((k, n))
        if sigma == "hac":
            sig = np.sqrt(_batch_lrv(X, bw))
        elif sigma == "known":
            sig = np.ones(k)
        else:
            raise ValueError(f"unknown sigma mode {sigma!r}")
        C = np.zeros((k, n + 1))
        np.cumsum(X, axis=1, out=C[:, 1:])
        for i, m in enumerate(ms):
            sup = np.abs(C[:, m:] - C[:, :-m]).max(axis=1)
            out[i, b * batch:b * batch + k] = sup / (sig * math.sqrt(m))
    return out


def simulate_critical_values(
    n: int,
    mus: Sequence[float] = MU_GRID,
    alphas: Sequence[float] = ALPHA_GRID,
    n_paths: int = 100_000,
    seed: int = 20100501,
    sigma: Optional[str] = None,
) -> List[dict]:
    """(1 - alpha) quantiles of the simulated sup statistic."""
    if sigma is None:
        sigma = "known" if n >= ASYMPTOTIC_N else "hac"
    sims = sup_statistics(n, mus, n_paths, seed, sigma=sigma)
    rows = []
    for i, mu in enumerate(mus):
        for alpha in alphas:
            rows.append({"mu": mu, "alpha": alpha, "n": n, "cv": float(np.quantile(sims[i], 1 - alpha))})
    return rows


def write_cv_table(path, rows: Sequence[dict], header_lines: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("mu,alpha,n,cv\n")
        for r in rows:
            fh.write(f"{r['mu']},{r['alpha']},{r['n']},{r['cv']:.4f}\n")


def load_cv_table(path=None) -> List[dict]:
    if path is None:
        text = resources.files("emospread.data").joinpath("fluctuation_cv.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return [
        {"mu": float(r["mu"]), "alpha": float(r["alpha"]), "n": int(r["n"]), "cv": float(r["cv"])}
        for r in csv.DictReader(lines)
    ]


_TABLE_CACHE: Dict[str, List[dict]] = {}


def _bundled_table() -> List[dict]:
    if "bundled" not in _TABLE_CACHE:
        _TABLE_CACHE["bundled"] = load_cv_table()
    return _TABLE_CACHE["bundled"]


def critical_value(
    mu: float,
    alpha: float = 0.05,
    n_oos: Optional[int] = None,
    table: Optional[List[dict]] = None,
    interpolate: bool = True,
) -> float:
    """Two-sided critical value for ``sup_j |F_j|`` from the bundled table.

    ``n_oos=None`` selects the asymptotic row; otherwise the nearest tabulated
    length on a log scale.  Off-grid ``mu`` inside the grid range is linearly
    interpolated when ``interpolate`` is set.
    """
    rows = _bundled_table() if table is None else table
    rows = [r for r in rows if math.isclose(r["alpha"], alpha)]
    if not rows:
        raise ValueError(f"no critical values tabulated for alpha={alpha}")
    ns = sorted({r["n"] for r in rows})
    if n_oos is None:
        n_sel = max(ns)
    else:
        n_sel = min(ns, key=lambda k: (abs(math.log(k) - math.log(max(n_oos, 1))), k))
    rows = sorted((r for r in rows if r["n"] == n_sel), key=lambda r: r["mu"])
    grid = [r["mu"] for r in rows]
    for r in rows:
        if math.isclose(r["mu"], mu, abs_tol=1e-9):
            return r["cv"]
    if not interpolate or mu < grid[0] or mu > grid[-1]:
        raise UnsupportedMu(f"mu={mu} is not tabulated (grid {grid[0]}..{grid[-1]})")
    return float(np.interp(mu, grid, [r["cv"] for r in rows]))
