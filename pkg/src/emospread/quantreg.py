"""
Linear quantile regression by check-loss minimisation.

The estimator solves the linear program behind ``min_b sum rho_q(y - X b)``.
A Mehrotra predictor-corrector interior-point method locates the optimum
approximately; the result is then polished into an exact vertex (a basis of
``p`` observations fitted with zero residual) by simplex pivots along the
edges of the check-loss polytope.  Callers that fit many closely related
problems (rolling windows, confidence-interval bisection) can pass the basis
of a previous fit and skip the interior-point stage.

Inference follows the rank-score approach: a confidence interval for one
coefficient collects the values that the regression rank-score test does not
reject.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .errors import (
    MissingRegressor,
    NonConvergence,
    RankDeficient,
    UnboundedInterval,
    ZeroRestrictedLoss,
)

INTERCEPT = "intercept"

MAX_IP_ITER = 200
_STEP_DAMPING = 0.99995


def check_loss(z, q):
    """Check (pinball) loss ``(q - 1{z < 0}) * z``; vectorised over ``z``."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    z_arr = np.asarray(z, dtype=float)
    out = z_arr * (q - (z_arr < 0))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class RegressionFrame:
    """Aligned response and named regressors for one quantile regression.

    Parameters
    ----------
    target : np.ndarray
        Response vector (one-step-ahead spread change).
    columns : dict[str, np.ndarray]
        Named regressor vectors in design order.  The intercept, when
        present, must be a column of ones named ``"intercept"``.
    q : float
        Quantile level in (0, 1).
    h : int
        News lag the frame was built with.
    row_dates : list
        Trading date attached to each target value.
    """

    target: np.ndarray
    columns: Dict[str, np.ndarray]
    q: float = 0.95
    h: int = 0
    row_dates: list = field(default_factory=list)

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        n = self.target.shape[0]
        cols = {}
        for name, values in self.columns.items():
            arr = np.asarray(values, dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"column {name!r} has shape {arr.shape}, expected ({n},)")
            cols[name] = arr
        self.columns = cols
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {self.q}")
        if not np.all(np.isfinite(self.target)):
            raise ValueError("target contains missing or non-finite values")
        for name, arr in cols.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"column {name!r} contains missing or non-finite values")
        if INTERCEPT in cols and not np.all(cols[INTERCEPT] == 1.0):
            raise ValueError("intercept column must be all ones")
        if self.row_dates and len(self.row_dates) != n:
            raise ValueError("row_dates length does not match target")

    @property
    def names(self) -> list:
        return list(self.columns)

    def __len__(self):
        return self.target.shape[0]

    def design(self, names: Optional[Sequence[str]] = None) -> np.ndarray:
        names = self.names if names is None else list(names)
        if not names:
            return np.empty((len(self), 0))
        return np.column_stack([self.columns[k] for k in names])

    def subset(self, rows) -> "RegressionFrame":
        """Frame restricted to ``rows`` (slice or index array)."""
        idx = np.arange(len(self))[rows]
        dates = [self.row_dates[i] for i in idx] if self.row_dates else []
        return RegressionFrame(
            target=self.target[idx],
            columns={k: v[idx] for k, v in self.columns.items()},
            q=self.q,
            h=self.h,
            row_dates=dates,
        )

    def drop(self, *names: str) -> "RegressionFrame":
        return RegressionFrame(
            target=self.target,
            columns={k: v for k, v in self.columns.items() if k not in names},
            q=self.q,
            h=self.h,
            row_dates=list(self.row_dates),
        )

    def with_quantile(self, q: float) -> "RegressionFrame":
        return RegressionFrame(self.target, dict(self.columns), q, self.h, list(self.row_dates))


@dataclass
class QuantileFit:
    coefficients: Dict[str, float]
    residuals: np.ndarray
    objective: float
    q: float
    basis: Tuple[int, ...]
    pseudo_r1: Optional[float] = None
    ci: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    ci_level: Optional[float] = None

    def to_dict(self, include_residuals: bool = False) -> dict:
        out = {
            "q": self.q,
            "coefficients": dict(self.coefficients),
            "objective": self.objective,
            "pseudo_r1": self.pseudo_r1,
            "ci_level": self.ci_level,
            "ci": {k: [lo, hi] for k, (lo, hi) in self.ci.items()},
            "basis": list(self.basis),
        }
        if include_residuals:
            out["residuals"] = self.residuals.tolist()
        return out

    def to_json(self, include_residuals: bool = False) -> str:
        return json.dumps(self.to_dict(include_residuals), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "QuantileFit":
        return cls(
            coefficients=dict(data["coefficients"]),
            residuals=np.asarray(data.get("residuals", []), dtype=float),
            objective=float(data["objective"]),
            q=float(data["q"]),
            basis=tuple(data.get("basis", ())),
            pseudo_r1=data.get("pseudo_r1"),
            ci={k: (float(v[0]), float(v[1])) for k, v in data.get("ci", {}).items()},
            ci_level=data.get("ci_level"),
        )


# ---------------------------------------------------------------------------
# solver internals


def _interior_point(X, y, q, max_iter=MAX_IP_ITER, tol=1e-10):
    """Primal-dual interior point on the bounded dual LP.

    Solves ``max y'a  s.t.  X'a = (1-q) X'1, 0 <= a <= 1``.  Returns the
    coefficient vector (the LP multipliers) and the dual weights ``a``.
    """
    n, p = X.shape
    b = (1.0 - q) * X.sum(axis=0)
    x = np.full(n, 1.0 - q)
    s = np.full(n, q)
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    r = y - X @ beta
    shift = max(float(np.mean(np.abs(r))), 1e-8)
    z = np.maximum(-r, 0.0) + shift
    w = np.maximum(r, 0.0) + shift
    yd = -beta
    scale = 1.0 + float(np.abs(y).sum())

    def newton(rb, rc, rxz, rsw):
        d = 1.0 / (z / x + w / s)
        rt = rc - rxz / x + rsw / s
        M = X.T @ (d[:, None] * X)
        dy = np.linalg.solve(M, rb + X.T @ (d * rt))
        dx = d * (X @ dy - rt)
        dz = (rxz - z * dx) / x
        dw = (rsw + w * dx) / s
        return dx, dy, dz, dw

    def steps(dx, dz, dw):
        ap = 1.0
        neg = dx < 0
        if neg.any():
            ap = min(ap, float(np.min(-x[neg] / dx[neg])))
        pos = dx > 0
        if pos.any():
            ap = min(ap, float(np.min(s[pos] / dx[pos])))
        ad = 1.0
        neg = dz < 0
        if neg.any():
            ad = min(ad, float(np.min(-z[neg] / dz[neg])))
        neg = dw < 0
        if neg.any():
            ad = min(ad, float(np.min(-w[neg] / dw[neg])))
        return ap, ad

    for _ in range(max_iter):
        gap = float(x @ z + s @ w)
        if gap < tol * scale:
            return -yd, x
        rb = b - X.T @ x
        rc = -y - X @ yd - z + w
        mu = gap / (2 * n)
        dx, dy, dz, dw = newton(rb, rc, -x * z, -s * w)
        ap, ad = steps(dx, dz, dw)
        mu_aff = ((x + ap * dx) @ (z + ad * dz) + (s - ap * dx) @ (w + ad * dw)) / (2 * n)
        sigma = (mu_aff / mu) ** 3
        rxz = sigma * mu - x * z - dx * dz
        rsw = sigma * mu - s * w + dx * dw
        dx, dy, dz, dw = newton(rb, rc, rxz, rsw)
        ap, ad = steps(dx, dz, dw)
        ap *= _STEP_DAMPING
        ad *= _STEP_DAMPING
        x = x + ap * dx
        s = s - ap * dx
        yd = yd + ad * dy
        z = z + ad * dz
        w = w + ad * dw
    raise NonConvergence(f"interior point did not converge in {max_iter} iterations")


def _pick_basis(X, order, p, seed=()):
    """Greedily choose ``p`` rows in ``order`` that span the column space."""
    chosen = []
    Q = np.empty((X.shape[1], 0))
    for i in list(seed) + list(order):
        if i in chosen:
            continue
        v = X[i] - Q @ (Q.T @ X[i])
        nv = np.linalg.norm(v)
        if nv > 1e-9 * max(1.0, np.linalg.norm(X[i])):
            chosen.append(int(i))
            Q = np.column_stack([Q, v / nv])
            if len(chosen) == p:
                return chosen
    raise RankDeficient("design matrix does not have full column rank")


def _edge_step(r, C_k, nonbasic, slope0, sgn):
    """Line search along one edge; returns the entering observation index.

    Along the edge the residuals move as ``r - t * sgn * C_k``.  The check
    loss is convex piecewise linear in ``t``; its slope starts at ``slope0``
    and rises by ``|C_k[i]|`` whenever observation ``i`` crosses zero.
    """
    c = sgn * C_k
    cand = nonbasic & (np.abs(c) > 1e-12) & (r != 0.0)
    idx = np.flatnonzero(cand)
    t = r[idx] / c[idx]
    keep = t > 0
    idx, t = idx[keep], t[keep]
    if idx.size == 0:
        return None
    order = np.argsort(t, kind="stable")
    slopes = slope0 + np.cumsum(np.abs(c[idx[order]]))
    j = int(np.searchsorted(slopes >= 0, True))
    if j >= idx.size:
        return None
    return int(idx[order[j]])


def _simplex(X, y, q, basis, max_pivots=None):
    """Pivot from ``basis`` to an optimal vertex of the check-loss problem."""
    n, p = X.shape
    if max_pivots is None:
        max_pivots = 50 * (n + p)
    ytol = 1e-12 * max(1.0, float(np.abs(y).max()))
    tol = 1e-11 * n
    h = sorted(int(i) for i in basis)

    def evaluate(h):
        Xh = X[h]
        Xh_inv = np.linalg.inv(Xh)
        beta = Xh_inv @ y[h]
        r = y - X @ beta
        r[h] = 0.0
        r[np.abs(r) <= ytol] = 0.0
        C = X @ Xh_inv
        nonbasic = np.ones(n, dtype=bool)
        nonbasic[h] = False
        zero = nonbasic & (r == 0.0)
        active = nonbasic & ~zero
        psi = np.where(r[active] < 0, q - 1.0, q)
        g = psi @ C[active]
        d_plus = (1.0 - q) - g
        d_minus = q + g
        if zero.any():
            Cz = C[zero]
            d_plus = d_plus + (-Cz * (q - (-Cz < 0))).sum(axis=0)
            d_minus = d_minus + (Cz * (q - (Cz < 0))).sum(axis=0)
        return beta, r, C, nonbasic, d_plus, d_minus

    for _ in range(max_pivots):
        beta, r, C, nonbasic, d_plus, d_minus = evaluate(h)
        k_plus = int(np.argmin(d_plus))
        k_minus = int(np.argmin(d_minus))
        if min(d_plus[k_plus], d_minus[k_minus]) >= -tol:
            break
        if d_plus[k_plus] <= d_minus[k_minus]:
            k, sgn, slope0 = k_plus, 1.0, d_plus[k_plus]
        else:
            k, sgn, slope0 = k_minus, -1.0, d_minus[k_minus]
        entering = _edge_step(r, C[:, k], nonbasic, slope0, sgn)
        if entering is None:
            raise NonConvergence("unbounded edge in simplex step")
        h[k] = entering
        h = sorted(h)
    else:
        raise NonConvergence(f"simplex did not terminate in {max_pivots} pivots")

    # deterministic choice among optimal vertices: walk to adjacent optimal
    # vertices while the sorted basis index set decreases lexicographically
    for _ in range(max_pivots):
        moved = False
        for k in range(p):
            for sgn, dk in ((1.0, d_plus[k]), (-1.0, d_minus[k])):
                if abs(dk) > tol:
                    continue
                entering = _edge_step(r, C[:, k], nonbasic, dk, sgn)
                if entering is None:
                    continue
                cand = sorted(h[:k] + [entering] + h[k + 1:])
                if cand < h:
                    h = cand
                    moved = True
                    break
            if moved:
                break
        if not moved:
            break
        beta, r, C, nonbasic, d_plus, d_minus = evaluate(h)
        if min(d_plus.min(), d_minus.min()) < -tol:
            # numerical drift moved us off the optimal face; re-optimise
            return _simplex(X, y, q, h, max_pivots)
    return beta, tuple(h), r, C, nonbasic


def solve_qr(X, y, q, basis=None, max_iter=MAX_IP_ITER):
    """Exact vertex solution of ``min_b sum rho_q(y - X b)``.

    Returns ``(beta, basis, residuals)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n <= p:
        raise RankDeficient(f"need more rows than parameters (n={n}, p={p})")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficient("design matrix does not have full column rank")
    if basis is not None:
        seed = sorted({int(i) for i in basis if 0 <= int(i) < n})[:p]
        try:
            if len(seed) < p:
                # complete with the most recent rows (rolling windows append at the end)
                seed = _pick_basis(X, range(n - 1, -1, -1), p, seed=seed)
            if np.linalg.cond(X[seed]) < 1e12:
                beta, h, r, _, _ = _simplex(X, y, q, seed)
                return beta, h, r
        except (np.linalg.LinAlgError, RankDeficient):
            pass
    beta0, _ = _interior_point(X, y, q, max_iter=max_iter)
    order = np.argsort(np.abs(y - X @ beta0), kind="stable")
    start = _pick_basis(X, order, p)
    beta, h, r, _, _ = _simplex(X, y, q, start)
    return beta, h, r


def restricted_loss(target, q) -> float:
    """Minimised check loss of the intercept-only model."""
    y = np.sort(np.asarray(target, dtype=float))
    k = max(int(math.ceil(len(y) * q - 1e-9)) - 1, 0)
    return float(np.sum(check_loss(y - y[k], q)))


def fit_quantile(
    frame: RegressionFrame,
    basis: Optional[Sequence[int]] = None,
    max_iter: int = MAX_IP_ITER,
) -> QuantileFit:
    """Fit the linear conditional ``frame.q`` quantile of ``frame.target``.

    The returned fit interpolates exactly ``p`` observations (its basis).
    Ties among optimal vertices resolve toward the lexicographically smallest
    basis reachable through adjacent optimal vertices.
    """
    X = frame.design()
    beta, h, r = solve_qr(X, frame.target, frame.q, basis=basis, max_iter=max_iter)
    fit = QuantileFit(
        coefficients={k: float(v) for k, v in zip(frame.names, beta)},
        residuals=r,
        objective=float(np.sum(check_loss(r, frame.q))),
        q=frame.q,
        basis=h,
    )
    if INTERCEPT in frame.columns:
        v0 = restricted_loss(frame.target, frame.q)
        fit.pseudo_r1 = 1.0 - fit.objective / v0 if v0 > 0 else None
    return fit


def pseudo_r1(fit_full: QuantileFit, frame: RegressionFrame) -> float:
    """Goodness of fit ``1 - V_full / V_intercept_only`` at the frame's quantile."""
    v0 = restricted_loss(frame.target, frame.q)
    if v0 <= 0:
        raise ZeroRestrictedLoss("intercept-only check loss is zero (constant target)")
    return 1.0 - fit_full.objective / v0


def predict(fit: QuantileFit, new_row: Mapping[str, float]) -> float:
    total = 0.0
    for name, coef in fit.coefficients.items():
        if name == INTERCEPT and name not in new_row:
            total += coef
            continue
        if name not in new_row:
            raise MissingRegressor(name)
        total += coef * float(new_row[name])
    return total


# ---------------------------------------------------------------------------
# rank-score inference


def rank_scores(X, y, q, basis=None):
    """Regression rank scores ``q - 1{r < 0}`` completed on the basis.

    For basic observations the scores solve the first-order condition
    ``sum_i score_i x_i = 0``.  Returns ``(scores, basis)``.
    """
    n, p = X.shape
    if p == 0:
        return np.where(y < 0, q - 1.0, q), ()
    beta, h, r = solve_qr(X, y, q, basis=basis)
    scores = np.where(r < 0, q - 1.0, q)
    hl = list(h)
    nonbasic = np.ones(n, dtype=bool)
    nonbasic[hl] = False
    rhs = -(scores[nonbasic] @ X[nonbasic])
    scores[hl] = np.linalg.solve(X[hl].T, rhs)
    return scores, h


def _hall_sheather(n, q, alpha=0.05):
    x0 = norm.ppf(q)
    f0 = norm.pdf(x0)
    return n ** (-1 / 3) * norm.ppf(1 - alpha / 2) ** (2 / 3) * (
        (1.5 * f0**2) / (2 * x0**2 + 1)
    ) ** (1 / 3)


def coefficient_scale(frame: RegressionFrame, fit: QuantileFit) -> Dict[str, float]:
    """Asymptotic iid standard errors (sparsity via Hall-Sheather bandwidth)."""
    X = frame.design()
    n = len(frame)
    q = frame.q
    bw = _hall_sheather(n, q)
    lo, hi = max(q - bw, 1.0 / n), min(q + bw, 1.0 - 1.0 / n)
    res = np.sort(fit.residuals)
    qlo = res[min(max(int(math.ceil(n * lo)) - 1, 0), n - 1)]
    qhi = res[min(max(int(math.ceil(n * hi)) - 1, 0), n - 1)]
    sparsity = (qhi - qlo) / (hi - lo) if hi > lo else 0.0
    xtx_inv = np.linalg.pinv(X.T @ X)
    se = math.sqrt(q * (1 - q)) * sparsity * np.sqrt(np.clip(np.diag(xtx_inv), 0, None))
    return {k: float(v) for k, v in zip(frame.names, se)}


def rank_inversion_ci(
    frame: RegressionFrame,
    coefficient_name: str,
    level: float = 0.90,
    fit: Optional[QuantileFit] = None,
    tol: float = 1e-6,
    bracket_units: float = 50.0,
) -> Tuple[float, float]:
    """Confidence interval for one coefficient by inverting the rank-score test.

    The test of ``beta_j = xi`` fits ``target - xi * x_j`` on the remaining
    regressors and compares the standardised rank-score statistic with the
    two-sided normal critical value.  Each endpoint is located by bisection
    between the point estimate and ``point +/- bracket_units`` standard errors.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if coefficient_name not in frame.columns:
        raise MissingRegressor(coefficient_name)
    if fit is None:
        fit = fit_quantile(frame)
    q = frame.q
    names = frame.names
    j = names.index(coefficient_name)
    X = frame.design()
    y = frame.target
    xj = X[:, j]
    Z = np.delete(X, j, axis=1)
    if Z.shape[1]:
        xstar = xj - Z @ np.linalg.lstsq(Z, xj, rcond=None)[0]
    else:
        xstar = xj.copy()
    denom = math.sqrt(q * (1 - q) * float(xstar @ xstar))
    if denom == 0.0:
        raise RankDeficient(f"{coefficient_name} is collinear with the other regressors")
    crit = norm.ppf(1 - (1 - level) / 2)
    point = fit.coefficients[coefficient_name]

    state = {"basis": None}

    def rejects(xi):
        scores, h = rank_scores(Z, y - xi * xj, q, basis=state["basis"])
        state["basis"] = list(h)
        return abs(float(xstar @ scores)) / denom > crit

    se = coefficient_scale(frame, fit)[coefficient_name]
    if not math.isfinite(se) or se <= 0:
        se = float(np.std(y)) / max(float(np.std(xstar)), 1e-12)
    span = bracket_units * se

    def endpoint(direction):
        inside, outside = point, point + direction * span
        if not rejects(outside):
            raise UnboundedInterval(
                f"rank test never rejects for {coefficient_name} within {bracket_units} standard errors"
            )
        while abs(outside - inside) > tol:
            mid = 0.5 * (inside + outside)
            if rejects(mid):
                outside = mid
            else:
                inside = mid
        return 0.5 * (inside + outside)

    lower = endpoint(-1.0)
    upper = endpoint(1.0)
    return min(lower, point), max(upper, point)


def fit_with_ci(
    frame: RegressionFrame,
    ci_columns: Optional[Iterable[str]] = None,
    level: float = 0.90,
    basis: Optional[Sequence[int]] = None,
) -> QuantileFit:
    fit = fit_quantile(frame, basis=basis)
    fit.ci_level = level
    for name in frame.names if ci_columns is None else ci_columns:
        if name not in frame.columns:
            continue
        fit.ci[name] = rank_inversion_ci(frame, name, level=level, fit=fit)
    return fit
