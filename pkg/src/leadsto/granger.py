"""Pairwise Granger-causality F-tests on raw return series.

The test compares nested OLS fits of the target on its own lags, with and
without the source's lags, at a single lag depth L. Each depth is tested
separately. Regressions run over the T - L rows where all lags exist, so
the unrestricted residual degrees of freedom are (T - L) - (2L + 1).
OLS goes through a QR decomposition; residuals are orthogonal to the
design to ~1e-10 relative, and near-collinear designs raise rather than
silently producing garbage F values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import special

from .trace import RawSeries


class CollinearityError(ValueError):
    """The lagged design matrix is rank deficient."""


@dataclass(frozen=True)
class GrangerResult:
    source: str
    target: str
    lag: int
    f_stat: float
    p_value: float
    df1: int
    df2: int


def f_upper_tail(f_stat: float, df1: int, df2: int) -> float:
    """P(F >= f_stat) for an F(df1, df2) via the regularized incomplete beta."""
    if f_stat < 0:
        raise ValueError("F statistics are nonnegative")
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if np.isinf(f_stat):
        return 0.0
    x = df2 / (df2 + df1 * f_stat)
    return float(special.betainc(df2 / 2.0, df1 / 2.0, x))


def _ols_rss(X: np.ndarray, y: np.ndarray) -> float:
    """Residual sum of squares via QR; raises CollinearityError on rank loss."""
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    tol = max(X.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    if np.any(diag <= tol):
        raise CollinearityError(
            f"design matrix is rank deficient ({int((diag <= tol).sum())} "
            f"dependent column(s) of {X.shape[1]})"
        )
    coef = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ coef
    return float(resid @ resid)


def _lag_block(series: np.ndarray, lag: int) -> np.ndarray:
    """Columns [x_{t-1}, ..., x_{t-lag}] aligned with targets x_{lag..T-1}."""
    T = series.shape[0]
    return np.column_stack([series[lag - k : T - k] for k in range(1, lag + 1)])


def granger_test(x: RawSeries, y: RawSeries, lag: int) -> GrangerResult:
    """Does y Granger-cause x at lag depth `lag`?

    Restricted model: x_t ~ 1 + x_{t-1..t-lag}.
    Unrestricted adds y_{t-1..t-lag}. F follows F(lag, T - 3*lag - 1)
    under the null of no incremental predictive content.
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    xv = np.asarray(x.values, dtype=float)
    yv = np.asarray(y.values, dtype=float)
    if xv.shape[0] != yv.shape[0]:
        raise ValueError(
            f"series lengths differ: {x.name!r} has {xv.shape[0]}, "
            f"{y.name!r} has {yv.shape[0]}"
        )
    T = xv.shape[0]
    n_obs = T - lag
    df1 = lag
    df2 = n_obs - (2 * lag + 1)
    if df2 < 1:
        raise ValueError(
            f"series too short: need T >= {3 * lag + 2} for lag {lag}, got {T}"
        )
    if np.ptp(xv) == 0.0:
        raise ValueError(f"series {x.name!r} is constant")
    if np.ptp(yv) == 0.0:
        raise ValueError(f"series {y.name!r} is constant")

    target = xv[lag:]
    intercept = np.ones((n_obs, 1))
    own = _lag_block(xv, lag)
    other = _lag_block(yv, lag)

    rss_r = _ols_rss(np.hstack([intercept, own]), target)
    rss_u = _ols_rss(np.hstack([intercept, own, other]), target)

    if rss_u <= 0.0:
        f_stat = float("inf")
    else:
        # nested models: clamp the tiny negative differences roundoff can give
        f_stat = max(rss_r - rss_u, 0.0) / df1 / (rss_u / df2)
    return GrangerResult(
        source=y.name,
        target=x.name,
        lag=lag,
        f_stat=f_stat,
        p_value=f_upper_tail(f_stat, df1, df2),
        df1=df1,
        df2=df2,
    )


def granger_all_pairs(series: list[RawSeries], lag: int) -> list[GrangerResult]:
    """One direction-only test per ordered pair of distinct variables."""
    ordered = sorted(series, key=lambda s: s.name)
    out: list[GrangerResult] = []
    for source in ordered:
        for target in ordered:
            if source.name == target.name:
                continue
            out.append(granger_test(target, source, lag))
    return out


def save_granger_csv(results: list[GrangerResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "lag", "f_stat", "p_value"])
        for r in results:
            writer.writerow(
                [r.source, r.target, r.lag, f"{r.f_stat:.10g}", f"{r.p_value:.12g}"]
            )
