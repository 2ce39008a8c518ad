"""Empirical-null local false discovery rates over causal-significance scores.

The pipeline is: standardize scores to z-values, estimate the mixture
density f(z) by Poisson-regression smoothing of a histogram, fit a normal
null f0 to the central bulk of f (or take the theoretical N(0,1)), then
report fdr(z) = min(1, f0(z)/f(z)) per entry and label entries below a
threshold as significant. The prior null weight is intentionally omitted
from the ratio, so the reported fdr is an upper bound on the posterior
null probability.

Labels are tail-monotone: the reported fdr is the running minimum of the
raw ratio moving outward from the null center in each tail, so an entry
more extreme than a significant one cannot be insignificant. The raw
(non-monotonized) ratio is retained alongside.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

DEFAULT_THRESHOLD = 0.01
DEFAULT_BINS = 120
DEFAULT_POLY_DEGREE = 7
DEFAULT_CENTRAL_HALFWIDTH = 1.0
MIN_EMPIRICAL_N = 20
NON_NULL_GUARD = 0.10

_SQRT2PI = math.sqrt(2.0 * math.pi)


class FitError(ValueError):
    """Density or null estimation cannot proceed on this input."""


@dataclass
class ZTable:
    """Standardized scores. z = (value - center) / scale, population convention."""

    ids: list[str]
    values: np.ndarray
    z: np.ndarray
    center: float
    scale: float
    null_mean: float | None = None
    null_sd: float | None = None
    null_source: str | None = None

    def __len__(self) -> int:
        return len(self.ids)


def standardize(ids: Sequence[str], values: Sequence[float]) -> ZTable:
    """Shift/scale raw scores by their sample mean and population sd (ddof=0)."""
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or len(ids) != vals.size:
        raise ValueError("ids and values must be equal-length 1-d sequences")
    if np.unique(vals).size < 2:
        raise FitError("need at least 2 distinct score values to standardize")
    center = float(vals.mean())
    scale = float(vals.std())
    return ZTable(list(ids), vals, (vals - center) / scale, center, scale)


def to_zvalues(scores) -> ZTable:
    """Standardize the defined epsilon_avg values of a list of CausalScores."""
    pairs = [(s.hypothesis.id, s.epsilon_avg) for s in scores if s.epsilon_avg is not None]
    if not pairs:
        raise FitError("no defined epsilon_avg values to standardize")
    ids, vals = zip(*pairs)
    return standardize(list(ids), list(vals))


def pvalues_to_zvalues(ids: Sequence[str], pvalues: Sequence[float]) -> ZTable:
    """Map p-values to z by the inverse normal of (1 - p).

    Uniform null p-values become exactly standard normal, so tables built
    this way pair with the theoretical null. p is clamped to
    [1e-16, 1 - 1e-16]: double precision cannot distinguish smaller tails
    and unclamped values would blow up the histogram range.
    """
    p = np.clip(np.asarray(pvalues, dtype=float), 1e-16, 1.0 - 1e-16)
    if np.any((np.asarray(pvalues, dtype=float) < 0) | (np.asarray(pvalues, dtype=float) > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    z = stats.norm.ppf(1.0 - p)
    return ZTable(list(ids), np.asarray(pvalues, dtype=float), z, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Mixture density
# ---------------------------------------------------------------------------


class MixtureDensity:
    """Smooth density estimate of the observed z-values.

    Evaluation outside the fitted support clamps to the nearest endpoint;
    the density is normalized to integrate to 1 over the support.
    """

    def __init__(
        self,
        kind: str,
        evaluate: Callable[[np.ndarray], np.ndarray],
        support: tuple[float, float],
        bin_centers: np.ndarray,
        bin_counts: np.ndarray,
        bin_width: float,
    ):
        self.kind = kind
        self._evaluate = evaluate
        self.support = support
        self.bin_centers = bin_centers
        self.bin_counts = bin_counts
        self.bin_width = bin_width
        self.grid = np.linspace(support[0], support[1], 2001)
        raw = evaluate(self.grid)
        norm = float(np.trapezoid(raw, self.grid))
        if not np.isfinite(norm) or norm <= 0:
            raise FitError("density estimate failed to normalize")
        self._norm = norm
        self.grid_density = raw / norm

    def pdf(self, z) -> np.ndarray | float:
        arr = np.atleast_1d(np.asarray(z, dtype=float))
        out = self._evaluate(np.clip(arr, *self.support)) / self._norm
        if np.ndim(z) == 0:
            return float(out[0])
        return out

    @property
    def mode(self) -> float:
        return float(self.grid[int(np.argmax(self.grid_density))])

    def mass_between(self, lo: float, hi: float) -> float:
        inside = (self.grid >= lo) & (self.grid <= hi)
        if inside.sum() < 2:
            return 0.0
        return float(np.trapezoid(self.grid_density[inside], self.grid[inside]))


def _poisson_poly_fit(
    z: np.ndarray, edges: np.ndarray, counts: np.ndarray, degree: int
) -> Callable[[np.ndarray], np.ndarray] | None:
    """Poisson regression of histogram counts on a polynomial basis in z.

    Returns an unnormalized density callable, or None when the iteration
    fails to converge or produces non-finite coefficients.
    """
    centers = 0.5 * (edges[:-1] + edges[1:])
    mu, sd = float(z.mean()), float(z.std())
    t = (centers - mu) / sd
    X = np.vander(t, degree + 1, increasing=True)
    col_scale = X.std(axis=0)
    col_scale[col_scale < 1e-12] = 1.0
    col_scale[0] = 1.0
    X = X / col_scale

    beta = np.linalg.lstsq(X, np.log(counts + 1.0), rcond=None)[0]
    converged = False
    for _ in range(200):
        eta = np.clip(X @ beta, -30.0, 30.0)
        fitted = np.exp(eta)
        weight = fitted
        hessian = X.T @ (X * weight[:, None])
        gradient = X.T @ (counts - fitted)
        try:
            step = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            return None
        beta = beta + step
        if not np.all(np.isfinite(beta)):
            return None
        if float(np.max(np.abs(step))) < 1e-10:
            converged = True
            break
    if not converged:
        return None

    def evaluate(q: np.ndarray) -> np.ndarray:
        tq = (np.asarray(q, dtype=float) - mu) / sd
        basis = np.vander(np.atleast_1d(tq), degree + 1, increasing=True) / col_scale
        return np.exp(np.clip(basis @ beta, -300.0, 300.0))

    return evaluate


def fit_mixture(
    table: ZTable,
    bins: int = DEFAULT_BINS,
    poly_degree: int = DEFAULT_POLY_DEGREE,
    warnings: list[str] | None = None,
) -> MixtureDensity:
    """Estimate the z-value mixture density f.

    Histogram over [min z - margin, max z + margin] with `bins` equal-width
    bins, then a log-polynomial fit of degree `poly_degree` by Poisson
    regression. Degenerate inputs (near-point-mass) and non-convergent
    fits fall back to a Gaussian kernel estimate with Silverman bandwidth;
    the fallback is recorded in `warnings`.
    """
    z = table.z
    if z.size < MIN_EMPIRICAL_N:
        raise FitError(
            f"density estimation needs at least {MIN_EMPIRICAL_N} scores, got {z.size}"
        )
    lo, hi = float(z.min()), float(z.max())
    if hi - lo < 1e-12:
        raise FitError("degenerate z range: all z-values equal")
    margin = 0.05 * (hi - lo)
    support = (lo - margin, hi + margin)
    edges = np.linspace(support[0], support[1], bins + 1)
    counts, _ = np.histogram(z, edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = float(edges[1] - edges[0])

    evaluate = None
    kind = "poisson"
    if np.unique(z).size >= 5:
        evaluate = _poisson_poly_fit(z, edges, counts, poly_degree)
    if evaluate is None:
        kind = "kde"
        if warnings is not None:
            warnings.append(
                "mixture fit fell back to a Silverman-bandwidth kernel estimate"
            )
        kde = stats.gaussian_kde(z, bw_method="silverman")
        evaluate = lambda q: kde(np.atleast_1d(q))
    return MixtureDensity(kind, evaluate, support, centers, counts, width)


# ---------------------------------------------------------------------------
# Null estimation
# ---------------------------------------------------------------------------


@dataclass
class NullEstimate:
    """Normal null: location delta, scale sigma, and how it was obtained."""

    delta: float
    sigma: float
    source: str  # "empirical" | "theoretical"
    p0_hat: float
    non_null_fraction: float
    warnings: list[str] = field(default_factory=list)

    def pdf(self, z) -> np.ndarray:
        q = (np.asarray(z, dtype=float) - self.delta) / self.sigma
        return np.exp(-0.5 * q * q) / (self.sigma * _SQRT2PI)


def _estimate_p0(f: MixtureDensity, delta: float, sigma: float) -> float:
    """Null proportion from the density height at the null center."""
    peak_null = 1.0 / (sigma * _SQRT2PI)
    return min(1.0, f.pdf(float(delta)) / peak_null)


def fit_empirical_null(
    table: ZTable,
    f: MixtureDensity,
    central_halfwidth: float = DEFAULT_CENTRAL_HALFWIDTH,
    force_theoretical: bool = False,
) -> NullEstimate:
    """Fit N(delta, sigma^2) to the central bulk of f by quadratic matching.

    A quadratic is least-squares fitted to log f on
    [mode - central_halfwidth, mode + central_halfwidth]; its vertex and
    curvature give delta and sigma. Falls back to the theoretical N(0,1)
    (with a recorded warning) when the table is too small, the central
    mass is under 50%, or the central fit is not concave.
    """
    warnings: list[str] = []

    def theoretical(reason: str | None) -> NullEstimate:
        if reason:
            warnings.append(reason)
        p0 = _estimate_p0(f, 0.0, 1.0)
        est = NullEstimate(0.0, 1.0, "theoretical", p0, 1.0 - p0, warnings)
        _attach(table, est)
        return est

    if force_theoretical:
        return theoretical(None)
    if len(table) < MIN_EMPIRICAL_N:
        return theoretical(
            f"empirical null refused: {len(table)} scores < {MIN_EMPIRICAL_N}; "
            "using theoretical N(0,1)"
        )
    mode = f.mode
    lo, hi = mode - central_halfwidth, mode + central_halfwidth
    if f.mass_between(lo, hi) < 0.5:
        return theoretical(
            "central region holds under 50% of the fitted mass; "
            "using theoretical N(0,1)"
        )
    grid = np.linspace(lo, hi, 201)
    logf = np.log(np.maximum(f.pdf(grid), 1e-300))
    basis = np.vander(grid, 3, increasing=True)
    c0, c1, c2 = np.linalg.lstsq(basis, logf, rcond=None)[0]
    if c2 >= -1e-12:
        return theoretical(
            "central fit of log f is not concave; using theoretical N(0,1)"
        )
    sigma = math.sqrt(-1.0 / (2.0 * c2))
    delta = c1 * sigma * sigma
    p0 = _estimate_p0(f, delta, sigma)
    est = NullEstimate(delta, sigma, "empirical", p0, 1.0 - p0, warnings)
    _attach(table, est)
    return est


def _attach(table: ZTable, est: NullEstimate) -> None:
    table.null_mean = est.delta
    table.null_sd = est.sigma
    table.null_source = est.source
    if est.non_null_fraction > NON_NULL_GUARD:
        est.warnings.append(
            f"estimated non-null fraction {est.non_null_fraction:.2f} exceeds "
            f"{NON_NULL_GUARD:.0%}: the empirical null is unreliable here"
        )


# ---------------------------------------------------------------------------
# Local fdr
# ---------------------------------------------------------------------------


@dataclass
class FdrReport:
    """Per-entry local fdr with significance labels and fitted curves."""

    ids: list[str]
    values: np.ndarray
    z: np.ndarray
    raw_fdr: np.ndarray
    fdr: np.ndarray
    significant: np.ndarray
    threshold: float
    null: NullEstimate
    mixture: MixtureDensity | None
    warnings: list[str] = field(default_factory=list)
    label_mode: str = "fdr"

    @property
    def n_significant(self) -> int:
        return int(self.significant.sum())

    def significant_ids(self) -> list[str]:
        return [i for i, flag in zip(self.ids, self.significant) if flag]


def _monotonize_tails(z: np.ndarray, raw: np.ndarray, center: float) -> np.ndarray:
    """Running minimum of the raw ratio moving outward from the null center."""
    out = raw.copy()
    order = np.argsort(z, kind="stable")
    zs = z[order]
    right = zs >= center
    ridx = order[right]
    if ridx.size:
        out[ridx] = np.minimum.accumulate(raw[ridx])
    lidx = order[~right][::-1]
    if lidx.size:
        out[lidx] = np.minimum.accumulate(raw[lidx])
    return out


def local_fdr(
    table: ZTable,
    f: MixtureDensity,
    null: NullEstimate,
    threshold: float = DEFAULT_THRESHOLD,
) -> FdrReport:
    """fdr(z) = min(1, f0(z)/f(z)), tail-monotonized; significant iff fdr < threshold."""
    fz = f.pdf(table.z)
    if np.any(fz <= 0):
        raise AssertionError("fitted mixture density vanished at an observed z")
    raw = np.minimum(1.0, null.pdf(table.z) / fz)
    fdr = _monotonize_tails(table.z, raw, null.delta)
    significant = fdr < threshold
    return FdrReport(
        ids=list(table.ids),
        values=table.values.copy(),
        z=table.z.copy(),
        raw_fdr=raw,
        fdr=fdr,
        significant=significant,
        threshold=threshold,
        null=null,
        mixture=f,
        warnings=list(null.warnings),
    )


def threshold_from_fdr(report: FdrReport) -> float | None:
    """Smallest |score| among significant entries; None when nothing is significant."""
    if not report.significant.any():
        return None
    return float(np.abs(report.values[report.significant]).min())


def bh_stepup(pvalues: Sequence[float], q: float = 0.05) -> np.ndarray:
    """Benjamini-Hochberg step-up rejections at level q (cross-check path)."""
    p = np.asarray(pvalues, dtype=float)
    n = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    thresholds = q * (np.arange(1, n + 1) / n)
    below = np.nonzero(ranked <= thresholds)[0]
    reject = np.zeros(n, dtype=bool)
    if below.size:
        reject[order[: below[-1] + 1]] = True
    return reject


# ---------------------------------------------------------------------------
# One-call analysis with fallbacks and manual cutoffs
# ---------------------------------------------------------------------------


def analyze(
    ids: Sequence[str],
    values: Sequence[float],
    threshold: float = DEFAULT_THRESHOLD,
    null_mode: str = "empirical",
    bins: int = DEFAULT_BINS,
    poly_degree: int = DEFAULT_POLY_DEGREE,
    central_halfwidth: float = DEFAULT_CENTRAL_HALFWIDTH,
    manual_z: float | None = None,
    manual_epsilon: float | None = None,
    prestandardized: bool = False,
) -> FdrReport:
    """Standardize scores, fit densities, and label significance.

    null_mode is "empirical" or "theoretical". manual_z / manual_epsilon
    replace the fdr labeling with a hand-chosen cutoff (z right tail,
    respectively |score|); the fitted fdr values are still reported when
    obtainable. Tables already on the z scale (e.g. from p-values) pass
    prestandardized=True.
    """
    if null_mode not in ("empirical", "theoretical"):
        raise ValueError(f"unknown null mode {null_mode!r}")
    if prestandardized:
        vals = np.asarray(values, dtype=float)
        table = ZTable(list(ids), vals, vals.copy(), 0.0, 1.0)
    else:
        table = standardize(ids, values)

    warnings: list[str] = []
    try:
        mixture = fit_mixture(table, bins=bins, poly_degree=poly_degree, warnings=warnings)
        null = fit_empirical_null(
            table,
            mixture,
            central_halfwidth=central_halfwidth,
            force_theoretical=(null_mode == "theoretical"),
        )
        report = local_fdr(table, mixture, null, threshold)
        report.warnings = warnings + report.warnings
    except FitError as exc:
        if manual_z is None and manual_epsilon is None:
            raise
        # manual cutoffs still work without fitted densities
        nan = np.full(len(table), np.nan)
        report = FdrReport(
            ids=list(table.ids),
            values=table.values.copy(),
            z=table.z.copy(),
            raw_fdr=nan.copy(),
            fdr=nan,
            significant=np.zeros(len(table), dtype=bool),
            threshold=threshold,
            null=NullEstimate(0.0, 1.0, "theoretical", 1.0, 0.0),
            mixture=None,
            warnings=warnings + [f"density fitting skipped: {exc}"],
        )

    if manual_z is not None and manual_epsilon is not None:
        raise ValueError("choose one of manual_z / manual_epsilon, not both")
    if manual_z is not None:
        report.significant = report.z >= manual_z
        report.label_mode = f"manual_z={manual_z:g}"
        report.warnings.append(f"labels from manual z cutoff {manual_z:g}")
    elif manual_epsilon is not None:
        report.significant = np.abs(report.values) >= manual_epsilon
        report.label_mode = f"manual_epsilon={manual_epsilon:g}"
        report.warnings.append(f"labels from manual |score| cutoff {manual_epsilon:g}")
    return report


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def save_report_csv(report: FdrReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hypothesis", "score", "z", "raw_fdr", "fdr", "label"])
        for i in range(len(report.ids)):
            writer.writerow(
                [
                    report.ids[i],
                    f"{report.values[i]:.10g}",
                    f"{report.z[i]:.10g}",
                    f"{report.raw_fdr[i]:.6g}",
                    f"{report.fdr[i]:.6g}",
                    "significant" if report.significant[i] else "null",
                ]
            )


def save_density_csv(report: FdrReport, path) -> None:
    """Plot-ready histogram and curves: z-grid, bin counts, f, f0."""
    if report.mixture is None:
        raise ValueError("no fitted density to export")
    m = report.mixture
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "count", "f", "f0"])
        fvals = m.pdf(m.bin_centers)
        f0vals = report.null.pdf(m.bin_centers)
        for i in range(m.bin_centers.size):
            writer.writerow(
                [
                    f"{m.bin_centers[i]:.10g}",
                    int(m.bin_counts[i]),
                    f"{fvals[i]:.10g}",
                    f"{f0vals[i]:.10g}",
                ]
            )


def summary_dict(report: FdrReport) -> dict:
    eps = threshold_from_fdr(report)
    return {
        "n_scores": len(report.ids),
        "n_significant": report.n_significant,
        "threshold": report.threshold,
        "label_mode": report.label_mode,
        "null": {
            "delta": report.null.delta,
            "sigma": report.null.sigma,
            "source": report.null.source,
            "p0_hat": report.null.p0_hat,
            "non_null_fraction": report.null.non_null_fraction,
        },
        "epsilon_cutoff": eps,
        "warnings": report.warnings,
    }


def save_summary_json(report: FdrReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary_dict(report), fh, indent=2)
        fh.write("\n")
