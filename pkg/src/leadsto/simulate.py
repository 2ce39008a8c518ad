"""Synthetic factor-model return generator with machine-readable ground truth.

Returns follow r[i,t] = sum_j beta[i,j] * factor[j, t - lag(i,j)] + err[i,t].
Scenarios control the lag table and the error term:

    A: every portfolio reads every factor at base_lag; no dependencies.
    B: the first half of the portfolios reads factors at alt_lag instead.
    C: the first half draws an independent uniform lag per (portfolio,
       factor) from random_lag_range.
    D/E/F: as A/B/C plus n_dependencies ordered pairs (k -> i) where
       portfolio i's error picks up k's raw error lagged one day.

Ground truth contains the dependency pairs at delta 1 and, for every
ordered pair where one portfolio reads some shared nonzero-beta factor at
a strictly smaller lag, a factor-proxy relation at the smallest positive
lag difference (other differences are kept as alternates).

All randomness flows from the spec seed; structural draws (betas, lags,
dependency pairs) are shared by the two periods, factor and error draws
are not. The first simulated day of a period has no dependency carry-in.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .evaluate import Relation
from .trace import RawSeries

SCENARIOS = ("A", "B", "C", "D", "E", "F")
DEP_SCENARIOS = ("D", "E", "F")
ALT_LAG_SCENARIOS = ("B", "E")
RANDOM_LAG_SCENARIOS = ("C", "F")


@dataclass(frozen=True)
class SimSpec:
    scenario: str = "A"
    n_portfolios: int = 25
    n_days: int = 3001
    n_factors: int = 3
    base_lag: int = 3
    alt_lag: int = 1
    random_lag_range: tuple[int, int] = (0, 3)
    n_dependencies: int = 3
    market_beta_mean: float = 1.0
    market_beta_sd: float = 0.2
    other_beta_mean: float = 0.0
    other_beta_sd: float = 0.3
    zero_betas: bool = False
    factor_sd: tuple[float, ...] | None = None
    factor_correlation: float = 0.1
    residual_sd: float = 0.008
    residual_correlation: float = 0.1
    seed: int = 0
    factor_csv: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {''.join(SCENARIOS)}")
        if self.n_portfolios < 1 or self.n_factors < 1:
            raise ValueError("need at least one portfolio and one factor")
        if not 0 <= self.alt_lag <= self.base_lag:
            raise ValueError("need 0 <= alt_lag <= base_lag")
        lo, hi = self.random_lag_range
        if not 0 <= lo <= hi <= self.base_lag:
            raise ValueError("random_lag_range must sit inside [0, base_lag]")
        if self.n_days <= self.base_lag + 1:
            raise ValueError("n_days must exceed base_lag + 1")
        if self.n_dependencies < 0 or self.n_dependencies >= self.n_portfolios:
            raise ValueError("n_dependencies must be in [0, n_portfolios)")
        if self.factor_sd is not None and len(self.factor_sd) != self.n_factors:
            raise ValueError("factor_sd must list one value per factor")
        if not -1.0 < self.factor_correlation < 1.0:
            raise ValueError("factor_correlation must lie in (-1, 1)")
        if not -1.0 / max(self.n_portfolios - 1, 1) < self.residual_correlation < 1.0:
            raise ValueError("residual_correlation out of the positive-definite range")

    @property
    def factor_sds(self) -> np.ndarray:
        if self.factor_sd is not None:
            return np.asarray(self.factor_sd, dtype=float)
        sds = np.full(self.n_factors, 0.006)
        sds[0] = 0.01
        return sds

    @property
    def portfolio_names(self) -> list[str]:
        return [f"P{i:02d}" for i in range(self.n_portfolios)]

    @property
    def factor_names(self) -> list[str]:
        return [f"F{j}" for j in range(self.n_factors)]


@dataclass(frozen=True, order=True)
class TrueRelation:
    source: str
    target: str
    delta: int
    kind: str  # "dependency" | "factor-proxy"


@dataclass(frozen=True)
class GroundTruth:
    relations: frozenset[TrueRelation]
    alternates: frozenset[TrueRelation] = frozenset()

    def relation_set(self) -> set[Relation]:
        return {Relation(r.source, r.target, r.delta, "any") for r in self.relations}


@dataclass(frozen=True)
class _Structure:
    betas: np.ndarray  # (n_portfolios, n_factors)
    lags: np.ndarray  # (n_portfolios, n_factors) ints
    dependencies: tuple[tuple[int, int], ...]  # (source k, dependent i)


@dataclass(frozen=True)
class SimOutput:
    spec: SimSpec
    period: int
    returns: np.ndarray  # (n_portfolios, n_days)
    errors: np.ndarray  # post-injection idiosyncratic terms, same shape
    errors_raw: np.ndarray  # pre-injection draws
    factors: np.ndarray  # observed factors, (n_factors, n_days)
    factors_padded: np.ndarray  # with base_lag pre-sample columns
    betas: np.ndarray
    lags: np.ndarray
    dependencies: tuple[tuple[int, int], ...]
    ground_truth: GroundTruth

    def identity_residual(self) -> float:
        """Max |r - (beta . lagged factors + err)| over all cells."""
        spec = self.spec
        pad = spec.base_lag
        recon = np.array(self.errors, copy=True)
        for i in range(spec.n_portfolios):
            for j in range(spec.n_factors):
                lag = int(self.lags[i, j])
                recon[i] += self.betas[i, j] * self.factors_padded[
                    j, pad - lag : pad - lag + spec.n_days
                ]
        return float(np.max(np.abs(self.returns - recon)))

    def return_series(self) -> list[RawSeries]:
        names = self.spec.portfolio_names
        return [RawSeries(names[i], self.returns[i]) for i in range(len(names))]


def _draw_structure(spec: SimSpec) -> _Structure:
    rng = np.random.default_rng([spec.seed, 0])
    n, k = spec.n_portfolios, spec.n_factors
    betas = np.zeros((n, k))
    if not spec.zero_betas:
        betas[:, 0] = rng.normal(spec.market_beta_mean, spec.market_beta_sd, size=n)
        if k > 1:
            betas[:, 1:] = rng.normal(
                spec.other_beta_mean, spec.other_beta_sd, size=(n, k - 1)
            )
    lags = np.full((n, k), spec.base_lag, dtype=int)
    half = n // 2
    if spec.scenario in ALT_LAG_SCENARIOS:
        lags[:half, :] = spec.alt_lag
    elif spec.scenario in RANDOM_LAG_SCENARIOS:
        lo, hi = spec.random_lag_range
        lags[:half, :] = rng.integers(lo, hi + 1, size=(half, k))

    dependencies: list[tuple[int, int]] = []
    if spec.scenario in DEP_SCENARIOS and spec.n_dependencies > 0:
        targets = rng.choice(n, size=spec.n_dependencies, replace=False)
        for i in targets:
            k_src = int(rng.integers(0, n - 1))
            if k_src >= i:
                k_src += 1
            dependencies.append((k_src, int(i)))
    return _Structure(betas, lags, tuple(dependencies))


def _ground_truth(spec: SimSpec, structure: _Structure) -> GroundTruth:
    names = spec.portfolio_names
    primary: set[TrueRelation] = set()
    alternates: set[TrueRelation] = set()
    for k_src, i in structure.dependencies:
        primary.add(TrueRelation(names[k_src], names[i], 1, "dependency"))
    n = spec.n_portfolios
    nonzero = structure.betas != 0.0
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            shared = nonzero[a] & nonzero[b]
            diffs = sorted(
                {
                    int(structure.lags[b, j] - structure.lags[a, j])
                    for j in np.nonzero(shared)[0]
                    if structure.lags[b, j] > structure.lags[a, j]
                }
            )
            if diffs:
                primary.add(TrueRelation(names[a], names[b], diffs[0], "factor-proxy"))
                for d in diffs[1:]:
                    alternates.add(TrueRelation(names[a], names[b], d, "factor-proxy"))
    return GroundTruth(frozenset(primary), frozenset(alternates))


def _correlated_normals(
    rng: np.random.Generator, sds: np.ndarray, correlation: float, length: int
) -> np.ndarray:
    dim = sds.shape[0]
    corr = np.full((dim, dim), correlation)
    np.fill_diagonal(corr, 1.0)
    cov = corr * np.outer(sds, sds)
    chol = np.linalg.cholesky(cov)
    return chol @ rng.standard_normal((dim, length))


def _load_factor_csv(spec: SimSpec, period: int, padded_len: int) -> np.ndarray:
    from .trace import load_csv

    series = load_csv(spec.factor_csv)
    if len(series) < spec.n_factors:
        raise ValueError(
            f"{spec.factor_csv}: has {len(series)} columns, need {spec.n_factors}"
        )
    length = len(series[0])
    offset = (period - 1) * padded_len
    if length < offset + padded_len:
        raise ValueError(
            f"{spec.factor_csv}: needs {offset + padded_len} rows for period "
            f"{period}, has {length}"
        )
    return np.vstack(
        [s.values[offset : offset + padded_len] for s in series[: spec.n_factors]]
    )


def _generate_period(spec: SimSpec, structure: _Structure, period: int) -> SimOutput:
    rng = np.random.default_rng([spec.seed, period])
    n, k, T = spec.n_portfolios, spec.n_factors, spec.n_days
    pad = spec.base_lag

    if spec.factor_csv is not None:
        factors_padded = _load_factor_csv(spec, period, T + pad)
        _ = rng  # factor draw skipped; error draw below keeps the stream aligned
    else:
        factors_padded = _correlated_normals(
            rng, spec.factor_sds, spec.factor_correlation, T + pad
        )

    err_sds = np.full(n, spec.residual_sd)
    errors_full = _correlated_normals(rng, err_sds, spec.residual_correlation, T + 1)
    errors_raw = errors_full[:, 1:]
    errors = np.array(errors_raw, copy=True)
    for k_src, i in structure.dependencies:
        # raw error of the source portfolio, shifted one day back
        errors[i] += errors_full[k_src, :-1]

    returns = np.array(errors, copy=True)
    for i in range(n):
        for j in range(k):
            lag = int(structure.lags[i, j])
            returns[i] += structure.betas[i, j] * factors_padded[j, pad - lag : pad - lag + T]

    return SimOutput(
        spec=spec,
        period=period,
        returns=returns,
        errors=errors,
        errors_raw=errors_raw,
        factors=factors_padded[:, pad:],
        factors_padded=factors_padded,
        betas=structure.betas,
        lags=structure.lags,
        dependencies=structure.dependencies,
        ground_truth=_ground_truth(spec, structure),
    )


def simulate(spec: SimSpec, period: int = 1) -> SimOutput:
    """One simulated period under the spec; period selects the draw stream."""
    if period < 1:
        raise ValueError("period numbers start at 1")
    return _generate_period(spec, _draw_structure(spec), period)


def two_periods(spec: SimSpec) -> tuple[SimOutput, SimOutput]:
    """Two non-intersecting periods sharing betas, lags, and dependencies."""
    structure = _draw_structure(spec)
    return (
        _generate_period(spec, structure, 1),
        _generate_period(spec, structure, 2),
    )


def factor_residuals(out: SimOutput) -> np.ndarray:
    """Residuals of each portfolio regressed on the observed (contemporaneous)
    factors plus intercept; mimics the residual-analysis path. Not part of
    the scored evaluation."""
    T = out.spec.n_days
    X = np.hstack([np.ones((T, 1)), out.factors.T])
    coef, *_ = np.linalg.lstsq(X, out.returns.T, rcond=None)
    return (out.returns.T - X @ coef).T


# ---------------------------------------------------------------------------
# File outputs
# ---------------------------------------------------------------------------


def _write_matrix_csv(path, header_comment: str, names: list[str], matrix: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header_comment + "\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in matrix.T:
            writer.writerow([f"{v:.12g}" for v in row])


def save_outputs(out: SimOutput, directory, prefix: str = "") -> dict[str, str]:
    """Write returns/errors/factors/ground-truth CSVs plus the spec echo.

    Every CSV starts with a '#' comment carrying the seed, scenario, and
    period. Returns a name->path map of everything written.
    """
    import os

    os.makedirs(directory, exist_ok=True)
    spec = out.spec
    stamp = f"# seed={spec.seed} scenario={spec.scenario} period={out.period}"
    paths: dict[str, str] = {}

    def target(name: str) -> str:
        fname = f"{prefix}{name}"
        paths[name] = os.path.join(directory, fname)
        return paths[name]

    _write_matrix_csv(target("returns.csv"), stamp, spec.portfolio_names, out.returns)
    _write_matrix_csv(target("errors.csv"), stamp, spec.portfolio_names, out.errors)
    _write_matrix_csv(
        target("errors_raw.csv"), stamp, spec.portfolio_names, out.errors_raw
    )
    _write_matrix_csv(target("factors.csv"), stamp, spec.factor_names, out.factors)

    with open(target("ground_truth.csv"), "w", newline="", encoding="utf-8") as fh:
        fh.write(stamp + "\n")
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "delta", "kind"])
        for r in sorted(out.ground_truth.relations):
            writer.writerow([r.source, r.target, r.delta, r.kind])

    # side table: non-canonical lag differences, never part of scoring
    if out.ground_truth.alternates:
        with open(
            target("ground_truth_alternates.csv"), "w", newline="", encoding="utf-8"
        ) as fh:
            fh.write(stamp + "\n")
            writer = csv.writer(fh)
            writer.writerow(["source", "target", "delta", "kind"])
            for r in sorted(out.ground_truth.alternates):
                writer.writerow([r.source, r.target, r.delta, r.kind])

    with open(target("spec.json"), "w", encoding="utf-8") as fh:
        json.dump(asdict(spec) | {"period": out.period}, fh, indent=2)
        fh.write("\n")
    return paths
