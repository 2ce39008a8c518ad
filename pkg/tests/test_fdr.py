import math

import numpy as np
import pytest
from scipy import stats

from leadsto.fdr import (
    FitError,
    MixtureDensity,
    NullEstimate,
    analyze,
    bh_stepup,
    fit_empirical_null,
    fit_mixture,
    local_fdr,
    pvalues_to_zvalues,
    standardize,
    threshold_from_fdr,
    to_zvalues,
)


def _phi(z, d=0.0, s=1.0):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * ((z - d) / s) ** 2) / (s * math.sqrt(2 * math.pi))


def _ids(n):
    return [f"h{i}" for i in range(n)]


def _table(values):
    return standardize(_ids(len(values)), values)


def _normal_table(n, seed, loc=0.0, scale=1.0):
    rng = np.random.default_rng(seed)
    z = rng.normal(loc, scale, n)
    return standardize(_ids(n), z)


class TestStandardize:
    def test_population_sd_convention(self):
        t = _table([-1.0, 0.0, 1.0])
        np.testing.assert_allclose(t.z, [-1.2247448, 0.0, 1.2247448], atol=1e-6)

    def test_shift_invariance(self):
        a = _table([0.1, 0.4, -0.2, 0.9])
        b = _table([7.1, 7.4, 6.8, 7.9])
        np.testing.assert_allclose(a.z, b.z, atol=1e-12)

    def test_mean_maps_to_zero(self):
        t = _table([2.0, 4.0, 6.0])
        assert t.z[1] == 0.0

    def test_zero_variance_rejected(self):
        with pytest.raises(FitError):
            _table([0.5] * 30)

    def test_to_zvalues_filters_undefined(self):
        class FakeScore:
            def __init__(self, i, eps):
                self.epsilon_avg = eps
                self.hypothesis = type("H", (), {"id": f"h{i}"})()

        scores = [FakeScore(0, 0.1), FakeScore(1, None), FakeScore(2, -0.3)]
        t = to_zvalues(scores)
        assert t.ids == ["h0", "h2"]


class TestFitMixture:
    def test_standard_normal_recovery(self):
        t = _normal_table(10_000, seed=42)
        f = fit_mixture(t)
        grid = np.linspace(-3, 3, 121)
        sup = np.max(np.abs(f.pdf(grid) - _phi(grid)))
        assert sup < 0.02

    def test_integrates_to_one(self):
        t = _normal_table(5_000, seed=1)
        f = fit_mixture(t)
        total = np.trapezoid(f.grid_density, f.grid)
        assert abs(total - 1.0) < 0.01
        assert (f.grid_density >= 0).all()

    def test_right_shoulder(self):
        rng = np.random.default_rng(7)
        z = rng.normal(0, 1, 10_000)
        mask = rng.random(10_000) < 0.05
        z[mask] += 3.0
        f = fit_mixture(standardize(_ids(z.size), z))
        assert float(f.pdf(3.0)) > _phi(3.0)

    def test_two_point_mass_falls_back(self):
        warnings = []
        values = np.array([0.0] * 15 + [1.0] * 15)
        f = fit_mixture(_table(values), warnings=warnings)
        assert f.kind == "kde"
        assert warnings

    def test_too_few_scores_rejected(self):
        with pytest.raises(FitError, match="at least 20"):
            fit_mixture(_normal_table(10, seed=0))


class TestEmpiricalNull:
    def test_pure_null_recovery(self):
        t = _normal_table(10_000, seed=3)
        f = fit_mixture(t)
        est = fit_empirical_null(t, f)
        assert est.source == "empirical"
        assert abs(est.delta) < 0.05
        assert abs(est.sigma - 1.0) < 0.05
        assert t.null_source == "empirical"

    def test_shifted_null_recovery(self):
        rng = np.random.default_rng(9)
        z = rng.normal(0.3, 1.0, 10_000)
        # feed unstandardized z so the shift is visible to the null fit
        t = pvalues_to_zvalues(_ids(z.size), stats.norm.sf(z))
        f = fit_mixture(t)
        est = fit_empirical_null(t, f)
        assert abs(est.delta - 0.3) < 0.06

    def test_theoretical_mode(self):
        t = _normal_table(1_000, seed=5, loc=0.4)
        f = fit_mixture(t)
        est = fit_empirical_null(t, f, force_theoretical=True)
        assert (est.delta, est.sigma, est.source) == (0.0, 1.0, "theoretical")

    def test_small_table_falls_back_with_warning(self):
        rng = np.random.default_rng(2)
        vals = rng.normal(size=12)
        t = standardize(_ids(12), vals)
        f = MixtureDensity(
            "kde",
            lambda q: _phi(q),
            (-4, 4),
            np.linspace(-3, 3, 10),
            np.ones(10),
            0.5,
        )
        est = fit_empirical_null(t, f)
        assert est.source == "theoretical"
        assert any("refused" in w for w in est.warnings)

    def test_spread_mass_falls_back(self):
        # three far-separated humps, none holding half the mass; the z scale
        # is taken as-is so the humps stay far apart
        from leadsto.fdr import ZTable

        rng = np.random.default_rng(4)
        z = np.concatenate(
            [rng.normal(0, 0.4, 400), rng.normal(12, 0.4, 350), rng.normal(24, 0.4, 250)]
        )
        t = ZTable(_ids(z.size), z, z.copy(), 0.0, 1.0)
        est = fit_empirical_null(t, fit_mixture(t))
        assert est.source == "theoretical"
        assert any("central region" in w for w in est.warnings)

    def test_non_null_guard_triggers(self):
        rng = np.random.default_rng(11)
        z = rng.normal(0, 1, 10_000)
        mask = rng.random(10_000) < 0.30
        z[mask] = rng.normal(4.0, 1.0, int(mask.sum()))
        t = pvalues_to_zvalues(_ids(z.size), stats.norm.sf(z))
        f = fit_mixture(t)
        est = fit_empirical_null(t, f)
        assert est.non_null_fraction > 0.10
        assert any("unreliable" in w for w in est.warnings)


def _analytic_mixture(p0=0.95, mu=3.0, sd=1.0):
    def evaluate(q):
        return p0 * _phi(q) + (1 - p0) * _phi(q, mu, sd)

    return MixtureDensity(
        "analytic",
        evaluate,
        (-6.0, 9.0),
        np.linspace(-5, 8, 50),
        np.ones(50),
        0.2,
    )


class TestLocalFdr:
    def test_identical_densities_give_fdr_one(self):
        t = _normal_table(100, seed=8)
        f = MixtureDensity(
            "analytic", lambda q: _phi(q), (-5, 5), np.linspace(-4, 4, 10), np.ones(10), 1.0
        )
        null = NullEstimate(0.0, 1.0, "theoretical", 1.0, 0.0)
        report = local_fdr(t, f, null)
        # the finite-support normalization nudges f by ~1e-6
        np.testing.assert_allclose(report.fdr, 1.0, atol=1e-5)
        assert report.n_significant == 0

    def test_ratio_above_one_clips(self):
        t = _normal_table(50, seed=8)
        # a much wider f: f0/f ~ 2 near the center before clipping
        f = MixtureDensity(
            "analytic",
            lambda q: _phi(q, 0.0, 2.0),
            (-8, 8),
            np.linspace(-4, 4, 10),
            np.ones(10),
            1.0,
        )
        null = NullEstimate(0.0, 1.0, "theoretical", 1.0, 0.0)
        report = local_fdr(t, f, null)
        assert (report.fdr <= 1.0).all()
        central = np.abs(report.z) < 1.0
        assert (report.raw_fdr[central] == 1.0).all()

    def test_sharp_mixture_separates(self):
        # 0.9 N(0,1) + 0.1 N(4, 0.5), fitted from a large sample
        rng = np.random.default_rng(12)
        n = 10_000
        z = rng.normal(0, 1, n)
        mask = rng.random(n) < 0.10
        z[mask] = rng.normal(4.0, 0.5, int(mask.sum()))
        t = pvalues_to_zvalues(_ids(n), stats.norm.sf(z))
        f = fit_mixture(t)
        null = fit_empirical_null(t, f)
        report = local_fdr(t, f, null)
        far_right = report.z > 3.8
        assert far_right.any()
        assert (report.fdr[far_right] < 0.01).all()
        central = np.abs(report.z) < 1.0
        assert (report.fdr[central] > 0.5).all()

    def test_monotone_tails(self):
        rng = np.random.default_rng(13)
        n = 4_000
        z = rng.normal(0, 1, n)
        mask = rng.random(n) < 0.08
        z[mask] = rng.normal(3.5, 1.0, int(mask.sum()))
        t = pvalues_to_zvalues(_ids(n), stats.norm.sf(z))
        f = fit_mixture(t)
        null = fit_empirical_null(t, f)
        report = local_fdr(t, f, null)
        order = np.argsort(report.z)
        fdr = report.fdr[order]
        zs = report.z[order]
        right = zs >= null.delta
        assert (np.diff(fdr[right]) <= 1e-12).all()
        left = zs <= null.delta
        assert (np.diff(fdr[left]) >= -1e-12).all()
        # labels: anything more extreme than a significant entry is significant
        sig_z = report.z[report.significant]
        if sig_z.size:
            zmax = sig_z.min() if (sig_z > null.delta).all() else None
            if zmax is not None:
                assert report.significant[report.z >= zmax].all()

    def test_upper_bounds_posterior_on_analytic_mixture(self):
        # fdr drops the p0 factor, so it upper-bounds Pr{null|z} exactly
        p0 = 0.95
        f = _analytic_mixture(p0=p0)
        null = NullEstimate(0.0, 1.0, "theoretical", p0, 1 - p0)
        grid = np.linspace(-4.5, 7.5, 400)
        t = pvalues_to_zvalues(_ids(grid.size), stats.norm.sf(grid))
        report = local_fdr(t, f, null)
        posterior = p0 * null.pdf(grid) / f.pdf(grid)
        assert (report.fdr >= posterior - 1e-12).all()


class TestThreshold:
    def _report(self, values, flags):
        n = len(values)
        return type(
            "R",
            (),
            {
                "values": np.asarray(values, dtype=float),
                "significant": np.asarray(flags, dtype=bool),
            },
        )()

    def test_empty(self):
        assert threshold_from_fdr(self._report([0.5, -0.2], [False, False])) is None

    def test_single(self):
        assert threshold_from_fdr(self._report([0.31], [True])) == pytest.approx(0.31)

    def test_min_absolute(self):
        r = self._report([0.31, -0.45, 0.1], [True, True, False])
        assert threshold_from_fdr(r) == pytest.approx(0.31)


class TestPvalueMapping:
    def test_uniform_maps_to_standard_normal(self):
        rng = np.random.default_rng(3)
        p = rng.random(50_000)
        t = pvalues_to_zvalues(_ids(p.size), p)
        assert abs(t.z.mean()) < 0.02
        assert abs(t.z.std() - 1.0) < 0.02

    def test_extreme_p_clamped(self):
        t = pvalues_to_zvalues(["a", "b"], [0.0, 1.0])
        assert np.isfinite(t.z).all()

    def test_invalid_p_rejected(self):
        with pytest.raises(ValueError):
            pvalues_to_zvalues(["a"], [1.5])


class TestStepUp:
    def test_known_example(self):
        p = [0.001, 0.008, 0.039, 0.041, 0.042, 0.06, 0.074, 0.205, 0.212, 0.216]
        # thresholds k*q/n = 0.005, 0.010, 0.015, ...: largest passing rank is 2
        reject = bh_stepup(p, q=0.05)
        assert reject.tolist() == [True] * 2 + [False] * 8
        # at q=0.25 the largest passing rank is 10 (0.216 <= 0.25), so all reject
        reject_wide = bh_stepup(p, q=0.25)
        assert reject_wide.all()

    def test_no_rejections(self):
        assert not bh_stepup([0.9, 0.8, 0.95], q=0.05).any()


class TestAnalyze:
    def test_manual_z_mode(self):
        rng = np.random.default_rng(21)
        vals = rng.normal(0, 0.05, 200)
        vals[:5] += 1.0
        report = analyze(_ids(200), vals, manual_z=3.0)
        assert report.label_mode == "manual_z=3"
        assert set(np.nonzero(report.significant)[0]) == set(range(5))

    def test_manual_epsilon_mode(self):
        vals = np.array([0.5, -0.6, 0.01, 0.02] + [0.0, 0.001] * 20)
        report = analyze(_ids(len(vals)), vals, manual_epsilon=0.4)
        assert report.significant[:2].all()
        assert not report.significant[2:].any()

    def test_small_table_without_manual_mode_raises(self):
        with pytest.raises(FitError):
            analyze(_ids(5), [0.1, 0.2, 0.3, 0.4, 0.5])

    def test_small_table_with_manual_mode_works(self):
        report = analyze(_ids(5), [0.1, 0.2, 0.3, 0.4, 2.5], manual_epsilon=1.0)
        assert report.significant.tolist() == [False] * 4 + [True]
        assert any("skipped" in w for w in report.warnings)

    def test_both_manual_modes_rejected(self):
        with pytest.raises(ValueError):
            analyze(_ids(30), list(range(30)), manual_z=1.0, manual_epsilon=0.5)

    def test_theoretical_mode_null(self):
        rng = np.random.default_rng(17)
        vals = rng.normal(size=2000)
        report = analyze(_ids(2000), vals, null_mode="theoretical", prestandardized=True)
        assert report.null.source == "theoretical"
