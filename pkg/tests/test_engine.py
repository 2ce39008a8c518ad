import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from leadsto.engine import (
    CausalScore,
    Hypothesis,
    classify,
    epsilon_avg,
    epsilon_x,
    generate_pairwise,
    prima_facie_test,
    score_hypotheses,
)
from leadsto.formula import Atom, WindowBound
from leadsto.trace import RawSeries, Trace, discretize
from strategies import trace_from_columns


def _trace(**cols):
    return trace_from_columns({k: [bool(x) for x in v] for k, v in cols.items()})


W11 = WindowBound(1, 1)


class TestGeneratePairwise:
    def test_two_variables_one_window(self):
        t = discretize([RawSeries("X", [1.0, -1.0]), RawSeries("Y", [1.0, 1.0])])
        hyps = generate_pairwise(t, [W11])
        assert len(hyps) == 8  # 4 * V * (V-1) * W with V=2, W=1
        assert len({h.id for h in hyps}) == 8

    def test_formula_count_at_scale(self):
        series = [RawSeries(f"S{i:02d}", [1.0, -1.0, 1.0]) for i in range(25)]
        t = discretize(series)
        windows = [WindowBound(k, k) for k in (1, 2, 3)]
        assert len(generate_pairwise(t, windows)) == 7200

    def test_single_variable_yields_nothing(self):
        t = discretize([RawSeries("X", [1.0, -1.0])])
        assert generate_pairwise(t, [W11]) == []

    def test_bad_windows(self):
        t = discretize([RawSeries("X", [1.0]), RawSeries("Y", [1.0])])
        with pytest.raises(ValueError):
            generate_pairwise(t, [])
        with pytest.raises(ValueError):
            generate_pairwise(t, [WindowBound(0, 1)])


class TestPrimaFacie:
    def test_cause_never_true(self):
        t = _trace(c=[0, 0, 0, 0], e=[0, 1, 0, 1])
        s = prima_facie_test(t, Hypothesis(Atom("c"), Atom("e"), W11))
        assert not s.prima_facie

    def test_effect_always_true(self):
        t = _trace(c=[1, 0, 1, 0], e=[1, 1, 1, 1])
        s = prima_facie_test(t, Hypothesis(Atom("c"), Atom("e"), W11))
        # conditional probability cannot exceed a marginal of 1
        assert s.p_leadsto.value == 1.0
        assert not s.prima_facie

    def test_worked_example(self):
        # T=6, cause at {0,2}, effect at {1,3,5}: p = 2/2, marginal = 3/6
        t = _trace(c=[1, 0, 1, 0, 0, 0], e=[0, 1, 0, 1, 0, 1])
        s = prima_facie_test(t, Hypothesis(Atom("c"), Atom("e"), W11))
        assert s.p_leadsto.value == 1.0
        assert s.p_marginal.value == 0.5
        assert s.prima_facie

    def test_probability_raising_is_strict(self):
        # p_leadsto == p_marginal must not pass
        t = _trace(c=[1, 0, 1, 0], e=[0, 1, 0, 1])
        s = prima_facie_test(t, Hypothesis(Atom("c"), Atom("e"), W11))
        assert s.p_leadsto.value == 1.0
        assert s.prima_facie  # 1.0 > 0.5 here
        t2 = _trace(c=[1, 1, 1, 1], e=[1, 1, 1, 1])
        s2 = prima_facie_test(t2, Hypothesis(Atom("c"), Atom("e"), W11))
        assert s2.p_leadsto.value == s2.p_marginal.value == 1.0
        assert not s2.prima_facie


class TestEpsilonX:
    def test_tautological_covariate(self):
        rng = np.random.default_rng(5)
        cv = rng.random(60) < 0.5
        ev = rng.random(60) < 0.4
        t = trace_from_columns(
            {"c": cv.tolist(), "e": ev.tolist(), "x": [True] * 60}
        )
        c = Hypothesis(Atom("c"), Atom("e"), W11)
        x = Hypothesis(Atom("x"), Atom("e"), W11)
        got = epsilon_x(t, c, x, min_support=1)
        # conditioning on a tautology reduces to P(e|c) - P(e|not c)
        hits = oracle.window_hits({"c": cv.tolist(), "e": ev.tolist()}, Atom("e"), 1, 1)
        valid = list(range(59))
        p1 = np.mean([hits[u] for u in valid if cv[u]])
        p0 = np.mean([hits[u] for u in valid if not cv[u]])
        assert got == pytest.approx(p1 - p0)

    def test_identical_cause_and_covariate_is_undefined(self):
        t = _trace(c=[1, 0, 1, 0, 1, 0], e=[0, 1, 0, 1, 0, 1])
        c = Hypothesis(Atom("c"), Atom("e"), W11)
        assert epsilon_x(t, c, c, min_support=1) is None

    def test_mismatched_effects_rejected(self):
        t = _trace(c=[1, 0], x=[0, 1], e=[0, 1], f=[1, 0])
        with pytest.raises(ValueError, match="does not match"):
            epsilon_x(
                t,
                Hypothesis(Atom("c"), Atom("e"), W11),
                Hypothesis(Atom("x"), Atom("f"), W11),
            )

    def test_min_support_floor(self):
        # covariate true at two points only: cells below the default floor
        t = _trace(
            c=[1, 0, 1, 0, 1, 0, 1, 0],
            x=[1, 1, 0, 0, 0, 0, 0, 0],
            e=[0, 1, 0, 1, 0, 1, 0, 1],
        )
        c = Hypothesis(Atom("c"), Atom("e"), W11)
        x = Hypothesis(Atom("x"), Atom("e"), W11)
        assert epsilon_x(t, c, x) is None
        assert epsilon_x(t, c, x, min_support=1) is not None

    @given(st.data())
    @settings(max_examples=200, deadline=None)
    def test_matches_brute_force(self, data):
        T = data.draw(st.integers(6, 24))
        cols = {
            name: data.draw(
                st.lists(st.booleans(), min_size=T, max_size=T), label=name
            )
            for name in ("c", "x", "e")
        }
        lo = data.draw(st.integers(1, 3))
        hi = lo + data.draw(st.integers(0, 2))
        support = data.draw(st.integers(1, 4))
        t = trace_from_columns(cols)
        c = Hypothesis(Atom("c"), Atom("e"), WindowBound(lo, hi))
        x = Hypothesis(Atom("x"), Atom("e"), WindowBound(lo, hi))
        got = epsilon_x(t, c, x, min_support=support)
        want = oracle.epsilon_x_brute(
            cols, Atom("c"), Atom("x"), Atom("e"), lo, hi, support
        )
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want)


class TestEpsilonAvg:
    def _three_cause_trace(self):
        rng = np.random.default_rng(11)
        cols = {name: (rng.random(80) < 0.5).tolist() for name in ("c", "x1", "x2")}
        cols["e"] = (rng.random(80) < 0.4).tolist()
        return trace_from_columns(cols), cols

    def test_mean_of_defined_terms(self):
        t, _ = self._three_cause_trace()
        hyps = [Hypothesis(Atom(n), Atom("e"), W11) for n in ("c", "x1", "x2")]
        c = hyps[0]
        terms = [epsilon_x(t, c, x, min_support=1) for x in hyps[1:]]
        want = float(np.mean([v for v in terms if v is not None]))
        assert epsilon_avg(t, c, hyps, min_support=1) == pytest.approx(want)

    def test_requires_membership(self):
        t, _ = self._three_cause_trace()
        c = Hypothesis(Atom("c"), Atom("e"), W11)
        other = Hypothesis(Atom("x1"), Atom("e"), W11)
        with pytest.raises(ValueError, match="member"):
            epsilon_avg(t, c, [other])

    def test_sole_cause_returns_none(self):
        t, _ = self._three_cause_trace()
        c = Hypothesis(Atom("c"), Atom("e"), W11)
        assert epsilon_avg(t, c, [c]) is None

    def test_constant_terms(self):
        # all covariates identical: every defined epsilon_x equal, mean = value
        t, _ = self._three_cause_trace()
        hyps = [Hypothesis(Atom(n), Atom("e"), W11) for n in ("c", "x1")]
        v = epsilon_x(t, hyps[0], hyps[1], min_support=1)
        assert epsilon_avg(t, hyps[0], hyps, min_support=1) == pytest.approx(v)


class TestClassify:
    def _score(self, eps):
        h = Hypothesis(Atom("a"), Atom("b"), W11)
        from leadsto.checker import ProbEstimate

        return CausalScore(h, ProbEstimate(1, 2), ProbEstimate(1, 4), ProbEstimate(2, 4), True, eps)

    def test_zero_epsilon_keeps_everything(self):
        sig, insig = classify([self._score(0.0), self._score(-0.3)], 0.0)
        assert len(sig) == 2 and not insig

    def test_boundary_is_significant(self):
        sig, insig = classify([self._score(0.05)], 0.05)
        assert len(sig) == 1 and not insig

    def test_absolute_value(self):
        sig, insig = classify([self._score(-0.2), self._score(0.05)], 0.1)
        assert [s.epsilon_avg for s in sig] == [-0.2]
        assert [s.epsilon_avg for s in insig] == [0.05]

    def test_undefined_rejected(self):
        with pytest.raises(ValueError):
            classify([self._score(None)], 0.1)


class TestScoreHypotheses:
    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_vectorized_path_matches_reference(self, data):
        T = data.draw(st.integers(8, 30))
        n_vars = data.draw(st.integers(2, 4))
        rng_seed = data.draw(st.integers(0, 10_000))
        rng = np.random.default_rng(rng_seed)
        series = [
            RawSeries(f"V{i}", rng.normal(size=T).round(2)) for i in range(n_vars)
        ]
        trace = discretize(series)
        windows = [WindowBound(1, 1), WindowBound(2, 3)]
        hyps = generate_pairwise(trace, windows)
        support = data.draw(st.integers(1, 3))
        scores = score_hypotheses(trace, hyps, min_support=support)

        # group reference: prima facie causes per (effect, window)
        groups: dict[tuple, list[Hypothesis]] = {}
        ref_pf: dict[str, bool] = {}
        for h in hyps:
            s = prima_facie_test(trace, h)
            ref_pf[h.id] = s.prima_facie
            if s.prima_facie:
                groups.setdefault((h.effect, h.window), []).append(h)

        for s in scores:
            h = s.hypothesis
            assert s.prima_facie == ref_pf[h.id]
            if not s.prima_facie:
                assert s.epsilon_avg is None
                continue
            X = groups[(h.effect, h.window)]
            assert s.n_covariates == len(X) - 1
            if len(X) == 1:
                assert s.sole_cause
            else:
                want = epsilon_avg(trace, h, X, min_support=support)
                if want is None:
                    assert s.epsilon_avg is None
                else:
                    assert s.epsilon_avg == pytest.approx(want)

    def test_determinism(self):
        rng = np.random.default_rng(3)
        series = [RawSeries(f"V{i}", rng.normal(size=40)) for i in range(3)]
        trace = discretize(series)
        hyps = generate_pairwise(trace, [W11])
        a = score_hypotheses(trace, hyps)
        b = score_hypotheses(trace, hyps)
        assert [(s.hypothesis.id, s.epsilon_avg, s.prima_facie) for s in a] == [
            (s.hypothesis.id, s.epsilon_avg, s.prima_facie) for s in b
        ]

    def test_probability_raising_invariant(self):
        rng = np.random.default_rng(4)
        series = [RawSeries(f"V{i}", rng.normal(size=60)) for i in range(3)]
        trace = discretize(series)
        scores = score_hypotheses(trace, generate_pairwise(trace, [W11]))
        for s in scores:
            if s.prima_facie:
                assert s.p_leadsto.fraction > s.p_marginal.fraction

    def test_sole_cause_fallback_value(self):
        # one variable pair, cause is the only prima facie cause of its effect
        t = _trace(
            **{
                "X.up": [1, 0, 1, 0, 1, 0, 1, 0, 1, 0],
                "Y.up": [0, 1, 0, 1, 0, 1, 0, 1, 0, 0],
            }
        )
        t = Trace(t.atoms, t.truth, {"X.up": "X", "Y.up": "Y"})
        hyps = [Hypothesis(Atom("X.up"), Atom("Y.up"), W11)]
        scores = score_hypotheses(t, hyps, min_support=1)
        s = scores[0]
        assert s.prima_facie and s.sole_cause and s.n_covariates == 0
        # fallback is P(e|c) - P(e|not c) over the valid range
        hits = oracle.window_hits(
            {"Y.up": [False, True, False, True, False, True, False, True, False, False]},
            Atom("Y.up"),
            1,
            1,
        )
        cv = [True, False] * 5
        p1 = np.mean([hits[u] for u in range(9) if cv[u]])
        p0 = np.mean([hits[u] for u in range(9) if not cv[u]])
        assert s.epsilon_avg == pytest.approx(p1 - p0)
