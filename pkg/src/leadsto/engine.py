"""Candidate generation, the prima facie filter, and causal-significance scores.

A hypothesis is "cause leads to effect within a window". It is prima facie
when the cause occurs, the windowed conditional probability of the effect
is defined, and that probability strictly exceeds the effect's marginal.
The significance score epsilon_avg then averages, over every other prima
facie cause x of the same effect, the probability difference

    P(effect in window | cause and x)  -  P(effect in window | not cause and x),

where both conditioning events are read at the same time point and the
effect is looked for inside the scored cause's window. Conditioning cells
with fewer than ``min_support`` time points are treated as undefined and
skipped rather than zero-filled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .checker import ProbEstimate, _window_hit, estimate_leadsto, estimate_prob, sat
from .formula import Atom, Formula, WindowBound, print_formula
from .trace import Trace

DEFAULT_MIN_SUPPORT = 5


@dataclass(frozen=True)
class Hypothesis:
    """A leads-to candidate: cause precedes effect by a window with lo >= 1."""

    cause: Formula
    effect: Formula
    window: WindowBound

    def __post_init__(self):
        if self.window.lo < 1:
            raise ValueError("hypothesis windows must have lo >= 1")

    @property
    def id(self) -> str:
        hi = "inf" if self.window.unbounded else str(int(self.window.hi))
        return (
            f"{print_formula(self.cause)} ~>[{self.window.lo},{hi}] "
            f"{print_formula(self.effect)}"
        )


@dataclass
class CausalScore:
    """Scoring record for one hypothesis."""

    hypothesis: Hypothesis
    p_leadsto: ProbEstimate
    p_marginal: ProbEstimate
    p_cause: ProbEstimate
    prima_facie: bool
    epsilon_avg: float | None = None
    n_covariates: int = 0
    sole_cause: bool = False


def generate_pairwise(trace: Trace, windows: list[WindowBound]) -> list[Hypothesis]:
    """All ordered atom pairs across distinct variables, for every window.

    With V variables (two atoms each) and W windows this yields
    4 * V * (V-1) * W hypotheses, in deterministic trace-atom order.
    """
    if not windows:
        raise ValueError("at least one window is required")
    for w in windows:
        if w.lo < 1:
            raise ValueError(f"pairwise windows need lo >= 1, got [{w.lo},{w.hi}]")
    out: list[Hypothesis] = []
    for effect_atom in trace.atoms:
        for cause_atom in trace.atoms:
            if trace.variable_of(cause_atom) == trace.variable_of(effect_atom):
                continue
            for w in windows:
                out.append(Hypothesis(Atom(cause_atom), Atom(effect_atom), w))
    return out


def prima_facie_test(trace: Trace, h: Hypothesis) -> CausalScore:
    """Fill the prima facie fields of a score: occurrence, leads-to, raising."""
    p_cause = estimate_prob(trace, h.cause)
    p_leadsto = estimate_leadsto(trace, h.cause, h.effect, h.window)
    p_marginal = estimate_prob(trace, h.effect)
    cond1 = p_cause.numerator > 0
    cond2 = p_leadsto.defined
    cond3 = cond2 and p_marginal < p_leadsto
    return CausalScore(
        hypothesis=h,
        p_leadsto=p_leadsto,
        p_marginal=p_marginal,
        p_cause=p_cause,
        prima_facie=cond1 and cond2 and cond3,
    )


def _valid_range(T: int, lo: int) -> np.ndarray:
    """Time points whose window start exists: t + lo <= T-1."""
    return np.arange(T) + lo <= T - 1


def _cell_prob(hits: int, count: int, min_support: int) -> float | None:
    if count < max(min_support, 1):
        return None
    return hits / count


def epsilon_x(
    trace: Trace,
    c: Hypothesis,
    x: Hypothesis,
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> float | None:
    """P(e | c and x) - P(e | not-c and x) with e read inside c's window.

    The covariate contributes only its truth value at the conditioning
    time point; its own window is ignored. Returns None when either
    conditioning cell holds fewer than min_support points.
    """
    if x.effect != c.effect:
        raise ValueError(
            f"covariate effect {print_formula(x.effect)!r} does not match "
            f"{print_formula(c.effect)!r}"
        )
    cv = sat(trace, c.cause).values
    xv = sat(trace, x.cause).values
    ev = sat(trace, c.effect).values
    valid = _valid_range(trace.length, c.window.lo)
    hit = _window_hit(ev, c.window)

    both = cv & xv & valid
    notc = ~cv & xv & valid
    p1 = _cell_prob(int((both & hit).sum()), int(both.sum()), min_support)
    p0 = _cell_prob(int((notc & hit).sum()), int(notc.sum()), min_support)
    if p1 is None or p0 is None:
        return None
    return p1 - p0


def epsilon_avg(
    trace: Trace,
    c: Hypothesis,
    X: list[Hypothesis],
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> float | None:
    """Mean of the defined epsilon_x terms over X minus c itself.

    None when c has no covariates at all or when every term is undefined;
    the sole-cause fallback is applied by score_hypotheses, not here.
    """
    if c not in X:
        raise ValueError("the scored cause must be a member of its own covariate set")
    terms = [
        v
        for x in X
        if x != c
        for v in [epsilon_x(trace, c, x, min_support)]
        if v is not None
    ]
    if not terms:
        return None
    return float(np.mean(terms))


def _sole_cause_fallback(
    cv: np.ndarray, hit: np.ndarray, valid: np.ndarray, min_support: int
) -> float | None:
    """P(e|c) - P(e|not c), used when a cause has no prima facie peers."""
    pos = cv & valid
    neg = ~cv & valid
    p1 = _cell_prob(int((pos & hit).sum()), int(pos.sum()), min_support)
    p0 = _cell_prob(int((neg & hit).sum()), int(neg.sum()), min_support)
    if p1 is None or p0 is None:
        return None
    return p1 - p0


def _score_group(
    scores: list[CausalScore],
    sat_cache: dict[str, np.ndarray],
    effect_v: np.ndarray,
    min_support: int,
) -> None:
    """Fill epsilon_avg for the prima facie members of one (effect, window) group.

    All members share the effect and window, so a single within-window hit
    vector serves the whole group and the pairwise conditional counts
    reduce to two boolean matrix products.
    """
    pf = [s for s in scores if s.prima_facie]
    for s in scores:
        if s.prima_facie:
            s.n_covariates = len(pf) - 1
    if not pf:
        return
    window = pf[0].hypothesis.window
    T = effect_v.shape[0]
    valid = _valid_range(T, window.lo)
    hit = _window_hit(effect_v, window)[valid]

    C = np.vstack([sat_cache[print_formula(s.hypothesis.cause)][valid] for s in pf])
    Cf = C.astype(np.float64)
    hf = hit.astype(np.float64)

    if len(pf) == 1:
        s = pf[0]
        s.sole_cause = True
        s.epsilon_avg = _sole_cause_fallback(C[0], hit, np.ones_like(hit, bool), min_support)
        return

    pair_count = Cf @ Cf.T                    # [i,j] = #{t: c_i & c_j}
    pair_hits = (Cf * hf) @ Cf.T              # [i,j] = #{t: c_i & c_j & hit}
    col_count = Cf.sum(axis=1)                # [j]   = #{t: c_j}
    col_hits = Cf @ hf                        # [j]   = #{t: c_j & hit}

    floor = max(min_support, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p_with = pair_hits / pair_count
        p_without = (col_hits[None, :] - pair_hits) / (col_count[None, :] - pair_count)
    defined = (pair_count >= floor) & ((col_count[None, :] - pair_count) >= floor)
    np.fill_diagonal(defined, False)
    eps = np.where(defined, p_with - p_without, 0.0)

    n_defined = defined.sum(axis=1)
    totals = eps.sum(axis=1)
    for i, s in enumerate(pf):
        s.epsilon_avg = float(totals[i] / n_defined[i]) if n_defined[i] > 0 else None


def score_hypotheses(
    trace: Trace,
    hypotheses: list[Hypothesis],
    min_support: int = DEFAULT_MIN_SUPPORT,
    pool_windows: bool = False,
) -> list[CausalScore]:
    """Prima facie test plus epsilon_avg for every hypothesis.

    Covariate sets group by (effect, window); pool_windows widens them to
    all windows of the same effect, in which case each scored cause still
    uses its own window for the effect lookup. Output order matches input
    order and is deterministic.
    """
    sat_cache: dict[str, np.ndarray] = {}
    effect_cache: dict[str, np.ndarray] = {}
    for h in hypotheses:
        ck = print_formula(h.cause)
        if ck not in sat_cache:
            sat_cache[ck] = sat(trace, h.cause).values
        ek = print_formula(h.effect)
        if ek not in effect_cache:
            effect_cache[ek] = sat(trace, h.effect).values

    T = trace.length
    scores: list[CausalScore] = []
    for h in hypotheses:
        cv = sat_cache[print_formula(h.cause)]
        ev = effect_cache[print_formula(h.effect)]
        valid = _valid_range(T, h.window.lo)
        hits = _window_hit(ev, h.window)
        den = int((cv & valid).sum())
        num = int((cv & valid & hits).sum())
        p_leadsto = ProbEstimate(num, den)
        p_marginal = ProbEstimate(int(ev.sum()), T)
        p_cause = ProbEstimate(int(cv.sum()), T)
        pf = (
            p_cause.numerator > 0
            and p_leadsto.defined
            and p_marginal < p_leadsto
        )
        scores.append(CausalScore(h, p_leadsto, p_marginal, p_cause, pf))

    groups: dict[tuple, list[CausalScore]] = {}
    for s in scores:
        ek = print_formula(s.hypothesis.effect)
        key = (ek,) if pool_windows else (ek, s.hypothesis.window)
        groups.setdefault(key, []).append(s)

    for key, members in groups.items():
        ev = effect_cache[key[0]]
        if pool_windows and len({m.hypothesis.window for m in members}) > 1:
            _score_group_mixed(members, sat_cache, ev, min_support)
        else:
            _score_group(members, sat_cache, ev, min_support)
    return scores


def _score_group_mixed(
    scores: list[CausalScore],
    sat_cache: dict[str, np.ndarray],
    effect_v: np.ndarray,
    min_support: int,
) -> None:
    """Pooled-window grouping: each cause keeps its own window for the effect
    lookup while covariates contribute state-at-t truth only."""
    pf = [s for s in scores if s.prima_facie]
    for s in scores:
        if s.prima_facie:
            s.n_covariates = len(pf) - 1
    if not pf:
        return
    T = effect_v.shape[0]
    floor = max(min_support, 1)
    vectors = [sat_cache[print_formula(s.hypothesis.cause)] for s in pf]
    for i, s in enumerate(pf):
        window = s.hypothesis.window
        valid = _valid_range(T, window.lo)
        hit = _window_hit(effect_v, window)
        cv = vectors[i]
        if len(pf) == 1:
            s.sole_cause = True
            s.epsilon_avg = _sole_cause_fallback(cv, hit & valid, valid, min_support)
            return
        terms: list[float] = []
        for j, x in enumerate(pf):
            if j == i:
                continue
            xv = vectors[j]
            both = cv & xv & valid
            notc = ~cv & xv & valid
            p1 = _cell_prob(int((both & hit).sum()), int(both.sum()), floor)
            p0 = _cell_prob(int((notc & hit).sum()), int(notc.sum()), floor)
            if p1 is not None and p0 is not None:
                terms.append(p1 - p0)
        s.epsilon_avg = float(np.mean(terms)) if terms else None


def classify(
    scores: list[CausalScore], epsilon: float
) -> tuple[list[CausalScore], list[CausalScore]]:
    """Partition scored causes: insignificant iff |epsilon_avg| < epsilon."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    significant: list[CausalScore] = []
    insignificant: list[CausalScore] = []
    for s in scores:
        if s.epsilon_avg is None:
            raise ValueError(f"cannot classify undefined score for {s.hypothesis.id}")
        (insignificant if abs(s.epsilon_avg) < epsilon else significant).append(s)
    return significant, insignificant


def save_scores_csv(scores: list[CausalScore], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "cause",
                "effect",
                "window_lo",
                "window_hi",
                "p_leadsto",
                "p_marginal",
                "prima_facie",
                "epsilon_avg",
                "n_covariates",
                "sole_cause",
            ]
        )
        for s in scores:
            h = s.hypothesis
            hi = "inf" if h.window.unbounded else int(h.window.hi)
            writer.writerow(
                [
                    print_formula(h.cause),
                    print_formula(h.effect),
                    h.window.lo,
                    hi,
                    "" if s.p_leadsto.value is None else f"{s.p_leadsto.value:.10g}",
                    f"{s.p_marginal.value:.10g}",
                    int(s.prima_facie),
                    "" if s.epsilon_avg is None else f"{s.epsilon_avg:.10g}",
                    s.n_covariates,
                    int(s.sole_cause),
                ]
            )
