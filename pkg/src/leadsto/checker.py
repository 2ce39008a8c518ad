"""Trace semantics for the formula language and frequency-based probabilities.

Satisfaction is pointwise over a single trace. Windows that extend past the
end of the trace are truncated: the operator is evaluated over whatever
suffix exists. Probabilities are kept as exact integer counts; comparisons
between them are exact (no floating-point rounding until export).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .formula import (
    And,
    Atom,
    Finally,
    Formula,
    Not,
    Or,
    Until,
    WindowBound,
    atoms,
    contains_leadsto,
    contains_prob_bound,
)
from .trace import Trace


@dataclass(frozen=True)
class SatVector:
    """Truth of a formula at every time point of one trace."""

    formula: Formula
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=bool)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ProbEstimate:
    """A relative frequency as an exact count pair; undefined when denominator is 0."""

    numerator: int
    denominator: int

    def __post_init__(self):
        if not 0 <= self.numerator <= max(self.denominator, 0):
            raise ValueError(
                f"invalid count pair {self.numerator}/{self.denominator}"
            )

    @property
    def defined(self) -> bool:
        return self.denominator > 0

    @property
    def value(self) -> float | None:
        if not self.defined:
            return None
        return self.numerator / self.denominator

    @property
    def fraction(self) -> Fraction | None:
        if not self.defined:
            return None
        return Fraction(self.numerator, self.denominator)

    def __lt__(self, other: "ProbEstimate") -> bool:
        if not (self.defined and other.defined):
            raise ValueError("cannot compare undefined probability estimates")
        # exact cross-multiplied comparison
        return self.numerator * other.denominator < other.numerator * self.denominator


def _first_true_at_or_after(values: np.ndarray) -> np.ndarray:
    """next_true[t] = smallest u >= t with values[u], or T when none exists."""
    T = values.shape[0]
    idx = np.where(values, np.arange(T, dtype=np.int64), T)
    next_true = np.empty(T + 1, dtype=np.int64)
    next_true[T] = T
    next_true[:T] = np.minimum.accumulate(idx[::-1])[::-1]
    return next_true


def _true_run_length(values: np.ndarray) -> np.ndarray:
    """run[t] = number of consecutive True cells starting at t."""
    T = values.shape[0]
    next_false = _first_true_at_or_after(~values)
    return next_false[:T] - np.arange(T, dtype=np.int64)


def _until(window: WindowBound, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """left U[lo,hi] right at t: some u in [t+lo, min(t+hi, T-1)] has right[u]
    with left holding on [t, u)."""
    T = right.shape[0]
    last = T - 1
    t = np.arange(T)
    starts = t + window.lo
    caps = np.full(T, last, dtype=np.int64)
    if not window.unbounded:
        caps = np.minimum(caps, t + int(window.hi))
    # the left conjunct limits how far u may sit past t
    caps = np.minimum(caps, t + _true_run_length(left)[:T])
    next_right = _first_true_at_or_after(right)
    candidate = next_right[np.minimum(starts, T)]
    return (starts <= last) & (candidate <= caps)


def _window_hit(effect: np.ndarray, window: WindowBound) -> np.ndarray:
    """hit[t]: effect true somewhere in [t+lo, min(t+hi, T-1)] (truncated)."""
    T = effect.shape[0]
    last = T - 1
    t = np.arange(T)
    starts = t + window.lo
    caps = np.full(T, last, dtype=np.int64)
    if not window.unbounded:
        caps = np.minimum(caps, t + int(window.hi))
    next_eff = _first_true_at_or_after(effect)
    candidate = next_eff[np.minimum(starts, T)]
    return (starts <= last) & (candidate <= caps)


def _eval(trace: Trace, f: Formula) -> np.ndarray:
    if isinstance(f, Atom):
        return trace.column(f.name)
    if isinstance(f, Not):
        return ~_eval(trace, f.child)
    if isinstance(f, And):
        return _eval(trace, f.left) & _eval(trace, f.right)
    if isinstance(f, Or):
        return _eval(trace, f.left) | _eval(trace, f.right)
    if isinstance(f, Until):
        return _until(f.window, _eval(trace, f.left), _eval(trace, f.right))
    if isinstance(f, Finally):
        return _window_hit(_eval(trace, f.child), WindowBound(0, f.hi))
    raise ValueError(f"cannot evaluate node of type {type(f).__name__}")


def _check_state_formula(trace: Trace, f: Formula) -> None:
    if contains_leadsto(f):
        raise ValueError("leads-to cannot be nested inside a checkable formula")
    if contains_prob_bound(f):
        raise ValueError("probability bounds are measured, not checked; strip them first")
    missing = sorted(a for a in atoms(f) if a not in trace.atom_variables)
    if missing:
        raise KeyError(f"unknown atoms in formula: {', '.join(missing)}")


def sat(trace: Trace, f: Formula) -> SatVector:
    """Pointwise satisfaction of a leads-to-free, bound-free formula."""
    _check_state_formula(trace, f)
    return SatVector(f, _eval(trace, f))


def estimate_prob(trace: Trace, f: Formula) -> ProbEstimate:
    """Marginal frequency of a state formula: #satisfying points / T."""
    vec = sat(trace, f)
    return ProbEstimate(int(vec.values.sum()), trace.length)


def estimate_leadsto(
    trace: Trace, cause: Formula, effect: Formula, window: WindowBound
) -> ProbEstimate:
    """Frequency with which effect follows cause within the window.

    Counts only time points whose window start exists (t + lo <= T-1);
    windows are truncated at the end of the trace. The estimate is
    undefined (denominator 0) when the cause never occurs early enough.
    """
    if window.lo < 1:
        raise ValueError("leads-to requires a window with lo >= 1")
    cause_v = sat(trace, cause).values
    effect_v = sat(trace, effect).values
    T = trace.length
    valid = np.arange(T) + window.lo <= T - 1
    hits = _window_hit(effect_v, window)
    denominator = int((cause_v & valid).sum())
    numerator = int((cause_v & valid & hits).sum())
    return ProbEstimate(numerator, denominator)


def sat_matrix(trace: Trace, formulas: list[Formula]) -> np.ndarray:
    """Stack sat vectors for several formulas into a (len(formulas), T) matrix."""
    return np.vstack([sat(trace, f).values for f in formulas])


def save_satvectors_csv(vectors: list[SatVector], path) -> None:
    """Debug export of satisfaction vectors as 0/1 columns."""
    import csv

    from .formula import print_formula

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([print_formula(v.formula) for v in vectors])
        for row in np.column_stack([v.values for v in vectors]).astype(int):
            writer.writerow(row.tolist())
