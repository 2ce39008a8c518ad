"""Shared hypothesis strategies for formulas and small traces."""

from __future__ import annotations

import math

import numpy as np
from hypothesis import strategies as st

from leadsto.formula import (
    And,
    Atom,
    Finally,
    LeadsTo,
    Not,
    Or,
    ProbBound,
    Until,
    WindowBound,
)
from leadsto.trace import Trace

ATOM_NAMES = ("a", "b", "c", "d")

atom_st = st.sampled_from(ATOM_NAMES).map(Atom)


def window_st(min_lo: int = 0) -> st.SearchStrategy[WindowBound]:
    return st.integers(min_lo, 3).flatmap(
        lambda lo: st.one_of(
            st.integers(lo, 5).map(lambda hi: WindowBound(lo, hi)),
            st.just(WindowBound(lo, math.inf)),
        )
    )


bound_st = st.one_of(
    st.none(),
    st.builds(
        ProbBound,
        st.sampled_from([">=", ">", "<=", "<"]),
        st.floats(0, 1, allow_nan=False).map(lambda p: round(p, 3)),
    ),
)


def formulas(
    max_depth: int = 3, allow_leadsto: bool = False, allow_bounds: bool = False
) -> st.SearchStrategy:
    maybe_bound = bound_st if allow_bounds else st.none()

    def extend(children):
        options = [
            st.builds(Not, children),
            st.builds(And, children, children),
            st.builds(Or, children, children),
            st.builds(Until, window_st(0), children, children, maybe_bound),
            st.builds(
                lambda hi, child, bound: Finally(hi, child, bound),
                st.one_of(st.integers(0, 5), st.just(math.inf)),
                children,
                maybe_bound,
            ),
        ]
        if allow_leadsto:
            options.append(
                st.builds(LeadsTo, window_st(1), children, children, maybe_bound)
            )
        return st.one_of(options)

    strat = atom_st
    for _ in range(max_depth):
        strat = st.one_of(atom_st, extend(strat))
    return strat


# leads-to-free, bound-free state formulas for checker tests
state_formulas = formulas(max_depth=3)


@st.composite
def trace_columns(draw, max_len: int = 50, atoms: tuple[str, ...] = ATOM_NAMES):
    length = draw(st.integers(1, max_len))
    cols = {
        name: draw(st.lists(st.booleans(), min_size=length, max_size=length))
        for name in atoms
    }
    return cols


def trace_from_columns(cols: dict[str, list[bool]]) -> Trace:
    names = tuple(cols)
    return Trace(names, np.column_stack([np.array(cols[n], dtype=bool) for n in names]))
