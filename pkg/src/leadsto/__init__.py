"""Temporal-logic causal inference for multivariate time series.

Hypotheses of the form "cause leads to effect within a time window" are
checked against discretized traces, scored by the average probability
difference they make to their effect given the other candidate causes,
and separated from noise with an empirical-null local false discovery
rate. Ships with a factor-model market simulator and a Granger-causality
baseline for head-to-head evaluation.
"""

from .checker import ProbEstimate, SatVector, estimate_leadsto, estimate_prob, sat
from .engine import (
    CausalScore,
    Hypothesis,
    classify,
    epsilon_avg,
    epsilon_x,
    generate_pairwise,
    prima_facie_test,
    score_hypotheses,
)
from .evaluate import Metrics, Relation, consensus, intersection, score
from .fdr import (
    FdrReport,
    ZTable,
    analyze,
    fit_empirical_null,
    fit_mixture,
    local_fdr,
    threshold_from_fdr,
    to_zvalues,
)
from .formula import (
    And,
    Atom,
    Finally,
    Formula,
    FormulaSyntaxError,
    LeadsTo,
    Not,
    Or,
    ProbBound,
    Until,
    WindowBound,
    parse,
    print_formula,
)
from .granger import GrangerResult, granger_all_pairs, granger_test
from .simulate import GroundTruth, SimOutput, SimSpec, simulate, two_periods
from .trace import DiscretizationRule, RawSeries, Trace, discretize, load_csv

__version__ = "0.1.0"

__all__ = [
    "And",
    "Atom",
    "CausalScore",
    "DiscretizationRule",
    "FdrReport",
    "Finally",
    "Formula",
    "FormulaSyntaxError",
    "GrangerResult",
    "GroundTruth",
    "Hypothesis",
    "LeadsTo",
    "Metrics",
    "Not",
    "Or",
    "ProbBound",
    "ProbEstimate",
    "RawSeries",
    "Relation",
    "SatVector",
    "SimOutput",
    "SimSpec",
    "Trace",
    "Until",
    "WindowBound",
    "ZTable",
    "analyze",
    "classify",
    "consensus",
    "discretize",
    "epsilon_avg",
    "epsilon_x",
    "estimate_leadsto",
    "estimate_prob",
    "fit_empirical_null",
    "fit_mixture",
    "generate_pairwise",
    "granger_all_pairs",
    "granger_test",
    "intersection",
    "load_csv",
    "local_fdr",
    "parse",
    "prima_facie_test",
    "print_formula",
    "sat",
    "score",
    "score_hypotheses",
    "simulate",
    "threshold_from_fdr",
    "to_zvalues",
    "two_periods",
]
