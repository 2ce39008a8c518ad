"""Batch entry point: simulate, infer, granger, evaluate.

Every command writes a run_config.json echoing all resolved parameters
next to its outputs. Exit codes: 0 success, 2 usage errors (argparse),
3 data or numerical errors, 4 success with numerical-fallback warnings
(for example an empirical null that was refused or judged unreliable).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import evaluate as ev
from . import fdr as fdrmod
from . import simulate as sim
from .engine import (
    CausalScore,
    DEFAULT_MIN_SUPPORT,
    Hypothesis,
    generate_pairwise,
    save_scores_csv,
    score_hypotheses,
)
from .formula import Atom, LeadsTo, WindowBound, load_formulas
from .granger import GrangerResult, granger_all_pairs, save_granger_csv
from .trace import DiscretizationRule, RawSeries, Trace, discretize, load_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_WARNINGS = 4


# ---------------------------------------------------------------------------
# Library-level pipeline (used by the commands and directly by tests)
# ---------------------------------------------------------------------------


@dataclass
class InferenceResult:
    hypotheses: list[Hypothesis]
    scores: list[CausalScore]
    report: fdrmod.FdrReport
    relations: set[ev.Relation]
    skipped: int = 0  # significant hypotheses with no pairwise relation form


def relation_of(h: Hypothesis, trace: Trace) -> ev.Relation | None:
    """Map an atom-pair hypothesis to a (source, target, delta, sign) relation.

    Only hypotheses whose cause and effect are single atoms have a relation
    form; delta is the window start. Signs read the .up/.down suffixes.
    """
    if not (isinstance(h.cause, Atom) and isinstance(h.effect, Atom)):
        return None
    source = trace.variable_of(h.cause.name)
    target = trace.variable_of(h.effect.name)
    if source == target:
        return None
    cdir = h.cause.name.rsplit(".", 1)[-1]
    edir = h.effect.name.rsplit(".", 1)[-1]
    if cdir in ("up", "down") and edir in ("up", "down"):
        sign = "+" if cdir == edir else "-"
    else:
        sign = "any"
    return ev.Relation(source, target, h.window.lo, sign)


def run_inference(
    trace: Trace,
    windows: list[WindowBound],
    threshold: float = fdrmod.DEFAULT_THRESHOLD,
    null_mode: str = "empirical",
    manual_z: float | None = None,
    manual_epsilon: float | None = None,
    min_support: int = DEFAULT_MIN_SUPPORT,
    pool_windows: bool = False,
    hypotheses: list[Hypothesis] | None = None,
    bins: int = fdrmod.DEFAULT_BINS,
    poly_degree: int = fdrmod.DEFAULT_POLY_DEGREE,
    central_halfwidth: float = fdrmod.DEFAULT_CENTRAL_HALFWIDTH,
) -> InferenceResult:
    """Hypotheses -> prima facie -> epsilon_avg -> z -> fdr -> relations."""
    if hypotheses is None:
        hypotheses = generate_pairwise(trace, windows)
    scores = score_hypotheses(
        trace, hypotheses, min_support=min_support, pool_windows=pool_windows
    )
    defined = [s for s in scores if s.epsilon_avg is not None]
    report = fdrmod.analyze(
        [s.hypothesis.id for s in defined],
        [s.epsilon_avg for s in defined],
        threshold=threshold,
        null_mode=null_mode,
        bins=bins,
        poly_degree=poly_degree,
        central_halfwidth=central_halfwidth,
        manual_z=manual_z,
        manual_epsilon=manual_epsilon,
    )
    by_id = {s.hypothesis.id: s.hypothesis for s in defined}
    relations: set[ev.Relation] = set()
    skipped = 0
    for hyp_id in report.significant_ids():
        rel = relation_of(by_id[hyp_id], trace)
        if rel is None:
            skipped += 1
        else:
            relations.add(rel)
    return InferenceResult(hypotheses, scores, report, relations, skipped)


def run_granger(
    series: list[RawSeries],
    lags: list[int],
    threshold: float = fdrmod.DEFAULT_THRESHOLD,
    null_mode: str = "theoretical",
    stepup_q: float | None = None,
) -> tuple[list[GrangerResult], fdrmod.FdrReport, set[ev.Relation], np.ndarray | None]:
    """All-pairs tests at each lag, pooled into one fdr computation.

    Granger p-values carry an exact uniform null, so the default null mode
    is theoretical; the empirical mode stays available for comparison.
    Optionally also computes Benjamini-Hochberg step-up rejections at
    level stepup_q as a cross-check.
    """
    results: list[GrangerResult] = []
    for lag in lags:
        results.extend(granger_all_pairs(series, lag))
    ids = [f"{r.source}->{r.target}@{r.lag}" for r in results]
    pvals = [r.p_value for r in results]
    table = fdrmod.pvalues_to_zvalues(ids, pvals)
    report = fdrmod.analyze(
        ids,
        table.z,
        threshold=threshold,
        null_mode=null_mode,
        prestandardized=True,
    )
    relations = {
        ev.Relation(r.source, r.target, r.lag, "any")
        for r, flag in zip(results, report.significant)
        if flag
    }
    stepup = fdrmod.bh_stepup(pvals, stepup_q) if stepup_q is not None else None
    return results, report, relations, stepup


# ---------------------------------------------------------------------------
# Command helpers
# ---------------------------------------------------------------------------


def _echo_config(args: argparse.Namespace, outdir: str) -> None:
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "run_config.json"), "w", encoding="utf-8") as fh:
        json.dump({"command": args.command, "config": resolved}, fh, indent=2, default=str)
        fh.write("\n")


def _windows_from_lags(lags: list[int]) -> list[WindowBound]:
    if not lags:
        raise ValueError("at least one lag is required")
    return [WindowBound(lag, lag) for lag in lags]


def _load_hypotheses(path, trace: Trace, default_windows: list[WindowBound]) -> list[Hypothesis]:
    out: list[Hypothesis] = []
    for f in load_formulas(path):
        if not isinstance(f, LeadsTo):
            raise ValueError(
                f"hypothesis file lines must be leads-to formulas, got: {f!r}"
            )
        out.append(Hypothesis(f.cause, f.effect, f.window))
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = sim.SimSpec(
        scenario=args.scenario,
        n_portfolios=args.portfolios,
        n_days=args.days,
        n_factors=args.factors,
        base_lag=args.base_lag,
        alt_lag=args.alt_lag,
        n_dependencies=args.dependencies,
        zero_betas=args.zero_betas,
        residual_sd=args.residual_sd,
        residual_correlation=args.residual_correlation,
        factor_correlation=args.factor_correlation,
        seed=args.seed,
        factor_csv=args.factor_csv,
    )
    if args.two_periods:
        first, second = sim.two_periods(spec)
        sim.save_outputs(first, args.out, prefix="period1_")
        sim.save_outputs(second, args.out, prefix="period2_")
    else:
        sim.save_outputs(sim.simulate(spec), args.out)
    _echo_config(args, args.out)
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    series = load_csv(args.returns)
    trace = discretize(series, DiscretizationRule(args.theta))
    windows = _windows_from_lags(args.lags)
    hypotheses = (
        _load_hypotheses(args.hypotheses, trace, windows) if args.hypotheses else None
    )
    result = run_inference(
        trace,
        windows,
        threshold=args.fdr_threshold,
        null_mode=args.null_mode,
        manual_z=args.manual_z,
        manual_epsilon=args.manual_epsilon,
        min_support=args.min_support,
        pool_windows=args.pool_windows,
        hypotheses=hypotheses,
        bins=args.bins,
        poly_degree=args.poly_degree,
        central_halfwidth=args.central_halfwidth,
    )
    os.makedirs(args.out, exist_ok=True)
    save_scores_csv(result.scores, os.path.join(args.out, "scores.csv"))
    fdrmod.save_report_csv(result.report, os.path.join(args.out, "fdr_report.csv"))
    if result.report.mixture is not None:
        fdrmod.save_density_csv(result.report, os.path.join(args.out, "fdr_density.csv"))
    fdrmod.save_summary_json(result.report, os.path.join(args.out, "fdr_summary.json"))
    ev.save_relations_csv(result.relations, os.path.join(args.out, "relations.csv"))
    _echo_config(args, args.out)
    print(
        f"{len(result.scores)} hypotheses, {result.report.n_significant} significant, "
        f"{len(result.relations)} relations"
    )
    for w in result.report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_WARNINGS if result.report.warnings else EXIT_OK


def cmd_granger(args: argparse.Namespace) -> int:
    series = load_csv(args.returns)
    results, report, relations, stepup = run_granger(
        series,
        args.lags,
        threshold=args.fdr_threshold,
        null_mode=args.null_mode,
        stepup_q=args.stepup_q,
    )
    os.makedirs(args.out, exist_ok=True)
    save_granger_csv(results, os.path.join(args.out, "granger.csv"))
    fdrmod.save_report_csv(report, os.path.join(args.out, "fdr_report.csv"))
    fdrmod.save_summary_json(report, os.path.join(args.out, "fdr_summary.json"))
    ev.save_relations_csv(relations, os.path.join(args.out, "relations.csv"))
    if stepup is not None:
        with open(os.path.join(args.out, "stepup.csv"), "w", encoding="utf-8") as fh:
            fh.write("test,rejected\n")
            for r, flag in zip(results, stepup):
                fh.write(f"{r.source}->{r.target}@{r.lag},{int(flag)}\n")
    _echo_config(args, args.out)
    print(f"{len(results)} tests, {report.n_significant} significant")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_WARNINGS if report.warnings else EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    truth = ev.load_relations_csv(args.truth)
    founds = [ev.load_relations_csv(p) for p in args.found]
    rows: list[dict] = []
    for path, found in zip(args.found, founds):
        m = ev.score(found, truth, signed=args.signed)
        rows.append({"set": os.path.basename(path), **m.__dict__})
    if len(founds) == 2:
        ratios = ev.overlap_ratios(founds[0], founds[1])
        cons = ev.consensus(founds[0], founds[1])
        m = ev.score(cons, truth, signed=args.signed)
        rows.append(
            {"set": "consensus", **m.__dict__, "intersection": ratios["jaccard"]}
        )
        print(
            f"intersection: jaccard={ratios['jaccard']:.4f} "
            f"of-first={ratios['share_of_first']:.4f} "
            f"of-second={ratios['share_of_second']:.4f}"
        )
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "metrics.csv"), "w", newline="", encoding="utf-8") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["set", "tp", "fp", "fn", "fdr", "fnr", "intersection"])
        for row in rows:
            writer.writerow(
                [
                    row["set"],
                    row["tp"],
                    row["fp"],
                    row["fn"],
                    f"{row['fdr']:.6g}",
                    f"{row['fnr']:.6g}",
                    "" if row.get("intersection") is None else f"{row['intersection']:.6g}",
                ]
            )
    for row in rows:
        print(
            f"{row['set']}: tp={row['tp']} fp={row['fp']} fn={row['fn']} "
            f"fdr={row['fdr']:.4f} fnr={row['fnr']:.4f}"
        )
    _echo_config(args, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leadsto",
        description="Temporal-logic causal inference over time series, with "
        "a factor-model simulator and a Granger baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic return dataset")
    p_sim.add_argument("--scenario", required=True, choices=list(sim.SCENARIOS))
    p_sim.add_argument("--portfolios", type=int, default=25)
    p_sim.add_argument("--days", type=int, default=3001)
    p_sim.add_argument("--factors", type=int, default=3)
    p_sim.add_argument("--base-lag", type=int, default=3)
    p_sim.add_argument("--alt-lag", type=int, default=1)
    p_sim.add_argument("--dependencies", type=int, default=3)
    p_sim.add_argument("--zero-betas", action="store_true")
    p_sim.add_argument("--residual-sd", type=float, default=0.008)
    p_sim.add_argument("--residual-correlation", type=float, default=0.1)
    p_sim.add_argument("--factor-correlation", type=float, default=0.1)
    p_sim.add_argument("--factor-csv", default=None, help="use real factor series")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--two-periods", action="store_true")
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_inf = sub.add_parser("infer", help="run the causal inference pipeline")
    p_inf.add_argument("--returns", required=True)
    p_inf.add_argument("--lags", type=int, nargs="+", default=[1, 2, 3])
    p_inf.add_argument("--theta", type=float, default=0.0, help="discretization threshold")
    p_inf.add_argument("--fdr-threshold", type=float, default=0.01)
    p_inf.add_argument("--null-mode", choices=["empirical", "theoretical"], default="empirical")
    p_inf.add_argument("--manual-z", type=float, default=None)
    p_inf.add_argument("--manual-epsilon", type=float, default=None)
    p_inf.add_argument("--min-support", type=int, default=DEFAULT_MIN_SUPPORT)
    p_inf.add_argument("--pool-windows", action="store_true")
    p_inf.add_argument("--hypotheses", default=None, help="explicit hypothesis file")
    p_inf.add_argument("--bins", type=int, default=fdrmod.DEFAULT_BINS)
    p_inf.add_argument("--poly-degree", type=int, default=fdrmod.DEFAULT_POLY_DEGREE)
    p_inf.add_argument(
        "--central-halfwidth", type=float, default=fdrmod.DEFAULT_CENTRAL_HALFWIDTH
    )
    p_inf.add_argument("--out", required=True)
    p_inf.set_defaults(func=cmd_infer)

    p_gr = sub.add_parser("granger", help="run the Granger-causality baseline")
    p_gr.add_argument("--returns", required=True)
    p_gr.add_argument("--lags", type=int, nargs="+", default=[1, 2, 3])
    p_gr.add_argument("--fdr-threshold", type=float, default=0.01)
    p_gr.add_argument("--null-mode", choices=["empirical", "theoretical"], default="theoretical")
    p_gr.add_argument("--stepup-q", type=float, default=None, help="also run BH step-up")
    p_gr.add_argument("--out", required=True)
    p_gr.set_defaults(func=cmd_granger)

    p_ev = sub.add_parser("evaluate", help="score relation sets against ground truth")
    p_ev.add_argument("--found", nargs="+", required=True, help="one or two relation CSVs")
    p_ev.add_argument("--truth", required=True)
    p_ev.add_argument("--signed", action="store_true")
    p_ev.add_argument("--out", required=True)
    p_ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "evaluate" and len(args.found) > 2:
        parser.error("--found takes one or two relation CSVs")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
