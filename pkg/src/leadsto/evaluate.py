"""Relation sets, discovery metrics, and cross-period consistency.

A relation is (source variable, target variable, delta) with an optional
sign. Scoring against ground truth ignores the sign: a discovery matches
when source, target, and delta agree, because the baseline method cannot
report signs at all. The sign-sensitive variant is available separately.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

SIGNS = ("+", "-", "any")


@dataclass(frozen=True, order=True)
class Relation:
    source: str
    target: str
    delta: int
    sign: str = "any"

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("relations must have delta >= 1")
        if self.source == self.target:
            raise ValueError("self-relations are not allowed")
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {SIGNS}, got {self.sign!r}")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.source, self.target, self.delta)


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    fdr: float
    fnr: float
    intersection: float | None = None


def project(relations: set[Relation]) -> set[tuple[str, str, int]]:
    """Drop signs, keeping (source, target, delta) keys."""
    return {r.key for r in relations}


def score(found: set[Relation], truth: set[Relation], signed: bool = False) -> Metrics:
    """Count discoveries against ground truth.

    Unsigned (default): a found relation is a true positive when its
    (source, target, delta) key appears in truth. Signed: additionally the
    truth sign must be 'any' or equal to the found sign. Conventions:
    fdr = 0 with no discoveries, fnr = 0 with empty truth.
    """
    if signed:
        truth_signs: dict[tuple, set[str]] = {}
        for r in truth:
            truth_signs.setdefault(r.key, set()).add(r.sign)

        def matches(r: Relation) -> bool:
            signs = truth_signs.get(r.key)
            return signs is not None and ("any" in signs or r.sign in signs)

        found_keys_hit = {r.key for r in found if matches(r)}
        tp = len(found_keys_hit)
        fp = len({r.key for r in found}) - tp
        fn = len({r.key for r in truth} - found_keys_hit)
    else:
        fkeys = project(found)
        tkeys = project(truth)
        tp = len(fkeys & tkeys)
        fp = len(fkeys - tkeys)
        fn = len(tkeys - fkeys)
    fdr = fp / (fp + tp) if fp + tp > 0 else 0.0
    fnr = fn / (fn + tp) if fn + tp > 0 else 0.0
    return Metrics(tp, fp, fn, fdr, fnr)


def score_pooled(pairs: list[tuple[set[Relation], set[Relation]]]) -> Metrics:
    """Pool raw counts over several (found, truth) datasets, then compute rates."""
    tp = fp = fn = 0
    for found, truth in pairs:
        m = score(found, truth)
        tp += m.tp
        fp += m.fp
        fn += m.fn
    fdr = fp / (fp + tp) if fp + tp > 0 else 0.0
    fnr = fn / (fn + tp) if fn + tp > 0 else 0.0
    return Metrics(tp, fp, fn, fdr, fnr)


def intersection(found1: set[Relation], found2: set[Relation]) -> float:
    """Jaccard overlap |f1 & f2| / |f1 | f2|; 1.0 when both sets are empty."""
    union = found1 | found2
    if not union:
        return 1.0
    return len(found1 & found2) / len(union)


def overlap_ratios(found1: set[Relation], found2: set[Relation]) -> dict[str, float]:
    """Jaccard plus the two one-sided normalizations, for the report."""
    inter = found1 & found2
    return {
        "jaccard": intersection(found1, found2),
        "share_of_first": len(inter) / len(found1) if found1 else 1.0,
        "share_of_second": len(inter) / len(found2) if found2 else 1.0,
    }


def consensus(found1: set[Relation], found2: set[Relation]) -> set[Relation]:
    """Relations called significant in both periods."""
    return found1 & found2


def save_relations_csv(relations: set[Relation], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "delta", "sign"])
        for r in sorted(relations):
            writer.writerow([r.source, r.target, r.delta, r.sign])


def load_relations_csv(path) -> set[Relation]:
    """Read relations from CSV; tolerates a 'kind' column in place of 'sign'."""
    out: set[Relation] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        return out
    header = [h.strip().lower() for h in rows[0]]
    try:
        si = header.index("source")
        ti = header.index("target")
        di = header.index("delta")
    except ValueError as exc:
        raise ValueError(f"{path}: need source,target,delta columns") from exc
    sgn = header.index("sign") if "sign" in header else None
    for row in rows[1:]:
        sign = row[sgn].strip() if sgn is not None else "any"
        if sign not in SIGNS:
            sign = "any"
        out.add(Relation(row[si].strip(), row[ti].strip(), int(row[di]), sign))
    return out
