"""Raw numeric series, up/down discretization, and boolean observation traces.

A raw CSV column becomes two propositions: ``NAME.up`` is true where the
value exceeds the threshold, ``NAME.down`` where it is below the negated
threshold. Values inside ``[-threshold, threshold]`` (including exact
zeros under the default threshold 0) assert neither proposition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Malformed input data (CSV shape, parse failures, length mismatches)."""


@dataclass(frozen=True)
class RawSeries:
    """One named numeric time series, optionally with per-step labels."""

    name: str
    values: np.ndarray
    timestamps: tuple[str, ...] | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size == 0:
            raise DataError(f"series {self.name!r} must be a nonempty 1-d sequence")
        if self.timestamps is not None:
            if len(self.timestamps) != vals.size:
                raise DataError(
                    f"series {self.name!r}: {len(self.timestamps)} timestamps "
                    f"for {vals.size} values"
                )
            if any(a >= b for a, b in zip(self.timestamps, self.timestamps[1:])):
                raise DataError(f"series {self.name!r}: timestamps must strictly increase")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class DiscretizationRule:
    """Threshold for the up/down proposition scheme; must be >= 0."""

    threshold: float = 0.0

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")


@dataclass(frozen=True)
class Trace:
    """Time-indexed boolean observations: truth[t, i] for atom atoms[i]."""

    atoms: tuple[str, ...]
    truth: np.ndarray
    atom_variables: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        truth = np.asarray(self.truth, dtype=bool)
        truth.setflags(write=False)
        object.__setattr__(self, "truth", truth)
        if truth.ndim != 2 or truth.shape[1] != len(self.atoms):
            raise DataError("truth matrix shape does not match the atom list")
        if truth.shape[0] < 1:
            raise DataError("a trace needs at least one time step")
        if len(set(self.atoms)) != len(self.atoms):
            raise DataError("duplicate atom names in trace")
        variables = dict(self.atom_variables)
        for atom in self.atoms:
            variables.setdefault(atom, atom)
        object.__setattr__(self, "atom_variables", variables)

    @property
    def length(self) -> int:
        return int(self.truth.shape[0])

    def column(self, atom: str) -> np.ndarray:
        try:
            idx = self.atoms.index(atom)
        except ValueError:
            raise KeyError(f"unknown atom {atom!r}") from None
        return self.truth[:, idx]

    def variable_of(self, atom: str) -> str:
        return self.atom_variables[atom]

    @property
    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for atom in self.atoms:
            seen.setdefault(self.atom_variables[atom], None)
        return tuple(seen)

    def slice(self, start: int, stop: int) -> "Trace":
        """Sub-trace over rows [start, stop); bounds must satisfy 0 <= start < stop <= T."""
        if not (0 <= start < stop <= self.length):
            raise DataError(
                f"slice [{start}, {stop}) out of range for trace of length {self.length}"
            )
        return Trace(self.atoms, self.truth[start:stop], dict(self.atom_variables))


_LABEL_COLUMN_NAMES = {"date", "time", "timestamp", "day", "index"}


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv(path) -> list[RawSeries]:
    """Load a header-ed CSV of numeric columns into RawSeries, aligned by row.

    A first column named like a date (or whose first data cell is not
    numeric) is treated as the shared timestamp label. Lines starting with
    '#' are ignored. Missing or non-numeric cells are hard errors naming
    the offending row and column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = rows[1:]
    if not data:
        raise DataError(f"{path}: no data rows")
    if len(header) != len(set(header)):
        raise DataError(f"{path}: duplicate column names in header")

    label_col = header[0].lower() in _LABEL_COLUMN_NAMES or not _is_number(data[0][0])
    first_value_col = 1 if label_col else 0
    if first_value_col >= len(header):
        raise DataError(f"{path}: no numeric columns")

    timestamps: list[str] = []
    columns: list[list[float]] = [[] for _ in header[first_value_col:]]
    for rownum, row in enumerate(data, start=1):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}"
            )
        if label_col:
            timestamps.append(row[0].strip())
        for colidx, cell in enumerate(row[first_value_col:]):
            text = cell.strip()
            name = header[first_value_col + colidx]
            if not text:
                raise DataError(f"{path}: row {rownum}, column {name!r}: missing value")
            try:
                columns[colidx].append(float(text))
            except ValueError:
                raise DataError(
                    f"{path}: row {rownum}, column {name!r}: "
                    f"could not parse {text!r} as a number"
                ) from None

    stamps = tuple(timestamps) if label_col else None
    return [
        RawSeries(name, np.array(col), stamps)
        for name, col in zip(header[first_value_col:], columns)
    ]


def discretize(series: list[RawSeries], rule: DiscretizationRule | None = None) -> Trace:
    """Turn numeric series into a trace of NAME.up / NAME.down propositions."""
    if rule is None:
        rule = DiscretizationRule()
    if not series:
        raise DataError("no series to discretize")
    names = [s.name for s in series]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DataError(f"duplicate series names: {', '.join(dupes)}")
    length = len(series[0])
    for s in series:
        if len(s) != length:
            raise DataError(
                f"series lengths differ: {series[0].name!r} has {length}, "
                f"{s.name!r} has {len(s)}"
            )
    atoms: list[str] = []
    cols: list[np.ndarray] = []
    variables: dict[str, str] = {}
    for s in series:
        up = s.values > rule.threshold
        down = s.values < -rule.threshold
        atoms.extend([f"{s.name}.up", f"{s.name}.down"])
        cols.extend([up, down])
        variables[f"{s.name}.up"] = s.name
        variables[f"{s.name}.down"] = s.name
    return Trace(tuple(atoms), np.column_stack(cols), variables)


def save_trace_csv(trace: Trace, path) -> None:
    """Debug export: one 0/1 column per atom."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace.atoms)
        for row in trace.truth.astype(int):
            writer.writerow(row.tolist())
