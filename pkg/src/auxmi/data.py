"""Columnar datasets with an explicit observed/missing mask.

Values at masked cells are stored as NaN so that an accidental read poisons
any downstream arithmetic; the mask, not the NaN, is authoritative.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from auxmi.errors import CsvFormatError, SpecError


@dataclass(frozen=True)
class Continuous:
    name = "continuous"

    def __str__(self):
        return "continuous"


@dataclass(frozen=True)
class Binary:
    name = "binary"
    levels = (0, 1)

    def __str__(self):
        return "binary"


@dataclass(frozen=True)
class Ordinal:
    """Ordered categorical variable; ``levels`` lists its codes low to high."""

    levels: tuple = ()
    name = "ordinal"

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) < 2:
            raise SpecError("ordinal variable needs at least 2 levels")
        if len(set(levels)) != len(levels):
            raise SpecError(f"ordinal level codes must be distinct: {levels}")
        object.__setattr__(self, "levels", levels)

    def __str__(self):
        return "ordinal:" + ":".join(_fmt_code(c) for c in self.levels)


CONTINUOUS = Continuous()
BINARY = Binary()


def parse_kind(text):
    """Parse ``continuous``, ``binary`` or ``ordinal:1:2:3`` (or ``ordinal:3``
    as shorthand for levels 1..3)."""
    if isinstance(text, (Continuous, Binary, Ordinal)):
        return text
    parts = str(text).strip().lower().split(":")
    if parts[0] == "continuous" and len(parts) == 1:
        return CONTINUOUS
    if parts[0] == "binary" and len(parts) == 1:
        return BINARY
    if parts[0] == "ordinal":
        if len(parts) == 2:
            return Ordinal(tuple(range(1, int(parts[1]) + 1)))
        if len(parts) > 2:
            return Ordinal(tuple(_parse_code(p) for p in parts[1:]))
    raise SpecError(f"unknown variable kind {text!r}")


def _parse_code(text):
    value = float(text)
    return int(value) if value.is_integer() else value


def _fmt_code(code):
    code = float(code)
    return str(int(code)) if code.is_integer() else repr(code)


def _allowed_codes(kind):
    if isinstance(kind, Binary):
        return (0.0, 1.0)
    if isinstance(kind, Ordinal):
        return tuple(float(c) for c in kind.levels)
    return None


@dataclass(frozen=True)
class ModelFormula:
    response: str
    predictors: tuple = ()

    def __post_init__(self):
        predictors = tuple(self.predictors)
        object.__setattr__(self, "predictors", predictors)
        if self.response in predictors:
            raise SpecError(f"response {self.response!r} listed among predictors")
        if len(set(predictors)) != len(predictors):
            raise SpecError(f"duplicate predictors in {list(predictors)}")

    @property
    def variables(self):
        return (self.response,) + self.predictors

    def check(self, dataset):
        for name in self.variables:
            dataset.kind(name)
        return self


@dataclass(frozen=True)
class Dataset:
    """Immutable column-major table.

    ``values[name]`` is a float array (NaN where missing) and
    ``observed[name]`` a boolean array that is True at observed cells.
    """

    variables: tuple
    values: Mapping[str, np.ndarray] = field(repr=False)
    observed: Mapping[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        variables = tuple((str(n), parse_kind(k)) for n, k in self.variables)
        names = [n for n, _ in variables]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate variable names: {names}")
        if set(self.values) != set(names) or set(self.observed) != set(names):
            raise SpecError("values/mask keys do not match the declared variables")
        lengths = {len(self.values[n]) for n in names} | {len(self.observed[n]) for n in names}
        if len(lengths) > 1:
            raise SpecError("all columns must have the same length")
        values, observed = {}, {}
        for name, kind in variables:
            obs = np.array(self.observed[name], dtype=bool)
            col = np.array(self.values[name], dtype=float)
            col[~obs] = np.nan
            if not np.all(np.isfinite(col[obs])):
                raise SpecError(f"non-finite observed value in {name!r}")
            codes = _allowed_codes(kind)
            if codes is not None:
                bad = obs & ~np.isin(col, codes)
                if bad.any():
                    row = int(np.flatnonzero(bad)[0])
                    raise SpecError(
                        f"invalid code {col[row]!r} for {kind} variable {name!r} at row {row}"
                    )
            col.setflags(write=False)
            obs.setflags(write=False)
            values[name] = col
            observed[name] = obs
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def from_columns(cls, columns, kinds=None, observed=None):
        """Build from ``{name: array}``; NaN marks missing unless ``observed``
        is given explicitly. ``kinds`` defaults to continuous."""
        kinds = kinds or {}
        values, mask = {}, {}
        for name, col in columns.items():
            col = np.asarray(col, dtype=float)
            values[name] = col
            mask[name] = (
                np.asarray(observed[name], dtype=bool)
                if observed is not None and name in observed
                else ~np.isnan(col)
            )
        variables = tuple((name, kinds.get(name, CONTINUOUS)) for name in columns)
        return cls(variables, values, mask)

    @property
    def names(self):
        return tuple(n for n, _ in self.variables)

    @property
    def n_rows(self):
        if not self.variables:
            return 0
        return len(self.values[self.variables[0][0]])

    def kind(self, name):
        for n, k in self.variables:
            if n == name:
                return k
        raise SpecError(f"unknown variable {name!r}")

    def column(self, name):
        self.kind(name)
        return self.values[name]

    def is_observed(self, name):
        self.kind(name)
        return self.observed[name]

    def is_complete(self):
        return all(self.observed[n].all() for n in self.names)

    def matrix(self, names):
        """Stack observed columns into an (n, len(names)) array.

        Raises if any requested cell is missing, which is what keeps
        estimators from ever reading masked values.
        """
        cols = []
        for name in names:
            if not self.is_observed(name).all():
                raise SpecError(f"column {name!r} has missing cells")
            cols.append(self.values[name])
        if not cols:
            return np.empty((self.n_rows, 0))
        return np.column_stack(cols)

    def take(self, rows):
        rows = np.asarray(rows)
        return Dataset(
            self.variables,
            {n: self.values[n][rows] for n in self.names},
            {n: self.observed[n][rows] for n in self.names},
        )

    def replace(self, name, values=None, observed=None):
        """New dataset with one column's values and/or mask swapped out."""
        self.kind(name)
        new_values = dict(self.values)
        new_obs = dict(self.observed)
        if values is not None:
            new_values[name] = np.asarray(values, dtype=float)
        if observed is not None:
            new_obs[name] = np.asarray(observed, dtype=bool)
        if values is not None and observed is None:
            new_obs[name] = np.ones(self.n_rows, dtype=bool)
        return Dataset(self.variables, new_values, new_obs)

    def select(self, names):
        return Dataset(
            tuple((n, self.kind(n)) for n in names),
            {n: self.values[n] for n in names},
            {n: self.observed[n] for n in names},
        )

    def equals(self, other):
        if self.variables != other.variables:
            return False
        for n in self.names:
            if not np.array_equal(self.observed[n], other.observed[n]):
                return False
            obs = self.observed[n]
            if not np.array_equal(self.values[n][obs], other.values[n][obs]):
                return False
        return True


def missing_fraction(d, var):
    obs = d.is_observed(var)
    if len(obs) == 0:
        return 0.0
    return float(np.count_nonzero(~obs)) / len(obs)


def listwise_complete(d, vars):
    """Rows fully observed on ``vars``, in original order."""
    keep = np.ones(d.n_rows, dtype=bool)
    for name in vars:
        keep &= d.is_observed(name)
    return d.take(np.flatnonzero(keep))


def load_csv(path, specs, missing_token="NA"):
    """Read a CSV whose header names exactly the variables in ``specs``.

    ``specs`` is a sequence of ``(name, kind)`` pairs; the file's columns may
    come in any order but the dataset keeps the order given in ``specs``.
    """
    specs = [(name, parse_kind(kind)) for name, kind in specs]
    spec_names = [n for n, _ in specs]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError("empty file: header row required") from None
        if sorted(header) != sorted(spec_names) or len(set(header)) != len(header):
            raise CsvFormatError(
                f"header {header} does not match declared variables {spec_names}"
            )
        position = {name: header.index(name) for name in spec_names}
        cols = {name: [] for name in spec_names}
        mask = {name: [] for name in spec_names}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"expected {len(header)} fields, got {len(row)}", row=lineno
                )
            for name, kind in specs:
                cell = row[position[name]].strip()
                if cell == missing_token:
                    cols[name].append(math.nan)
                    mask[name].append(False)
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"cannot parse {cell!r} as a number", row=lineno, column=name
                    ) from None
                if not math.isfinite(value):
                    raise CsvFormatError(
                        f"non-finite value {cell!r}", row=lineno, column=name
                    )
                codes = _allowed_codes(kind)
                if codes is not None and value not in codes:
                    raise CsvFormatError(
                        f"unknown category code {cell!r} for {kind} variable",
                        row=lineno,
                        column=name,
                    )
                cols[name].append(value)
                mask[name].append(True)
    return Dataset(
        tuple(specs),
        {n: np.array(cols[n], dtype=float) for n in spec_names},
        {n: np.array(mask[n], dtype=bool) for n in spec_names},
    )


def _format_cell(value, kind):
    if not isinstance(kind, Continuous):
        return _fmt_code(value)
    return repr(float(value))


def emit_csv(d, path, missing_token="NA"):
    """Write ``d`` so that :func:`load_csv` reproduces it exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(d.names)
        for i in range(d.n_rows):
            writer.writerow(
                [
                    _format_cell(d.values[n][i], k) if d.observed[n][i] else missing_token
                    for n, k in d.variables
                ]
            )


def kind_specs(d):
    """``(name, kind)`` pairs suitable for :func:`load_csv`."""
    return list(d.variables)


def kinds_to_strings(variables: Sequence) -> list:
    return [(n, str(k)) for n, k in variables]
