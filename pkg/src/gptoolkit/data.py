"""CSV ingestion and output.

Input files are RFC-4180 CSV with a header row, UTF-8, and ``.`` as the
decimal separator.  Numbers are written with 17 significant digits so
that a written file reads back bit for bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import EmptyData, InputError, ParseError


@dataclass(frozen=True)
class Dataset:
    names: tuple
    values: np.ndarray  # (n, k)

    def column(self, name):
        return self.values[:, self.names.index(name)]

    def has(self, name):
        return name in self.names

    def drop(self, *names):
        keep = [i for i, nm in enumerate(self.names) if nm not in names]
        return Dataset(tuple(self.names[i] for i in keep), self.values[:, keep])

    @property
    def n(self):
        return self.values.shape[0]


def read_csv(path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_csv(fh.read(), source=str(path))


def parse_csv(text: str, source: str = "<string>") -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    # skip blank lines but keep 1-based line numbers for messages
    numbered = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not numbered:
        raise EmptyData(f"{source}: file is empty")
    _, header = numbered[0]
    names = tuple(h.strip() for h in header)
    if any(not nm for nm in names):
        raise ParseError(f"{source}: line {numbered[0][0]}: empty column name", line=numbered[0][0])
    if len(set(names)) != len(names):
        raise ParseError(f"{source}: line {numbered[0][0]}: duplicate column names", line=numbered[0][0])
    body = numbered[1:]
    if not body:
        raise EmptyData(f"{source}: no data rows after the header")
    values = np.empty((len(body), len(names)))
    for r, (lineno, row) in enumerate(body):
        if len(row) != len(names):
            raise ParseError(
                f"{source}: line {lineno}: expected {len(names)} fields, found {len(row)}", line=lineno
            )
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell.strip())
            except ValueError:
                raise ParseError(
                    f"{source}: line {lineno}, column {c + 1} ({names[c]}): not a number: {cell!r}",
                    line=lineno,
                    column=c + 1,
                ) from None
            if not np.isfinite(values[r, c]):
                raise ParseError(
                    f"{source}: line {lineno}, column {c + 1} ({names[c]}): non-finite value",
                    line=lineno,
                    column=c + 1,
                )
    return Dataset(names, values)


def split_target(ds: Dataset, target: str):
    """Inputs = every column except ``target``; target = that column, or the
    last column when no column carries that name."""
    if ds.values.shape[1] < 2:
        raise InputError(f"need at least one input column and a '{target}' column")
    name = target if ds.has(target) else ds.names[-1]
    return ds.drop(name).values, ds.column(name)


def fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path_or_file, header, columns):
    """Write equal-length columns under ``header`` using 17 significant digits."""
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    n = cols[0].size if cols else 0
    if any(c.size != n for c in cols):
        raise ValueError("columns differ in length")
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([fmt(c[i]) for c in cols])
    finally:
        if own:
            fh.close()


def input_header(prefix, d):
    return [prefix] if d == 1 else [f"{prefix}_{j + 1}" for j in range(d)]
