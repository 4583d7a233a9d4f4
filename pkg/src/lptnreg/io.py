"""Reading datasets and writing/reading the two output formats.

* Structured reports are UTF-8 JSON objects, one key per line-indented entry,
  with nested per-parameter blocks.
* Tables (curves, per-observation diagnostics, study results) are UTF-8 CSV
  with a header row.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import InputError
from .regression import Dataset

__all__ = ["read_dataset", "write_report", "read_report", "write_table", "read_table", "format_table"]


def read_dataset(path, response: str, delimiter: str | None = None) -> Dataset:
    """Load a delimited file with a header row.

    The ``response`` column becomes ``y``; every other column is a covariate.
    An intercept column is prepended and named ``intercept``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if delimiter is None:
        try:
            delimiter = csv.Sniffer().sniff(text.splitlines()[0], delimiters=",;\t ").delimiter
        except (csv.Error, IndexError):
            delimiter = ","
    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter) if r]
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if response not in header:
        raise InputError(f"{path}: response column {response!r} not in header {header}")
    values = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise InputError(
                    f"{path}: row {i}, column {header[j]!r}: not a number: {cell.strip()!r}"
                ) from None
            if not math.isfinite(values[i - 2, j]):
                raise InputError(f"{path}: row {i}, column {header[j]!r}: value is not finite")
    k = header.index(response)
    cov_names = [h for j, h in enumerate(header) if j != k]
    covariates = np.delete(values, k, axis=1)
    return Dataset.from_covariates(covariates, values[:, k], cov_names)


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_report(report: dict, path=None) -> str:
    text = json.dumps(report, indent=2, default=_default, allow_nan=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_table(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_table(rows, path=None) -> str:
    text = format_table(rows)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _parse_cell(s: str):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def read_table(path) -> tuple[list[str], list[list]]:
    """Parse a table written by :func:`write_table`; numeric cells come back as numbers."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty table")
    return rows[0], [[_parse_cell(c) for c in r] for r in rows[1:]]
