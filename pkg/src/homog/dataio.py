"""Readers and writers: long-format outcome CSVs, tabular task data,
the German Credit ``.data`` file, and JSON/CSV reports."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import IO, Mapping, Sequence

import numpy as np

from homog.experiment import StudyResult, TabularDataset, split_indices
from homog.experiment import _metric_dict as metric_dict
from homog.outcomes import MetricValue, OutcomeMatrix, RecordError, from_long_records
from homog.stats import CorrelationReport

OUTCOME_COLUMNS = ("individual_id", "deployment_id", "failure", "group", "loss")
_REQUIRED = OUTCOME_COLUMNS[:3]


class DataFormatError(ValueError):
    """Malformed input file; the message carries the offending line when known."""


def _text(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.BufferedIOBase) or "b" in getattr(stream, "mode", ""):
        return io.TextIOWrapper(stream, encoding="utf-8", newline="")
    return stream


# ----------------------------------------------------------------------------
# outcome matrices


def load_outcome_csv(stream) -> OutcomeMatrix:
    """Parse ``individual_id,deployment_id,failure[,group][,loss]`` records.

    Absent (individual, deployment) pairs become non-interactions.
    """
    reader = csv.reader(_text(stream))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataFormatError("empty matrix: file has no header") from None
    unknown = [h for h in header if h not in OUTCOME_COLUMNS]
    if unknown:
        raise DataFormatError(f"line 1: unknown column(s) {', '.join(unknown)}")
    missing = [h for h in _REQUIRED if h not in header]
    if missing:
        raise DataFormatError(f"line 1: missing column(s) {', '.join(missing)}")
    if len(set(header)) != len(header):
        raise DataFormatError("line 1: duplicate column names")
    pos = {h: i for i, h in enumerate(header)}

    records = []
    seen = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        rec = [row[pos["individual_id"]].strip(), row[pos["deployment_id"]].strip(),
               row[pos["failure"]].strip(),
               row[pos["group"]].strip() if "group" in pos else None,
               row[pos["loss"]].strip() if "loss" in pos else None]
        if not rec[0] or not rec[1]:
            raise DataFormatError(f"line {line}: empty id")
        key = (rec[0], rec[1])
        if key in seen:
            raise DataFormatError(
                f"line {line}: duplicate record for individual {rec[0]!r}, deployment {rec[1]!r}"
                f" (first on line {seen[key]})")
        seen[key] = line
        try:
            # validate the row on its own so errors carry a line number
            from_long_records([rec])
        except RecordError as exc:
            raise DataFormatError(f"line {line}: {exc}") from None
        records.append(rec)
    try:
        return from_long_records(records)
    except RecordError as exc:
        raise DataFormatError(str(exc)) from None


def _fmt_float(v: float) -> str:
    return repr(float(v))


def write_outcome_csv(matrix: OutcomeMatrix, stream) -> None:
    """Write the long format that :func:`load_outcome_csv` reads back exactly."""
    cols = list(_REQUIRED)
    if matrix.groups is not None:
        cols.append("group")
    if matrix.losses is not None:
        cols.append("loss")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(cols)
    for ind, dep, fail, group, loss in matrix.to_long_records():
        row = [ind, dep, fail]
        if matrix.groups is not None:
            row.append("" if group is None else group)
        if matrix.losses is not None:
            row.append("" if loss is None or math.isnan(loss) else _fmt_float(loss))
        w.writerow(row)


# ----------------------------------------------------------------------------
# tabular data


def _parse_number(text: str, line: int, column: str) -> float:
    t = text.strip()
    try:
        v = float(t)
    except ValueError:
        raise DataFormatError(f"line {line}: column {column!r}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataFormatError(f"line {line}: column {column!r}: non-finite value {text!r}")
    return v


def load_tabular_csv(stream, task_columns: Sequence[str], group_column: str | None = None,
                     split_seed: int = 0, split_fraction: float = 0.8,
                     categorical: Mapping[str, Sequence[str]] | None = None) -> TabularDataset:
    """Rows with binary task columns; every other column is a feature.

    Columns named in ``categorical`` are one-hot encoded in the order of
    their vocabulary; the rest must be numeric.
    """
    categorical = dict(categorical or {})
    reader = csv.reader(_text(stream))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataFormatError("empty file: no header") from None
    for col in list(task_columns) + ([group_column] if group_column else []) + list(categorical):
        if col not in header:
            raise DataFormatError(f"column {col!r} not in header")
    if not task_columns:
        raise DataFormatError("at least one task column is required")
    feature_cols = [h for h in header if h not in task_columns and h != group_column]

    rows = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(
                f"line {reader.line_num}: expected {len(header)} fields, got {len(row)}")
        rows.append((reader.line_num, dict(zip(header, row))))
    if len(rows) < 2:
        raise DataFormatError("need at least 2 data rows")

    labels = np.zeros((len(rows), len(task_columns)), dtype=np.int64)
    for t, col in enumerate(task_columns):
        for r, (line, rec) in enumerate(rows):
            v = rec[col].strip()
            if v not in ("0", "1"):
                raise DataFormatError(f"line {line}: task column {col!r} must be 0 or 1, got {v!r}")
            labels[r, t] = int(v)

    blocks, names = [], []
    for col in feature_cols:
        if col in categorical:
            vocab = list(categorical[col])
            where = {v: i for i, v in enumerate(vocab)}
            block = np.zeros((len(rows), len(vocab)))
            for r, (line, rec) in enumerate(rows):
                v = rec[col].strip()
                if v not in where:
                    raise DataFormatError(f"line {line}: column {col!r}: {v!r} not in vocabulary")
                block[r, where[v]] = 1.0
            blocks.append(block)
            names.extend(f"{col}={v}" for v in vocab)
        else:
            blocks.append(np.array([[_parse_number(rec[col], line, col)] for line, rec in rows]))
            names.append(col)
    X = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))
    groups = None
    if group_column:
        groups = np.array([rec[group_column].strip() for _, rec in rows], dtype=object)
    train, test = split_indices(len(rows), split_seed, split_fraction)
    return TabularDataset(X, labels, tuple(task_columns), train, test, groups, tuple(names))


# Attribute layout of the Statlog German Credit ``german.data`` file.
# Categorical vocabularies follow the dataset documentation's code order.
GERMAN_ATTRIBUTES: tuple[tuple[str, tuple[str, ...] | None], ...] = (
    ("checking_status", ("A11", "A12", "A13", "A14")),
    ("duration", None),
    ("credit_history", ("A30", "A31", "A32", "A33", "A34")),
    ("purpose", ("A40", "A41", "A42", "A43", "A44", "A45", "A46", "A47", "A48", "A49", "A410")),
    ("credit_amount", None),
    ("savings", ("A61", "A62", "A63", "A64", "A65")),
    ("employment_since", ("A71", "A72", "A73", "A74", "A75")),
    ("installment_rate", None),
    ("personal_status_sex", ("A91", "A92", "A93", "A94", "A95")),
    ("other_debtors", ("A101", "A102", "A103")),
    ("residence_since", None),
    ("property", ("A121", "A122", "A123", "A124")),
    ("age", None),
    ("other_installment_plans", ("A141", "A142", "A143")),
    ("housing", ("A151", "A152", "A153")),
    ("existing_credits", None),
    ("job", ("A171", "A172", "A173", "A174")),
    ("people_liable", None),
    ("telephone", ("A191", "A192")),
    ("foreign_worker", ("A201", "A202")),
)

# The 16 attributes used as features. Credit amount is left out because it
# defines the second task; personal status/sex becomes the group label;
# telephone and foreign-worker status are dropped.
GERMAN_FEATURES = (
    "checking_status", "duration", "credit_history", "purpose", "savings",
    "employment_since", "installment_rate", "other_debtors", "residence_since",
    "property", "age", "other_installment_plans", "housing", "existing_credits",
    "job", "people_liable",
)
GERMAN_ROWS = 1000
_FEMALE_CODES = {"A92", "A95"}


def load_german_credit(stream, split_seed: int = 0, split_fraction: float = 0.8) -> TabularDataset:
    """Parse ``german.data`` into tasks ``good_loan`` and ``amount_gt_2000``.

    Rows are grouped by sex as coded in the personal-status attribute.
    """
    lines = [ln for ln in _text(stream).read().splitlines() if ln.strip()]
    if len(lines) != GERMAN_ROWS:
        raise DataFormatError(f"expected {GERMAN_ROWS} rows, got {len(lines)}")
    layout = {name: (pos, vocab) for pos, (name, vocab) in enumerate(GERMAN_ATTRIBUTES)}
    parsed = []
    for lineno, ln in enumerate(lines, start=1):
        fields = ln.split()
        if len(fields) != len(GERMAN_ATTRIBUTES) + 1:
            raise DataFormatError(
                f"line {lineno}: expected {len(GERMAN_ATTRIBUTES) + 1} fields, got {len(fields)}")
        if fields[-1] not in ("1", "2"):
            raise DataFormatError(f"line {lineno}: outcome code must be 1 or 2, got {fields[-1]!r}")
        parsed.append(fields)

    blocks, names = [], []
    for name in GERMAN_FEATURES:
        pos, vocab = layout[name]
        if vocab is None:
            col = np.array([[_parse_number(f[pos], i + 1, name)] for i, f in enumerate(parsed)])
            names.append(name)
        else:
            where = {v: c for c, v in enumerate(vocab)}
            col = np.zeros((len(parsed), len(vocab)))
            for i, f in enumerate(parsed):
                if f[pos] not in where:
                    raise DataFormatError(f"line {i + 1}: {name}: unknown code {f[pos]!r}")
                col[i, where[f[pos]]] = 1.0
            names.extend(f"{name}={v}" for v in vocab)
        blocks.append(col)
    X = np.hstack(blocks)

    amount_pos = layout["credit_amount"][0]
    amount = np.array([_parse_number(f[amount_pos], i + 1, "credit_amount") for i, f in enumerate(parsed)])
    good = np.array([f[-1] == "1" for f in parsed], dtype=np.int64)
    labels = np.column_stack([good, (amount > 2000).astype(np.int64)])
    sex_pos = layout["personal_status_sex"][0]
    groups = np.array(["female" if f[sex_pos] in _FEMALE_CODES else "male" for f in parsed],
                      dtype=object)
    train, test = split_indices(len(parsed), split_seed, split_fraction)
    return TabularDataset(X, labels, ("good_loan", "amount_gt_2000"), train, test, groups, tuple(names))


def load_series_csv(stream) -> dict[str, list[float]]:
    """Named numeric columns, e.g. one metric per column over many settings."""
    reader = csv.reader(_text(stream))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataFormatError("empty file: no header") from None
    if len(set(header)) != len(header):
        raise DataFormatError("line 1: duplicate column names")
    out = {h: [] for h in header}
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(
                f"line {reader.line_num}: expected {len(header)} fields, got {len(row)}")
        for h, v in zip(header, row):
            out[h].append(_parse_number(v, reader.line_num, h))
    return out


# ----------------------------------------------------------------------------
# reports


def _report_obj(result) -> dict:
    if isinstance(result, StudyResult):
        return result.as_dict()
    if isinstance(result, CorrelationReport):
        return result.as_dict()
    if isinstance(result, Mapping):
        return {"metrics": {k: metric_dict(v) if isinstance(v, MetricValue) else v
                            for k, v in result.items()}}
    raise TypeError(f"cannot write a report for {type(result).__name__}")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_rows(result) -> list[list]:
    if isinstance(result, StudyResult):
        rows = [["protocol", "n", "metric", "mean", "stderr"]]
        for (p, n, m), a in result.aggregates.items():
            rows.append([p, n, m, a.mean, a.stderr])
        return rows
    if isinstance(result, CorrelationReport):
        d = result.as_dict()["pairs"]
        cols = list(d[0]) if d else ["first", "second"]
        return [cols] + [[pc[c] for c in cols] for pc in d]
    if isinstance(result, Mapping):
        rows = [["metric", "value", "status"]]
        for k, v in result.items():
            if isinstance(v, MetricValue):
                rows.append([k, v.value, v.status])
            else:
                rows.append([k, v, "defined" if v is not None else "undefined"])
        return rows
    raise TypeError(f"cannot write a report for {type(result).__name__}")


def write_report(result, fmt: str = "json") -> bytes:
    """Serialize a study, a metric mapping or a correlation report.

    Degenerate values appear as ``null`` (JSON) or an empty cell (CSV) next
    to their status, never as a number.
    """
    if fmt == "json":
        text = json.dumps(_report_obj(result), indent=2, allow_nan=False) + "\n"
        return text.encode("utf-8")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in _csv_rows(result):
            w.writerow([_csv_cell(c) for c in row])
        return buf.getvalue().encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")
