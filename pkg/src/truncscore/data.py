"""Observed-data containers, CSV ingestion and pre-estimation diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional

import numpy as np

from .exceptions import ParseError, SchemaError, ValidationError

COLUMNS = ("a", "x1", "x2", "y", "time", "r", "status")
DEFAULT_SCHEMA = {name: name for name in COLUMNS}
_NA_TOKENS = {"", "na", "nan"}


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: arm, covariates, follow-up, event code, observation flag, score."""

    a: int
    x1: float
    x2: int
    time: float
    status: int
    r: int
    y: Optional[float] = None


@dataclass(frozen=True)
class LandmarkSpec:
    tau: float

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValidationError(f"landmark time must be positive, got {self.tau!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented, immutable collection of :class:`SubjectRecord`.

    Absent scores are stored as NaN in ``y``.
    """

    a: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    time: np.ndarray
    status: np.ndarray
    r: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        cols = {
            "a": np.asarray(self.a, dtype=np.int64),
            "x1": np.asarray(self.x1, dtype=float),
            "x2": np.asarray(self.x2, dtype=np.int64),
            "time": np.asarray(self.time, dtype=float),
            "status": np.asarray(self.status, dtype=np.int64),
            "r": np.asarray(self.r, dtype=np.int64),
            "y": np.asarray(self.y, dtype=float),
        }
        lengths = {v.shape for v in cols.values()}
        if len(lengths) != 1 or cols["a"].ndim != 1:
            raise ValidationError("all columns must be 1-d arrays of equal length")
        for name, arr in cols.items():
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        _check_columns(self)

    @property
    def n(self):
        return len(self.a)

    def __len__(self):
        return self.n

    @property
    def event(self):
        """Terminal-event indicator (any positive status code)."""
        return (self.status > 0).astype(np.int64)

    @classmethod
    def from_records(cls, records):
        records = list(records)
        return cls(
            a=[rec.a for rec in records],
            x1=[rec.x1 for rec in records],
            x2=[rec.x2 for rec in records],
            time=[rec.time for rec in records],
            status=[rec.status for rec in records],
            r=[rec.r for rec in records],
            y=[np.nan if rec.y is None else rec.y for rec in records],
        )

    def records(self) -> Iterator[SubjectRecord]:
        for i in range(self.n):
            yi = self.y[i]
            yield SubjectRecord(
                a=int(self.a[i]), x1=float(self.x1[i]), x2=int(self.x2[i]),
                time=float(self.time[i]), status=int(self.status[i]),
                r=int(self.r[i]), y=None if np.isnan(yi) else float(yi),
            )

    def subset(self, mask):
        mask = np.asarray(mask)
        return Dataset(**{name: getattr(self, name)[mask] for name in _FIELDS})

    def relabel_arms(self):
        """Copy with treatment labels swapped (0 <-> 1)."""
        cols = {name: getattr(self, name) for name in _FIELDS}
        cols["a"] = 1 - self.a
        return Dataset(**cols)

    def equals(self, other):
        return all(
            np.array_equal(getattr(self, name), getattr(other, name), equal_nan=(name == "y"))
            for name in _FIELDS
        )


_FIELDS = ("a", "x1", "x2", "time", "status", "r", "y")


def _check_columns(d: Dataset):
    def first_bad(mask):
        return int(np.flatnonzero(mask)[0]) + 1

    if d.n < 2:
        raise ValidationError(f"dataset needs at least 2 records, got {d.n}")
    if np.any((d.a != 0) & (d.a != 1)):
        raise ValidationError("treatment must be 0 or 1", row=first_bad((d.a != 0) & (d.a != 1)))
    if np.any((d.x2 != 0) & (d.x2 != 1)):
        raise ValidationError("x2 must be 0 or 1", row=first_bad((d.x2 != 0) & (d.x2 != 1)))
    if np.any((d.r != 0) & (d.r != 1)):
        raise ValidationError("r must be 0 or 1", row=first_bad((d.r != 0) & (d.r != 1)))
    if np.any(d.status < 0):
        raise ValidationError("status must be >= 0", row=first_bad(d.status < 0))
    bad_time = ~np.isfinite(d.time) | (d.time < 0)
    if np.any(bad_time):
        raise ValidationError("time must be finite and >= 0", row=first_bad(bad_time))
    if np.any(~np.isfinite(d.x1)):
        raise ValidationError("x1 must be finite", row=first_bad(~np.isfinite(d.x1)))
    if np.any(np.isinf(d.y)):
        raise ValidationError("score must be finite", row=first_bad(np.isinf(d.y)))
    missing_y = (d.r == 1) & np.isnan(d.y)
    if np.any(missing_y):
        raise ValidationError("r=1 but score is absent", row=first_bad(missing_y))


def _parse_number(text, kind, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"column {column!r}: cannot parse {text!r} as a number", row=row) from None
    if kind == "int":
        if not value.is_integer():
            raise ParseError(f"column {column!r}: expected an integer, got {text!r}", row=row)
        return int(value)
    return value


def read_csv(path, schema: Optional[Mapping[str, str]] = None) -> Dataset:
    """Read a trial dataset.

    ``schema`` maps the logical names ``a, x1, x2, y, time, r, status`` to the
    header names used in the file. Row numbers in errors count data rows from 1.
    Empty and ``NA`` score cells become absent scores.
    """
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(COLUMNS)
        if unknown:
            raise SchemaError(f"unknown logical columns in schema: {sorted(unknown)}")
        mapping.update(schema)

    kinds = {"a": "int", "x2": "int", "r": "int", "status": "int",
             "x1": "float", "time": "float", "y": "float"}
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("file is empty; a header row is required") from None
        index = {}
        for logical, col in mapping.items():
            if col not in header:
                raise SchemaError(f"missing column {col!r} (for {logical!r})")
            index[logical] = header.index(col)
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=rownum)
            values = {}
            for logical, j in index.items():
                cell = row[j].strip()
                if logical == "y" and cell.lower() in _NA_TOKENS:
                    values[logical] = None
                    continue
                values[logical] = _parse_number(cell, kinds[logical], rownum, mapping[logical])
            if values["r"] == 1 and values["y"] is None:
                raise ValidationError("r=1 but score is absent", row=rownum)
            records.append(SubjectRecord(**values))
    return Dataset.from_records(records)


def write_csv(d: Dataset, path, schema: Optional[Mapping[str, str]] = None):
    """Write ``d`` in the layout understood by :func:`read_csv` (absent score as ``NA``)."""
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        mapping.update(schema)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([mapping[c] for c in COLUMNS])
        for i in range(d.n):
            y = d.y[i]
            writer.writerow([
                int(d.a[i]), repr(float(d.x1[i])), int(d.x2[i]),
                "NA" if np.isnan(y) else repr(float(y)),
                repr(float(d.time[i])), int(d.r[i]), int(d.status[i]),
            ])


@dataclass
class Diagnostics:
    """Per-arm counts plus flags raised against the observation scheme."""

    tau: float
    n: dict = field(default_factory=dict)
    observed: dict = field(default_factory=dict)
    at_risk_tau: dict = field(default_factory=dict)
    censored_before_tau: dict = field(default_factory=dict)
    events_before_tau: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def ok(self):
        return not any(f["severity"] == "error" for f in self.flags)


def validate_for_estimation(d: Dataset, lm: LandmarkSpec) -> Diagnostics:
    tau = lm.tau
    diag = Diagnostics(tau=tau)
    for arm in (0, 1):
        m = d.a == arm
        diag.n[arm] = int(m.sum())
        diag.observed[arm] = int((m & (d.r == 1)).sum())
        diag.at_risk_tau[arm] = int((m & (d.time > tau)).sum())
        diag.censored_before_tau[arm] = int((m & (d.time <= tau) & (d.status == 0)).sum())
        diag.events_before_tau[arm] = int((m & (d.time <= tau) & (d.status > 0)).sum())
        if diag.n[arm] == 0:
            diag.flags.append({"code": "empty-arm", "arm": arm, "severity": "error",
                               "message": f"arm {arm} has no subjects"})
            continue
        if diag.observed[arm] == 0:
            diag.flags.append({"code": "positivity-score", "arm": arm, "severity": "error",
                               "message": f"arm {arm} has no observed scores"})
        if diag.observed[arm] == diag.n[arm]:
            diag.flags.append({"code": "positivity-score", "arm": arm, "severity": "warning",
                               "message": f"every subject in arm {arm} has an observed score"})
        if diag.at_risk_tau[arm] == 0:
            diag.flags.append({"code": "positivity-censoring", "arm": arm, "severity": "error",
                               "message": f"no subject in arm {arm} is followed beyond tau={tau}"})
    inconsistent = np.flatnonzero((d.r == 1) & (d.time <= tau))
    if inconsistent.size:
        diag.flags.append({
            "code": "observed-before-tau", "severity": "warning",
            "rows": (inconsistent + 1).tolist(),
            "message": f"{inconsistent.size} record(s) have r=1 with time <= tau",
        })
    return diag
