"""Experiment telemetry: column schema, CSV ingestion, validation and cleaning.

One CSV file holds one flight experiment. Rows are time ordered and assumed
uniformly sampled; the sampling interval is supplied by the caller because
the files carry no timestamp column.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AllRowsDropped,
    ColumnCountMismatch,
    EmptyFile,
    InvalidConfig,
    IoError,
    MissingColumn,
)

RESPONSE = "remaining_time_s"
STATE_COLUMNS = ("rpm", "fmc", "amc")
VOLTAGE_COLUMNS = ("llf20v", "ula20v", "lrf40v", "ura40v", "lrf20v", "ura20v")
CURRENT_COLUMNS = ("llf20c", "ula20c", "lrf40c", "ura40c")
TEMPERATURE_COLUMNS = ("llf20t", "ula20t", "lrf40t", "ura40t")
PREDICTORS = STATE_COLUMNS + VOLTAGE_COLUMNS + CURRENT_COLUMNS + TEMPERATURE_COLUMNS

UNITS = {
    RESPONSE: "s",
    "rpm": "rev/min",
    "fmc": "sensor units",
    "amc": "sensor units",
    **{c: "V" for c in VOLTAGE_COLUMNS},
    **{c: "A" for c in CURRENT_COLUMNS},
    **{c: "degC" for c in TEMPERATURE_COLUMNS},
}

# Long descriptive headers seen in NASA-style exports, keyed by normalized form.
_ALIASES = {
    "remainingflyingtime": RESPONSE,
    "remainingflyingtimeestimate": RESPONSE,
    "remainingflighttime": RESPONSE,
    "remainingtime": RESPONSE,
    "remainingtimes": RESPONSE,
    "batterylifetime": RESPONSE,
    "revolutionsperminute": "rpm",
    "forwardmotorcontrollersensor": "fmc",
    "forwardmotorcontrolledsensor": "fmc",
    "aftermotorcontrollersensor": "amc",
    "aftermotorcontrolledsensor": "amc",
}


def _normalize(name: str) -> str:
    return re.sub(r"[^a-z0-9]", "", name.strip().lower())


@dataclass(frozen=True)
class ColumnSchema:
    """Canonical column layout: the response first, then the 17 predictors."""

    response: str = RESPONSE
    state: tuple = STATE_COLUMNS
    voltage: tuple = VOLTAGE_COLUMNS
    current: tuple = CURRENT_COLUMNS
    temperature: tuple = TEMPERATURE_COLUMNS

    def __post_init__(self):
        names = self.columns
        if len(names) != 18 or len(set(names)) != 18:
            raise InvalidConfig("schema must hold 18 distinct columns")
        if (len(self.state), len(self.voltage), len(self.current), len(self.temperature)) != (3, 6, 4, 4):
            raise InvalidConfig("predictor roles must split 3/6/4/4")

    @property
    def predictors(self) -> tuple:
        return self.state + self.voltage + self.current + self.temperature

    @property
    def columns(self) -> tuple:
        return (self.response,) + self.predictors

    def role(self, column: str) -> str:
        for role in ("state", "voltage", "current", "temperature"):
            if column in getattr(self, role):
                return role
        if column == self.response:
            return "response"
        raise KeyError(column)

    def resolve(self, header_name: str) -> str | None:
        """Map a header cell onto a canonical column name, or None."""
        key = _normalize(header_name)
        for name in self.columns:
            if key == _normalize(name):
                return name
        # descriptive forms such as "LLF20V Lower Left Front - Battery Voltage"
        head = re.split(r"[\s\-–_]+", header_name.strip().lower(), maxsplit=1)[0]
        if head in self.predictors:
            return head
        alias = _ALIASES.get(key)
        return alias if alias in self.columns else None


DEFAULT_SCHEMA = ColumnSchema()


@dataclass(eq=False)
class TelemetryFrame:
    """One experiment's rows in canonical column order (response first)."""

    experiment_id: str
    values: np.ndarray
    sample_interval_s: float = 1.0
    schema: ColumnSchema = field(default=DEFAULT_SCHEMA, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.schema.columns):
            raise ColumnCountMismatch(
                f"{self.experiment_id}: expected {len(self.schema.columns)} columns, "
                f"got array of shape {self.values.shape}"
            )
        if not self.sample_interval_s > 0:
            raise InvalidConfig("sample_interval_s must be positive")

    def __len__(self):
        return self.values.shape[0]

    @property
    def columns(self) -> tuple:
        return self.schema.columns

    @property
    def response(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def predictors(self) -> np.ndarray:
        return self.values[:, 1:]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.columns.index(name)]

    def freeze(self) -> "TelemetryFrame":
        self.values.setflags(write=False)
        return self


@dataclass
class ValidationReport:
    experiment_id: str
    n_rows: int
    missing_cells: int
    nonfinite_cells: int
    negative_response_rows: int
    column_min: dict
    column_max: dict
    column_mean: dict

    @property
    def defect_count(self) -> int:
        return self.missing_cells + self.nonfinite_cells + self.negative_response_rows

    @property
    def is_clean(self) -> bool:
        return self.defect_count == 0


def _parse_cell(text: str) -> float:
    text = text.strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        return math.nan


def load_experiment(path, schema: ColumnSchema = DEFAULT_SCHEMA,
                    sample_interval_s: float = 1.0) -> TelemetryFrame:
    """Read one experiment CSV into a frame, keeping file row order.

    Columns may appear in any order and under their long descriptive names.
    Empty, ``NaN`` and unparseable cells load as NaN and are left for
    :func:`validate_frame` and :func:`clean_frame` to deal with.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path}: no header row")
        resolved = [schema.resolve(h) for h in header]
        missing = [c for c in schema.columns if c not in resolved]
        if missing:
            raise MissingColumn(f"{path}: header lacks {', '.join(missing)}")
        if len(header) != len(schema.columns):
            raise ColumnCountMismatch(
                f"{path}: header has {len(header)} columns, expected {len(schema.columns)}"
            )
        order = [resolved.index(c) for c in schema.columns]
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ColumnCountMismatch(
                    f"{path}:{lineno}: {len(record)} cells, expected {len(header)}"
                )
            rows.append([_parse_cell(record[j]) for j in order])
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    return TelemetryFrame(path.stem, np.array(rows, dtype=np.float64), sample_interval_s, schema)


def list_experiment_files(data_dir) -> list:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise IoError(f"{data_dir} is not a directory")
    return sorted(data_dir.glob("*.csv"), key=lambda p: p.stem)


def load_corpus(data_dir, schema: ColumnSchema = DEFAULT_SCHEMA,
                sample_interval_s: float = 1.0) -> list:
    """Load every ``*.csv`` in a directory, sorted by experiment id."""
    files = list_experiment_files(data_dir)
    if not files:
        raise IoError(f"no experiment CSV files in {data_dir}")
    return [load_experiment(p, schema, sample_interval_s) for p in files]


def write_experiment(frame: TelemetryFrame, path) -> Path:
    """Write a frame as CSV. Floats use shortest round-trip repr."""
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(frame.columns)
            for row in frame.values.tolist():
                writer.writerow(["NaN" if v != v else repr(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def validate_frame(frame: TelemetryFrame) -> ValidationReport:
    values = frame.values
    missing = np.isnan(values)
    finite = np.isfinite(values)
    response = values[:, 0]
    negative = int(np.count_nonzero(finite[:, 0] & (response < 0)))
    mins, maxs, means = {}, {}, {}
    for j, name in enumerate(frame.columns):
        col = values[finite[:, j], j]
        if col.size:
            mins[name] = float(col.min())
            maxs[name] = float(col.max())
            means[name] = math.fsum(col) / col.size
        else:
            mins[name] = maxs[name] = means[name] = math.nan
    return ValidationReport(
        experiment_id=frame.experiment_id,
        n_rows=len(frame),
        missing_cells=int(missing.sum()),
        nonfinite_cells=int((~finite & ~missing).sum()),
        negative_response_rows=negative,
        column_min=mins,
        column_max=maxs,
        column_mean=means,
    )


CLEANING_POLICIES = ("drop", "interpolate")


def _defect_mask(values: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(values)
    with np.errstate(invalid="ignore"):
        bad[:, 0] |= values[:, 0] < 0
    return bad


def clean_frame(frame: TelemetryFrame, policy: str = "interpolate") -> TelemetryFrame:
    """Remove or repair missing, non-finite and negative-response cells.

    ``drop`` removes every defective row. ``interpolate`` linearly fills
    interior gaps in each column from its nearest finite neighbours and
    trims leading/trailing rows that have nothing to interpolate from.
    """
    if policy not in CLEANING_POLICIES:
        raise InvalidConfig(f"unknown cleaning policy {policy!r}")
    values = frame.values
    bad = _defect_mask(values)
    if policy == "drop":
        cleaned = values[~bad.any(axis=1)]
    else:
        good = ~bad
        if not good.any(axis=0).all():
            raise AllRowsDropped(f"{frame.experiment_id}: a column has no usable cells")
        first = max(int(np.argmax(good[:, j])) for j in range(values.shape[1]))
        last = min(len(values) - 1 - int(np.argmax(good[::-1, j])) for j in range(values.shape[1]))
        if first > last:
            raise AllRowsDropped(f"{frame.experiment_id}: no row range is interpolable")
        cleaned = values[first:last + 1].copy()
        gmask = good[first:last + 1]
        rows = np.arange(cleaned.shape[0])
        for j in np.flatnonzero(~gmask.all(axis=0)):
            ok = gmask[:, j]
            cleaned[~ok, j] = np.interp(rows[~ok], rows[ok], cleaned[ok, j])
    if cleaned.shape[0] == 0:
        raise AllRowsDropped(f"{frame.experiment_id}: cleaning removed every row")
    return TelemetryFrame(frame.experiment_id, cleaned, frame.sample_interval_s, frame.schema)


def experiment_ids(corpus: Iterable[TelemetryFrame]) -> list:
    return [f.experiment_id for f in corpus]


def check_unique_ids(corpus: Sequence[TelemetryFrame]) -> None:
    ids = experiment_ids(corpus)
    if len(set(ids)) != len(ids):
        raise InvalidConfig(f"duplicate experiment ids in corpus: {ids}")
