"""Cumulative area-under-curve features and predictor correlation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySeries, InvalidConfig, TooFewRows, ZeroVarianceColumn
from .telemetry import TelemetryFrame


@dataclass(eq=False)
class FeatureMatrix:
    """Engineered predictors (n x 17) with the untouched response alongside."""

    experiment_id: str
    columns: tuple
    values: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.response = np.asarray(self.response, dtype=np.float64)
        self.columns = tuple(self.columns)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise DimensionMismatch(
                f"values shape {self.values.shape} does not match {len(self.columns)} columns"
            )
        if self.response.shape != (self.values.shape[0],):
            raise DimensionMismatch("response length differs from row count")

    def __len__(self):
        return self.values.shape[0]


@dataclass(eq=False)
class CorrelationMatrix:
    columns: tuple
    values: np.ndarray


def compensated_cumsum(x: np.ndarray) -> np.ndarray:
    """Prefix sums with the rounding error of every addition carried forward.

    ``np.cumsum`` performs the additions strictly in sequence, so the exact
    error of each step can be recovered afterwards with the TwoSum identity
    and accumulated in a second pass. The result matches a Kahan-style
    running sum without a Python-level loop.
    """
    x = np.asarray(x, dtype=np.float64)
    s = np.cumsum(x)
    prev = np.empty_like(s)
    prev[0] = 0.0
    prev[1:] = s[:-1]
    b_virtual = s - prev
    a_virtual = s - b_virtual
    err = (prev - a_virtual) + (x - b_virtual)
    return s + np.cumsum(err)


def cumulative_auc(series, sample_interval_s: float = 1.0) -> np.ndarray:
    """Left Riemann running integral: ``out[k] = dt * sum(series[:k + 1])``."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise DimensionMismatch("cumulative_auc expects a 1-D series")
    if series.size == 0:
        raise EmptySeries("cannot integrate an empty series")
    if not sample_interval_s > 0:
        raise InvalidConfig("sample_interval_s must be positive")
    return compensated_cumsum(series) * sample_interval_s


def featurize(frame: TelemetryFrame) -> FeatureMatrix:
    """Replace every predictor with its cumulative AUC within this experiment."""
    if len(frame) == 0:
        raise EmptySeries(f"{frame.experiment_id}: no rows")
    raw = frame.predictors
    engineered = np.empty_like(raw)
    for j in range(raw.shape[1]):
        engineered[:, j] = cumulative_auc(raw[:, j], frame.sample_interval_s)
    return FeatureMatrix(
        frame.experiment_id,
        frame.schema.predictors,
        engineered,
        frame.response.copy(),
    )


def featurize_corpus(frames: Sequence[TelemetryFrame]) -> list:
    return [featurize(f) for f in frames]


def stack_features(matrices: Sequence[FeatureMatrix], experiment_id: str = "pooled") -> FeatureMatrix:
    """Concatenate per-experiment feature matrices row-wise."""
    if not matrices:
        raise EmptySeries("nothing to stack")
    columns = matrices[0].columns
    for m in matrices[1:]:
        if m.columns != columns:
            raise DimensionMismatch(f"{m.experiment_id}: column names differ")
    return FeatureMatrix(
        experiment_id,
        columns,
        np.vstack([m.values for m in matrices]),
        np.concatenate([m.response for m in matrices]),
    )


def as_frame(features: FeatureMatrix, template: TelemetryFrame) -> TelemetryFrame:
    """Pack engineered features back into the telemetry layout for CSV output."""
    values = np.column_stack([features.response, features.values])
    return TelemetryFrame(features.experiment_id, values, template.sample_interval_s, template.schema)


def correlation(matrix: FeatureMatrix) -> CorrelationMatrix:
    """Pearson correlation of every column pair (two-pass, centred)."""
    x = matrix.values
    n = x.shape[0]
    if n < 2:
        raise TooFewRows("correlation needs at least two rows")
    centered = x - x.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    for j, v in enumerate(ss):
        if not v > 0:
            raise ZeroVarianceColumn(matrix.columns[j])
    norm = centered / np.sqrt(ss)
    r = norm.T @ norm
    r = 0.5 * (r + r.T)
    np.clip(r, -1.0, 1.0, out=r)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(matrix.columns, r)


def write_correlation(corr: CorrelationMatrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([""] + list(corr.columns))
        for name, row in zip(corr.columns, corr.values.tolist()):
            writer.writerow([name] + [repr(v) for v in row])
