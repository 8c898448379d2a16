"""Principal component analysis on engineered features.

The covariance matrix is formed explicitly (p x p, p = 17) and diagonalised
with cyclic Jacobi rotations, which keeps memory flat in the row count and
gives fully deterministic axes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoError, KOutOfRange, SchemaMismatch, TooFewRows, ZeroVarianceColumn
from .features import FeatureMatrix

FORMAT = "batterylife.pca"
VERSION = 1

_BLOCK_ROWS = 8192


@dataclass(eq=False)
class PcaModel:
    columns: tuple
    feature_means: np.ndarray
    feature_scales: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    standardize: bool = True
    n_samples: int = 0

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def cumulative_ratio(self) -> np.ndarray:
        return np.cumsum(self.explained_variance_ratio)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "columns": list(self.columns),
            "standardize": self.standardize,
            "n_samples": self.n_samples,
            "feature_means": self.feature_means.tolist(),
            "feature_scales": self.feature_scales.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PcaModel":
        if doc.get("format") != FORMAT or doc.get("version") != VERSION:
            raise SchemaMismatch(f"not a {FORMAT} v{VERSION} document")
        return cls(
            columns=tuple(doc["columns"]),
            feature_means=np.array(doc["feature_means"], dtype=np.float64),
            feature_scales=np.array(doc["feature_scales"], dtype=np.float64),
            components=np.array(doc["components"], dtype=np.float64),
            eigenvalues=np.array(doc["eigenvalues"], dtype=np.float64),
            explained_variance_ratio=np.array(doc["explained_variance_ratio"], dtype=np.float64),
            standardize=bool(doc["standardize"]),
            n_samples=int(doc["n_samples"]),
        )


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps over the upper triangle in row order until the off-diagonal
    Frobenius norm falls below ``tol`` times the full Frobenius norm.
    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as columns,
    in the order they sit on the diagonal (unsorted).
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("jacobi_eigh needs a square matrix")
    v = np.eye(n)
    total = np.sqrt(np.sum(a * a))
    if total == 0.0:
        return np.zeros(n), v
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a[offdiag] ** 2))
        if off < tol * total:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def _orient(axes: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    axes = axes.copy()
    for i, row in enumerate(axes):
        if row[np.argmax(np.abs(row))] < 0:
            axes[i] = -row
    return axes


def column_means(x: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(x[:, j]) for j in range(x.shape[1])]) / x.shape[0]


def scatter_matrix(centered: np.ndarray, block_rows: int = _BLOCK_ROWS) -> np.ndarray:
    """Sum of outer products, accumulated per row block and merged with fsum.

    ``math.fsum`` is exactly rounded, so the merged result does not depend
    on the order in which blocks are combined.
    """
    n, p = centered.shape
    partials = [
        centered[i:i + block_rows].T @ centered[i:i + block_rows]
        for i in range(0, n, block_rows)
    ]
    stacked = np.stack(partials, axis=-1)
    out = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            out[i, j] = out[j, i] = math.fsum(stacked[i, j])
    return out


def _as_array(features, columns=None) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        if columns is not None and tuple(features.columns) != tuple(columns):
            raise SchemaMismatch("feature columns differ from the fitted model")
        return features.values
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise SchemaMismatch("expected a 2-D feature matrix")
    if columns is not None and x.shape[1] != len(columns):
        raise SchemaMismatch(f"expected {len(columns)} columns, got {x.shape[1]}")
    return x


def fit_pca(features, standardize: bool = True, columns=None) -> PcaModel:
    """Fit principal axes to a feature matrix.

    Axes are eigenvectors of the sample covariance (n - 1 denominator) of
    the centred data, or of the correlation matrix when ``standardize`` is on.
    """
    x = _as_array(features)
    if isinstance(features, FeatureMatrix):
        columns = features.columns
    elif columns is None:
        columns = tuple(f"x{j}" for j in range(x.shape[1]))
    n, p = x.shape
    if n <= p:
        raise TooFewRows(f"PCA needs more rows than columns (got {n} x {p})")
    means = column_means(x)
    centered = x - means
    cov = scatter_matrix(centered) / (n - 1)
    if standardize:
        var = np.diag(cov).copy()
        for j, v in enumerate(var):
            if not v > 0:
                raise ZeroVarianceColumn(columns[j])
        scales = np.sqrt(var)
        cov = cov / np.outer(scales, scales)
    else:
        scales = np.ones(p)
    cov = 0.5 * (cov + cov.T)
    values, vectors = jacobi_eigh(cov)
    order = np.argsort(-values, kind="stable")
    values = np.maximum(values[order], 0.0)
    axes = _orient(vectors[:, order].T)
    total = values.sum()
    ratio = values / total if total > 0 else np.zeros(p)
    return PcaModel(
        columns=tuple(columns),
        feature_means=means,
        feature_scales=scales,
        components=axes,
        eigenvalues=values,
        explained_variance_ratio=ratio,
        standardize=standardize,
        n_samples=n,
    )


def _check_k(model: PcaModel, k: int) -> int:
    k = int(k)
    if not 1 <= k <= model.n_features:
        raise KOutOfRange(f"k must lie in [1, {model.n_features}], got {k}")
    return k


def transform(model: PcaModel, features, k: int) -> np.ndarray:
    """Project onto the first ``k`` principal axes (n x k)."""
    k = _check_k(model, k)
    x = _as_array(features, model.columns)
    z = (x - model.feature_means) / model.feature_scales
    return z @ model.components[:k].T


def inverse_transform(model: PcaModel, projected) -> np.ndarray:
    """Map projected coordinates back to feature space.

    With fewer than all components this is the least-squares reconstruction
    from the retained axes.
    """
    projected = np.atleast_2d(np.asarray(projected, dtype=np.float64))
    k = _check_k(model, projected.shape[1])
    z = projected @ model.components[:k]
    return z * model.feature_scales + model.feature_means


def select_components(model: PcaModel, threshold: float) -> int:
    """Smallest k whose cumulative explained-variance ratio reaches ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise KOutOfRange(f"threshold must lie in (0, 1], got {threshold}")
    cum = model.cumulative_ratio()
    # ratios sum to 1 only up to rounding; allow for that at the top end
    hits = np.flatnonzero(cum >= threshold - 1e-12)
    return int(hits[0]) + 1 if hits.size else model.n_features


def save_model(model: PcaModel, path) -> None:
    try:
        Path(path).write_text(json.dumps(model.to_dict(), indent=2))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> PcaModel:
    try:
        return PcaModel.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def write_explained_variance(model: PcaModel, path) -> None:
    """CSV of per-component and cumulative ratios, for an elbow plot."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["component", "eigenvalue", "explained_variance_ratio", "cumulative_ratio"])
        for i, (ev, r, c) in enumerate(
            zip(model.eigenvalues, model.explained_variance_ratio, model.cumulative_ratio()), start=1
        ):
            writer.writerow([i, repr(float(ev)), repr(float(r)), repr(float(c))])
