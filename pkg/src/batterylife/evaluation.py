"""Holdout-by-experiment evaluation and the model comparison table.

The pipeline is clean -> featurize -> PCA fitted on the training
experiments only -> random forest on the leading 2 components and four
small networks on the leading 5 -> test MSE on the held-out experiment.

Robustness, meaning how well a model copes with higher-dimensional input,
is a qualitative judgement (Low for the forest, High for the networks).
The table reports it as the input dimensionality each model consumed
rather than inventing a score for it.
"""

from __future__ import annotations

import contextlib
import csv
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import decomposition, features as feat, forest, mlp, telemetry
from .errors import (
    BatteryLifeError,
    EmptyInput,
    IoError,
    LengthMismatch,
    SchemaMismatch,
    UnknownExperiment,
)

TABLE_COLUMNS = ("Model", "Test MSE", "Train MSE", "Computational Time", "Input Dim")


@dataclass(frozen=True)
class SplitPlan:
    train_ids: tuple
    test_ids: tuple


@dataclass(eq=False)
class EvalReport:
    model: str
    test_mse: float
    train_mse: float
    train_time_s: float
    input_dim: int
    experiment_id: str
    actual: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        if len(self.actual) != len(self.predicted) or len(self.actual) == 0:
            raise LengthMismatch("fit series must be non-empty and of equal length")


@dataclass(frozen=True)
class ComparisonConfig:
    holdout: str | None = None
    cleaning: str = "interpolate"
    standardize: bool = True
    pca_k_rf: int = 2
    pca_k_nn: int = 5
    forest_config: forest.ForestConfig = forest.ForestConfig()
    mlp_config: mlp.MlpConfig = mlp.MlpConfig()
    architectures: tuple = mlp.ARCHITECTURES
    seed: int = 0
    n_jobs: int = 1


@dataclass(eq=False)
class ComparisonResult:
    reports: list
    split: SplitPlan
    pca: decomposition.PcaModel
    models: dict
    baseline_mse: float
    train_features: feat.FeatureMatrix = field(repr=False)

    def table(self) -> list:
        return [
            {
                "Model": r.model,
                "Test MSE": r.test_mse,
                "Train MSE": r.train_mse,
                "Computational Time": r.train_time_s,
                "Input Dim": r.input_dim,
            }
            for r in self.reports
        ]


def split_by_experiment(corpus: Sequence, holdout_id) -> SplitPlan:
    """Whole experiments go to test (the holdout) or train, never both."""
    ids = [f.experiment_id if not isinstance(f, str) else f for f in corpus]
    holdout = [holdout_id] if isinstance(holdout_id, str) else list(holdout_id)
    unknown = [h for h in holdout if h not in ids]
    if unknown or not holdout:
        raise UnknownExperiment(f"unknown holdout experiment(s) {unknown or holdout}; have {ids}")
    test = tuple(i for i in ids if i in holdout)
    train = tuple(i for i in ids if i not in holdout)
    return SplitPlan(train, test)


def default_holdout(corpus: Sequence) -> str:
    return max(f.experiment_id for f in corpus)


def mse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if predicted.shape != actual.shape:
        raise LengthMismatch(f"{predicted.size} predictions vs {actual.size} actuals")
    if predicted.size == 0:
        raise EmptyInput("mse of empty vectors")
    r = predicted - actual
    return float(np.mean(r * r))


def derive_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1, np.uint64)[0])


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except BatteryLifeError as exc:
        if exc.stage is None:
            exc.stage = name
        raise


def arch_name(hidden) -> str:
    return "NN-[" + ",".join(str(h) for h in hidden) + "]"


def prepare(corpus: Sequence, config: ComparisonConfig):
    """Clean, featurize and split; returns (split, train features, test features)."""
    telemetry.check_unique_ids(corpus)
    if len(corpus) < 2:
        raise EmptyInput("comparison needs at least two experiments")
    holdout = config.holdout or default_holdout(corpus)
    with _stage("split"):
        plan = split_by_experiment(corpus, holdout)
    with _stage("clean"):
        cleaned = {f.experiment_id: telemetry.clean_frame(f, config.cleaning) for f in corpus}
    with _stage("featurize"):
        engineered = {k: feat.featurize(v) for k, v in cleaned.items()}
    train = feat.stack_features([engineered[i] for i in plan.train_ids], "train")
    test = feat.stack_features([engineered[i] for i in plan.test_ids], "+".join(plan.test_ids))
    return plan, train, test


def run_comparison(corpus: Sequence, config: ComparisonConfig = ComparisonConfig()) -> ComparisonResult:
    """Train the forest and every network architecture and score them on the holdout."""
    plan, train, test = prepare(corpus, config)
    with _stage("pca"):
        pca = decomposition.fit_pca(train, standardize=config.standardize)
        z_train = decomposition.transform(pca, train, max(config.pca_k_rf, config.pca_k_nn))
        z_test = decomposition.transform(pca, test, max(config.pca_k_rf, config.pca_k_nn))

    reports, models = [], {}
    y_train, y_test = train.response, test.response

    with _stage("forest"):
        k = config.pca_k_rf
        fcfg = replace(config.forest_config, seed=derive_seed(config.seed, 0))
        t0 = time.perf_counter()
        rf = forest.fit_forest(z_train[:, :k], y_train, fcfg, n_jobs=config.n_jobs)
        elapsed = time.perf_counter() - t0
        pred = forest.predict_forest(rf, z_test[:, :k])
        reports.append(EvalReport("RF", mse(pred, y_test),
                                  mse(forest.predict_forest(rf, z_train[:, :k]), y_train),
                                  elapsed, k, test.experiment_id, y_test.copy(), pred))
        models["RF"] = rf

    k = config.pca_k_nn
    for i, hidden in enumerate(config.architectures, start=1):
        name = arch_name(hidden)
        with _stage(f"mlp {name}"):
            mcfg = replace(config.mlp_config, hidden_layers=tuple(hidden), input_dim=k,
                           seed=derive_seed(config.seed, i))
            t0 = time.perf_counter()
            net = mlp.train(mlp.init_mlp(mcfg), z_train[:, :k], y_train, mcfg)
            elapsed = time.perf_counter() - t0
            pred = mlp.predict_mlp(net, z_test[:, :k])
            reports.append(EvalReport(name, mse(pred, y_test),
                                      mse(mlp.predict_mlp(net, z_train[:, :k]), y_train),
                                      elapsed, k, test.experiment_id, y_test.copy(), pred))
            models[name] = net

    return ComparisonResult(reports, plan, pca, models, float(np.var(y_test)), train)


def format_table(result: ComparisonResult) -> str:
    """Aligned plain-text rendering; times are rounded to whole seconds."""
    rows = [TABLE_COLUMNS] + [
        (r["Model"], f"{r['Test MSE']:.1f}", f"{r['Train MSE']:.1f}",
         f"{round(r['Computational Time'])} s", str(r["Input Dim"]))
        for r in result.table()
    ]
    widths = [max(len(row[j]) for row in rows) for j in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(cell.ljust(w) if j == 0 else cell.rjust(w)
                       for j, (cell, w) in enumerate(zip(row, widths))) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines.append("")
    lines.append(f"holdout: {', '.join(result.split.test_ids)}    "
                 f"mean-predictor MSE (test response variance): {result.baseline_mse:.1f}")
    return "\n".join(lines) + "\n"


def write_table_csv(result: ComparisonResult, path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["model", "test_mse", "train_mse", "train_time_s", "input_dim"])
            for r in result.reports:
                writer.writerow([r.model, repr(r.test_mse), repr(r.train_mse),
                                 f"{r.train_time_s:.3f}", r.input_dim])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def export_fit_series(report: EvalReport, path) -> Path:
    """CSV of (row index, actual, predicted) for the held-out experiment."""
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["row", "actual_remaining_time_s", "predicted_remaining_time_s"])
            for i, (a, p) in enumerate(zip(report.actual.tolist(), report.predicted.tolist())):
                writer.writerow([i, repr(a), repr(p)])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def read_fit_series(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [(int(r[0]), float(r[1]), float(r[2])) for r in reader]
    idx, actual, predicted = zip(*rows) if rows else ((), (), ())
    return np.array(idx), np.array(actual), np.array(predicted)


def leakage_free(result: ComparisonResult, corpus: Sequence, config: ComparisonConfig) -> bool:
    """Refit PCA on the training experiments alone and compare bit for bit."""
    train_frames = [f for f in corpus if f.experiment_id in result.split.train_ids]
    stacked = feat.stack_features(
        [feat.featurize(telemetry.clean_frame(f, config.cleaning)) for f in train_frames]
    )
    ref = decomposition.fit_pca(stacked, standardize=config.standardize)
    return all(
        np.array_equal(getattr(ref, name), getattr(result.pca, name))
        for name in ("feature_means", "feature_scales", "components", "eigenvalues")
    )


# --------------------------------------------------------------------------
# fitted pipeline documents: PCA + projection width + regressor in one JSON

PIPELINE_FORMAT = "batterylife.pipeline"
PIPELINE_VERSION = 1


def pipeline_document(name: str, model, pca: decomposition.PcaModel, k: int,
                      cleaning: str, sample_interval_s: float) -> dict:
    kind = "rf" if isinstance(model, forest.ForestModel) else "nn"
    return {
        "format": PIPELINE_FORMAT,
        "version": PIPELINE_VERSION,
        "name": name,
        "kind": kind,
        "pca_k": int(k),
        "cleaning": cleaning,
        "sample_interval_s": float(sample_interval_s),
        "pca": pca.to_dict(),
        "model": model.to_dict(),
    }


def load_pipeline_document(doc: dict):
    """Return (name, model, pca, k, cleaning) from a pipeline document."""
    if doc.get("format") != PIPELINE_FORMAT or doc.get("version") != PIPELINE_VERSION:
        raise SchemaMismatch(f"not a {PIPELINE_FORMAT} v{PIPELINE_VERSION} document")
    pca = decomposition.PcaModel.from_dict(doc["pca"])
    if doc["kind"] == "rf":
        model = forest.ForestModel.from_dict(doc["model"])
    else:
        model = mlp.MlpModel.from_dict(doc["model"])
    return doc["name"], model, pca, int(doc["pca_k"]), doc["cleaning"]


def predict_frame(doc: dict, frame: telemetry.TelemetryFrame) -> EvalReport:
    """Score a saved pipeline on one raw experiment."""
    name, model, pca, k, cleaning = load_pipeline_document(doc)
    fm = feat.featurize(telemetry.clean_frame(frame, cleaning))
    z = decomposition.transform(pca, fm, k)
    if isinstance(model, forest.ForestModel):
        pred = forest.predict_forest(model, z)
    else:
        pred = mlp.predict_mlp(model, z)
    return EvalReport(name, mse(pred, fm.response), float("nan"), float("nan"), k,
                      frame.experiment_id, fm.response.copy(), pred)
