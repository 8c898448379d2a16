"""Remaining-flight-time prediction from electric aircraft battery telemetry.

Cumulative-AUC features, PCA, a from-scratch random forest and small
tanh networks, evaluated by holding out whole flight experiments.
"""

from .decomposition import PcaModel, fit_pca, inverse_transform, select_components, transform
from .evaluation import (
    ComparisonConfig,
    EvalReport,
    SplitPlan,
    export_fit_series,
    mse,
    run_comparison,
    split_by_experiment,
)
from .features import CorrelationMatrix, FeatureMatrix, correlation, cumulative_auc, featurize
from .forest import ForestConfig, ForestModel, best_split, fit_forest, predict_forest
from .mlp import MlpConfig, MlpModel, forward, gradient, init_mlp, predict_mlp, train
from .synthgen import SynthConfig, generate_corpus
from .telemetry import (
    ColumnSchema,
    TelemetryFrame,
    ValidationReport,
    clean_frame,
    load_corpus,
    load_experiment,
    validate_frame,
)

__version__ = "0.1.0"
