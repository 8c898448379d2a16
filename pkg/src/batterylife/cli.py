"""Command-line orchestration.

    batterylife synth     write a seeded synthetic corpus, one CSV per experiment
    batterylife validate  per-experiment defect summary
    batterylife featurize cumulative-AUC features, same CSV layout
    batterylife correlate pooled 17 x 17 predictor correlation CSV
    batterylife pca       PCA model JSON + explained-variance CSV
    batterylife train     fit one model (rf or nn) and save it as JSON
    batterylife compare   the full comparison: table, models, fit series
    batterylife export    fit series of a saved model on one experiment

Every subcommand accepts ``--config FILE`` (flat YAML with a ``version``
key); command-line flags override values from the file. Exit codes:
0 success, 2 config error, 3 data error, 4 numerical failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from . import decomposition, evaluation, features, forest, mlp, synthgen, telemetry
from .errors import BatteryLifeError, InvalidConfig, IoError, UnknownExperiment

CONFIG_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    version: int = CONFIG_VERSION
    data_dir: str = "data"
    output_dir: str = "out"
    sample_interval_s: float = 1.0
    cleaning: str = "interpolate"
    standardize: bool = True
    pca_thresholds: tuple = (0.99, 0.99999)
    holdout: str | None = None
    seed: int = 0
    n_jobs: int = 1
    pca_k_rf: int = 2
    pca_k_nn: int = 5
    rf_n_trees: int = 50
    rf_max_depth: int = 16
    rf_min_samples_leaf: int = 5
    rf_feature_subsample: int | None = None
    rf_bootstrap: bool = True
    nn_architectures: tuple = ("3", "5", "5,1", "5,3")
    nn_learning_rate: float = 1e-3
    nn_momentum: float = 0.9
    nn_batch_size: int = 256
    nn_epochs: int = 50
    nn_early_stop_patience: int = 0
    synth_n_experiments: int = 9
    synth_rows_per_experiment: int = 5000
    synth_latent_factor_count: int = 2
    synth_noise_scale: float = 0.01
    synth_response_uniform_fraction: float = 0.6

    def validate(self) -> "PipelineConfig":
        if self.version != CONFIG_VERSION:
            raise InvalidConfig(f"unsupported config version {self.version}")
        if self.cleaning not in telemetry.CLEANING_POLICIES:
            raise InvalidConfig(f"cleaning must be one of {telemetry.CLEANING_POLICIES}")
        if not self.sample_interval_s > 0:
            raise InvalidConfig("sample_interval_s must be positive")
        for t in self.pca_thresholds:
            if not 0 < t <= 1:
                raise InvalidConfig(f"PCA threshold {t} outside (0, 1]")
        for k in (self.pca_k_rf, self.pca_k_nn):
            if not 1 <= k <= len(telemetry.PREDICTORS):
                raise InvalidConfig(f"PCA width {k} outside [1, 17]")
        self.forest_config().validate(self.pca_k_rf)
        for arch in self.architectures():
            self.mlp_config(arch).validate()
        return self

    def architectures(self) -> tuple:
        return tuple(parse_hidden(a) for a in self.nn_architectures)

    def forest_config(self) -> forest.ForestConfig:
        return forest.ForestConfig(
            n_trees=self.rf_n_trees,
            max_depth=self.rf_max_depth,
            min_samples_leaf=self.rf_min_samples_leaf,
            feature_subsample=self.rf_feature_subsample,
            bootstrap=self.rf_bootstrap,
            seed=evaluation.derive_seed(self.seed, 0),
        )

    def mlp_config(self, hidden=(5,), index: int = 1) -> mlp.MlpConfig:
        return mlp.MlpConfig(
            hidden_layers=tuple(hidden),
            input_dim=self.pca_k_nn,
            learning_rate=self.nn_learning_rate,
            momentum=self.nn_momentum,
            batch_size=self.nn_batch_size,
            epochs=self.nn_epochs,
            seed=evaluation.derive_seed(self.seed, index),
            early_stop_patience=self.nn_early_stop_patience,
        )

    def comparison_config(self) -> evaluation.ComparisonConfig:
        return evaluation.ComparisonConfig(
            holdout=self.holdout,
            cleaning=self.cleaning,
            standardize=self.standardize,
            pca_k_rf=self.pca_k_rf,
            pca_k_nn=self.pca_k_nn,
            forest_config=self.forest_config(),
            mlp_config=self.mlp_config(),
            architectures=self.architectures(),
            seed=self.seed,
            n_jobs=self.n_jobs,
        )

    def synth_config(self) -> synthgen.SynthConfig:
        return synthgen.SynthConfig(
            n_experiments=self.synth_n_experiments,
            rows_per_experiment=self.synth_rows_per_experiment,
            seed=self.seed,
            latent_factor_count=self.synth_latent_factor_count,
            noise_scale=self.synth_noise_scale,
            response_uniform_fraction=self.synth_response_uniform_fraction,
            sample_interval_s=self.sample_interval_s,
        )


def parse_hidden(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(h) for h in text)
    try:
        sizes = tuple(int(h) for h in str(text).replace(" ", "").split(",") if h)
    except ValueError:
        raise InvalidConfig(f"bad hidden layer list {text!r}") from None
    if not sizes:
        raise InvalidConfig(f"bad hidden layer list {text!r}")
    return sizes


def load_config(path=None, **overrides) -> PipelineConfig:
    values = {}
    if path is not None:
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise IoError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise InvalidConfig(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidConfig("config file must be a flat mapping")
        values.update(doc)
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(unknown)}")
    for key in ("pca_thresholds", "nn_architectures"):
        if key in values:
            values[key] = tuple(str(v) if key == "nn_architectures" else float(v) for v in values[key])
    return PipelineConfig(**values).validate()


def dump_config(config: PipelineConfig) -> str:
    doc = asdict(config)
    doc["pca_thresholds"] = list(doc["pca_thresholds"])
    doc["nn_architectures"] = list(doc["nn_architectures"])
    return yaml.safe_dump(doc, sort_keys=False)


def _ensure_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {path}: {exc}") from exc
    return path


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(cfg: PipelineConfig, args) -> int:
    out = _ensure_dir(args.out or cfg.data_dir)
    corpus = synthgen.generate_corpus(cfg.synth_config())
    for frame in corpus:
        telemetry.write_experiment(frame, out / f"{frame.experiment_id}.csv")
    print(f"wrote {len(corpus)} experiments x {cfg.synth_rows_per_experiment} rows to {out}")
    return 0


def cmd_validate(cfg: PipelineConfig, args) -> int:
    corpus = telemetry.load_corpus(args.data_dir or cfg.data_dir, sample_interval_s=cfg.sample_interval_s)
    print(f"{'experiment':<16}{'rows':>9}{'missing':>9}{'nonfinite':>11}{'neg_resp':>10}")
    totals = [0, 0, 0]
    for frame in corpus:
        r = telemetry.validate_frame(frame)
        totals = [totals[0] + r.missing_cells, totals[1] + r.nonfinite_cells,
                  totals[2] + r.negative_response_rows]
        print(f"{r.experiment_id:<16}{r.n_rows:>9}{r.missing_cells:>9}"
              f"{r.nonfinite_cells:>11}{r.negative_response_rows:>10}")
    print(f"{'total':<16}{'':>9}{totals[0]:>9}{totals[1]:>11}{totals[2]:>10}")
    return 0


def cmd_featurize(cfg: PipelineConfig, args) -> int:
    out = _ensure_dir(args.out)
    corpus = telemetry.load_corpus(args.data_dir or cfg.data_dir, sample_interval_s=cfg.sample_interval_s)
    for frame in corpus:
        clean = telemetry.clean_frame(frame, cfg.cleaning)
        engineered = features.as_frame(features.featurize(clean), clean)
        telemetry.write_experiment(engineered, out / f"{frame.experiment_id}.csv")
    print(f"wrote {len(corpus)} engineered files to {out}")
    return 0


def _engineered(cfg, args) -> features.FeatureMatrix:
    corpus = telemetry.load_corpus(args.data_dir or cfg.data_dir, sample_interval_s=cfg.sample_interval_s)
    return features.stack_features([
        features.FeatureMatrix(f.experiment_id, f.schema.predictors, f.predictors, f.response)
        for f in corpus
    ])


def cmd_correlate(cfg: PipelineConfig, args) -> int:
    corr = features.correlation(_engineered(cfg, args))
    out = Path(args.out)
    _ensure_dir(out.parent)
    features.write_correlation(corr, out)
    print(f"wrote {len(corr.columns)}x{len(corr.columns)} correlation matrix to {out}")
    return 0


def cmd_pca(cfg: PipelineConfig, args) -> int:
    out = _ensure_dir(args.out_dir)
    model = decomposition.fit_pca(_engineered(cfg, args), standardize=cfg.standardize)
    decomposition.save_model(model, out / "pca.json")
    decomposition.write_explained_variance(model, out / "explained_variance.csv")
    for t in cfg.pca_thresholds:
        print(f"components for {t:g} of variance: {decomposition.select_components(model, t)}")
    return 0


def _save_pipeline(path, name, model, pca, k, cfg) -> None:
    doc = evaluation.pipeline_document(name, model, pca, k, cfg.cleaning, cfg.sample_interval_s)
    _write_text(path, json.dumps(doc))


def cmd_train(cfg: PipelineConfig, args) -> int:
    corpus = telemetry.load_corpus(args.data_dir or cfg.data_dir, sample_interval_s=cfg.sample_interval_s)
    ccfg = cfg.comparison_config()
    plan, train, test = evaluation.prepare(corpus, ccfg)
    pca = decomposition.fit_pca(train, standardize=cfg.standardize)
    if args.model == "rf":
        k = cfg.pca_k_rf
        name = "RF"
        model = forest.fit_forest(decomposition.transform(pca, train, k), train.response,
                                  cfg.forest_config(), n_jobs=cfg.n_jobs)
        pred = forest.predict_forest(model, decomposition.transform(pca, test, k))
    else:
        k = cfg.pca_k_nn
        hidden = parse_hidden(args.hidden)
        name = evaluation.arch_name(hidden)
        # same seed derivation as compare, so both produce the same network
        archs = cfg.architectures()
        mcfg = cfg.mlp_config(hidden, archs.index(hidden) + 1 if hidden in archs else len(archs) + 1)
        model = mlp.train(mlp.init_mlp(mcfg), decomposition.transform(pca, train, k), train.response, mcfg)
        pred = mlp.predict_mlp(model, decomposition.transform(pca, test, k))
    out = Path(args.out)
    _ensure_dir(out.parent)
    _save_pipeline(out, name, model, pca, k, cfg)
    print(f"{name}: trained on {', '.join(plan.train_ids)}; "
          f"test MSE on {', '.join(plan.test_ids)} = {evaluation.mse(pred, test.response):.1f}")
    return 0


def cmd_compare(cfg: PipelineConfig, args) -> int:
    corpus = telemetry.load_corpus(cfg.data_dir, sample_interval_s=cfg.sample_interval_s)
    result = evaluation.run_comparison(corpus, cfg.comparison_config())
    out = _ensure_dir(cfg.output_dir)
    models_dir = _ensure_dir(out / "models")
    fits_dir = _ensure_dir(out / "fits")
    text = evaluation.format_table(result)
    _write_text(out / "comparison.txt", text)
    evaluation.write_table_csv(result, out / "comparison.csv")
    _write_text(out / "config.yaml", dump_config(cfg))
    decomposition.save_model(result.pca, out / "pca.json")
    for report in result.reports:
        slug = _slug(report.model)
        k = report.input_dim
        _save_pipeline(models_dir / f"{slug}.json", report.model, result.models[report.model],
                       result.pca, k, cfg)
        evaluation.export_fit_series(report, fits_dir / f"{slug}.csv")
    print(text, end="")
    return 0


def cmd_export(cfg: PipelineConfig, args) -> int:
    try:
        doc = json.loads(Path(args.model).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {args.model}: {exc}") from exc
    data_dir = Path(args.data_dir or cfg.data_dir)
    path = data_dir / f"{args.experiment}.csv"
    if not path.exists():
        raise UnknownExperiment(f"no experiment file {path}")
    frame = telemetry.load_experiment(path, sample_interval_s=doc.get("sample_interval_s", 1.0))
    report = evaluation.predict_frame(doc, frame)
    out = Path(args.out)
    _ensure_dir(out.parent)
    evaluation.export_fit_series(report, out)
    print(f"{report.model} on {report.experiment_id}: MSE {report.test_mse:.1f}; wrote {out}")
    return 0


def _slug(name: str) -> str:
    return name.lower().replace("[", "").replace("]", "").replace(",", "-")


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batterylife", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat YAML config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--interval", type=float, dest="sample_interval_s",
                       help="seconds between rows")
        return p

    p = add("synth", "write a synthetic corpus")
    p.add_argument("--out", help="output directory (default: data_dir)")
    p.add_argument("--n-experiments", type=int, dest="synth_n_experiments")
    p.add_argument("--rows", type=int, dest="synth_rows_per_experiment")
    p.add_argument("--latent-factors", type=int, dest="synth_latent_factor_count")
    p.add_argument("--noise-scale", type=float, dest="synth_noise_scale")

    p = add("validate", "summarize defects per experiment")
    p.add_argument("data_dir", nargs="?")

    p = add("featurize", "write cumulative-AUC feature CSVs")
    p.add_argument("--data-dir")
    p.add_argument("--out", required=True)
    p.add_argument("--cleaning", choices=telemetry.CLEANING_POLICIES)

    p = add("correlate", "pooled predictor correlation of engineered CSVs")
    p.add_argument("--data-dir")
    p.add_argument("--out", required=True)

    p = add("pca", "fit PCA on engineered CSVs")
    p.add_argument("--data-dir")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-standardize", action="store_false", dest="standardize", default=None)

    p = add("train", "fit a single model")
    p.add_argument("--data-dir")
    p.add_argument("--model", choices=("rf", "nn"), required=True)
    p.add_argument("--hidden", default="5", help="hidden layer sizes, e.g. 5 or 5,3")
    p.add_argument("--holdout")
    p.add_argument("--pca-k-rf", type=int)
    p.add_argument("--pca-k-nn", type=int)
    p.add_argument("--cleaning", choices=telemetry.CLEANING_POLICIES)
    p.add_argument("--out", required=True)

    p = add("compare", "run the full model comparison")
    p.add_argument("--data-dir")
    p.add_argument("--output-dir")
    p.add_argument("--holdout")
    p.add_argument("--pca-k-rf", type=int)
    p.add_argument("--pca-k-nn", type=int)
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--cleaning", choices=telemetry.CLEANING_POLICIES)

    p = add("export", "fit series of a saved model on one experiment")
    p.add_argument("--model", required=True, help="model JSON written by train or compare")
    p.add_argument("--data-dir")
    p.add_argument("--experiment", required=True)
    p.add_argument("--out", required=True)
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "featurize": cmd_featurize,
    "correlate": cmd_correlate,
    "pca": cmd_pca,
    "train": cmd_train,
    "compare": cmd_compare,
    "export": cmd_export,
}

_CONFIG_FLAGS = {f.name for f in fields(PipelineConfig)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_FLAGS}
    if args.command in ("featurize", "correlate", "pca", "train", "export", "validate"):
        # for these commands data_dir is read directly from args
        overrides.pop("data_dir", None)
    try:
        cfg = load_config(args.config, **overrides)
        return COMMANDS[args.command](cfg, args)
    except BatteryLifeError as exc:
        where = f" [{exc.stage}]" if exc.stage else ""
        print(f"error{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IoError.exit_code


if __name__ == "__main__":
    sys.exit(main())
