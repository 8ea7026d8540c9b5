"""Experiment harness.

Runs the full train / calibrate / evaluate / aggregate loop over repeated
stratified cross-validation folds and persists per-fold artifacts plus the
aggregate table.  Within one fold the uncalibrated variant of a model is
trained on the whole training portion, while the calibrated variants share
one underlying model trained on the proper-training part only, with each
calibrator fitted on the held-out calibration part.

All outputs are deterministic for a fixed config and seed: per-model
random streams are derived from (seed, repetition, fold, role), artifacts
are written in sorted order, and JSON floats use repr round-tripping.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from venncal.calibration import (
    VennAbersCalibrator,
    apply_platt,
    fit_platt,
    isotonic_calibrate,
    pava,
)
from venncal.data import Dataset, FoldSplit, load_csv, repeated_stratified_kfold, write_split_manifest
from venncal.metrics import EvaluationReport, evaluate, reliability_bins
from venncal.models import ScoreTable, fit_forest, fit_logistic, fit_tree, load_score_table

__all__ = [
    "AggregateRow",
    "AggregateTable",
    "ExperimentConfig",
    "calibrate_scores",
    "export_reliability",
    "load_fold_predictions",
    "run_experiment",
    "write_reliability_csv",
]

KNOWN_MODELS = ("tree", "forest", "logistic", "external-scores")
KNOWN_CALIBRATORS = ("none", "venn-abers", "platt", "isotonic")

PREDICTION_COLUMNS = ("instance_id", "label", "score", "p0", "p1", "point")
RELIABILITY_COLUMNS = ("bin_low", "bin_high", "count", "mop", "foc")
CALIBRATED_SCORE_COLUMNS = ("instance_id", "fold_id", "score", "p0", "p1", "point")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a reproducible experiment run needs."""

    dataset_path: str | None = None
    models: tuple[str, ...] = ("tree", "forest", "logistic")
    calibrators: tuple[str, ...] = ("none", "venn-abers", "platt", "isotonic")
    k: int = 10
    repetitions: int = 10
    calibration_fraction: float = 1.0 / 3.0
    seed: int = 0
    output_dir: str | None = None
    bins: int = 10
    bin_mode: str = "width"
    score_table_path: str | None = None
    n_trees: int = 100
    tree_min_samples_leaf: int = 6
    jobs: int = 1

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.models or not self.calibrators:
            raise ValueError("at least one model and one calibrator must be selected")
        for model in self.models:
            if model not in KNOWN_MODELS:
                raise ValueError(f"unknown model {model!r} (choose from {KNOWN_MODELS})")
        for cal in self.calibrators:
            if cal not in KNOWN_CALIBRATORS:
                raise ValueError(f"unknown calibrator {cal!r} (choose from {KNOWN_CALIBRATORS})")
        needs_data = any(m != "external-scores" for m in self.models)
        if needs_data and not self.dataset_path:
            raise ValueError("dataset_path is required for tree/forest/logistic models")
        if "external-scores" in self.models and not self.score_table_path:
            raise ValueError("score_table_path is required for the external-scores model")
        if self.bin_mode not in ("width", "frequency"):
            raise ValueError("bin_mode must be 'width' or 'frequency'")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        coerced = dict(data)
        for key in ("models", "calibrators"):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(coerced[key])
        return cls(**coerced)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# aggregate table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AggregateRow:
    model: str
    calibrator: str
    n_folds: int
    mean_accuracy: float
    mean_auc: float
    mean_precision: float | None
    precision_fold_count: int
    mean_recall: float
    positive_prediction_total: int
    mean_ece: float
    mean_ece1: float | None
    ece1_fold_count: int

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "calibrator": self.calibrator,
            "n_folds": self.n_folds,
            "accuracy": self.mean_accuracy,
            "auc": self.mean_auc,
            "precision": self.mean_precision,
            "precision_fold_count": self.precision_fold_count,
            "recall": self.mean_recall,
            "positive_predictions": self.positive_prediction_total,
            "ece": self.mean_ece,
            "ece1": self.mean_ece1,
            "ece1_fold_count": self.ece1_fold_count,
        }


@dataclass(frozen=True)
class AggregateTable:
    rows: tuple[AggregateRow, ...]

    def row(self, model: str, calibrator: str) -> AggregateRow:
        for r in self.rows:
            if r.model == model and r.calibrator == calibrator:
                return r
        raise KeyError(f"no aggregate row for ({model}, {calibrator})")

    def to_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.rows], sort_keys=True, indent=1)

    def to_text(self) -> str:
        def fmt(value, digits=3):
            return "  -  " if value is None else f"{value:.{digits}f}"

        lines = [
            f"{'model':<16}{'cal':<12}{'acc':>7}{'auc':>7}{'prec':>7}{'rec':>7}{'#pos':>7}{'ece':>8}{'ece1':>8}"
        ]
        for r in self.rows:
            lines.append(
                f"{r.model:<16}{r.calibrator:<12}"
                f"{fmt(r.mean_accuracy):>7}{fmt(r.mean_auc):>7}{fmt(r.mean_precision):>7}"
                f"{fmt(r.mean_recall):>7}{r.positive_prediction_total:>7}"
                f"{fmt(r.mean_ece):>8}{fmt(r.mean_ece1):>8}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# per-fold work
# ---------------------------------------------------------------------------

def _model_seed(seed: int, repetition: int, fold: int, role: str) -> int:
    role_code = {"tree-full": 0, "tree-proper": 1, "forest-full": 2, "forest-proper": 3, "logistic": 4}[role]
    ss = np.random.SeedSequence(entropy=(seed, repetition, fold, role_code))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _calibrated(kind: str, cal_scores, cal_labels, test_scores):
    """(probability, p0, p1) arrays for one calibrator on one fold."""
    if kind == "venn-abers":
        calibrator = VennAbersCalibrator(cal_scores, cal_labels)
        p0, p1, point = calibrator.intervals(test_scores)
        return point, p0, p1
    if kind == "platt":
        fit = fit_platt(cal_scores, cal_labels)
        p = apply_platt(fit, test_scores)
        return p, p, p
    if kind == "isotonic":
        fit = pava(cal_scores, cal_labels)
        p = isotonic_calibrate(fit, test_scores)
        return p, p, p
    raise ValueError(f"unknown calibrator kind {kind!r}")


@dataclass
class _FoldOutcome:
    repetition: int
    fold: int
    model: str
    calibrator: str
    instance_ids: np.ndarray
    labels: np.ndarray
    scores: np.ndarray  # underlying model score before calibration
    p0: np.ndarray
    p1: np.ndarray
    point: np.ndarray  # probability used for evaluation
    report: EvaluationReport


def _fold_outcomes(config: ExperimentConfig, dataset: Dataset, split: FoldSplit) -> list[_FoldOutcome]:
    rep, fold = split.repetition_index, split.fold_index
    x, y = dataset.features, dataset.labels
    test_x, test_y = x[split.test_ids], y[split.test_ids]
    cal_x, cal_y = x[split.calibration_ids], y[split.calibration_ids]
    train_ids = split.train_ids
    proper_ids = split.proper_train_ids
    post_hoc = [c for c in config.calibrators if c != "none"]

    outcomes = []

    def emit(model_name, calibrator_name, probability, p0, p1, scores):
        probability = np.asarray(probability, dtype=np.float64)
        report = evaluate(probability, test_y, m=config.bins, mode=config.bin_mode)
        outcomes.append(
            _FoldOutcome(
                repetition=rep,
                fold=fold,
                model=model_name,
                calibrator=calibrator_name,
                instance_ids=split.test_ids,
                labels=test_y,
                scores=np.asarray(scores, dtype=np.float64),
                p0=np.asarray(p0, dtype=np.float64),
                p1=np.asarray(p1, dtype=np.float64),
                point=probability,
                report=report,
            )
        )

    for model_name in config.models:
        if model_name == "external-scores":
            continue  # handled outside the dataset fold loop
        try:
            if model_name == "logistic":
                # evaluated uncalibrated only; calibration would consume the
                # very split the paper's comparison baseline does not use
                if "none" in config.calibrators:
                    model = fit_logistic(x[train_ids], y[train_ids])
                    scores = model.score_many(test_x)
                    emit(model_name, "none", scores, scores, scores, scores)
                continue

            if model_name == "tree":
                def fit(ids, role):
                    return fit_tree(
                        x[ids],
                        y[ids],
                        min_samples_leaf=config.tree_min_samples_leaf,
                        seed=_model_seed(config.seed, rep, fold, role),
                    )
            else:
                def fit(ids, role):
                    return fit_forest(
                        x[ids],
                        y[ids],
                        n_trees=config.n_trees,
                        seed=_model_seed(config.seed, rep, fold, role),
                    )

            if "none" in config.calibrators:
                full_model = fit(train_ids, f"{model_name}-full")
                scores = full_model.score_many(test_x)
                emit(model_name, "none", scores, scores, scores, scores)
            if post_hoc:
                proper_model = fit(proper_ids, f"{model_name}-proper")
                cal_scores = proper_model.score_many(cal_x)
                test_scores = proper_model.score_many(test_x)
                for kind in post_hoc:
                    probability, p0, p1 = _calibrated(kind, cal_scores, cal_y, test_scores)
                    emit(model_name, kind, probability, p0, p1, test_scores)
        except Exception as err:
            raise RuntimeError(
                f"repetition {rep} fold {fold} model {model_name}: {err}"
            ) from err
    return outcomes


def _external_outcomes(config: ExperimentConfig, table: ScoreTable) -> list[_FoldOutcome]:
    outcomes = []
    for fold in table.folds():
        cal_ids, cal_scores, cal_labels = table.select(fold, "calibration")
        test_ids, test_scores, test_labels = table.select(fold, "test")
        if test_ids.size == 0 or cal_ids.size == 0:
            raise RuntimeError(
                f"external-scores fold {fold}: missing "
                f"{'test' if test_ids.size == 0 else 'calibration'} partition"
            )
        for kind in config.calibrators:
            try:
                if kind == "none":
                    probability = p0 = p1 = test_scores
                else:
                    probability, p0, p1 = _calibrated(kind, cal_scores, cal_labels, test_scores)
                report = evaluate(probability, test_labels, m=config.bins, mode=config.bin_mode)
            except Exception as err:
                raise RuntimeError(f"external-scores fold {fold} calibrator {kind}: {err}") from err
            outcomes.append(
                _FoldOutcome(
                    repetition=0,
                    fold=fold,
                    model="external-scores",
                    calibrator=kind,
                    instance_ids=test_ids,
                    labels=test_labels,
                    scores=test_scores,
                    p0=np.asarray(p0, dtype=np.float64),
                    p1=np.asarray(p1, dtype=np.float64),
                    point=np.asarray(probability, dtype=np.float64),
                    report=report,
                )
            )
    return outcomes


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _artifact_stem(outcome: _FoldOutcome) -> str:
    return f"rep{outcome.repetition}_fold{outcome.fold}_{outcome.model}_{outcome.calibrator}"


def _write_fold_artifacts(folds_dir: Path, outcome: _FoldOutcome) -> None:
    stem = folds_dir / _artifact_stem(outcome)
    payload = {
        "repetition": outcome.repetition,
        "fold": outcome.fold,
        "model": outcome.model,
        "calibrator": outcome.calibrator,
        **outcome.report.to_dict(),
    }
    stem.with_suffix(".json").write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    with stem.with_suffix(".csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(PREDICTION_COLUMNS)
        for i in range(outcome.instance_ids.size):
            writer.writerow(
                [
                    int(outcome.instance_ids[i]),
                    int(outcome.labels[i]),
                    repr(float(outcome.scores[i])),
                    repr(float(outcome.p0[i])),
                    repr(float(outcome.p1[i])),
                    repr(float(outcome.point[i])),
                ]
            )


def load_fold_predictions(output_dir, model: str, calibrator: str):
    """Pool (probabilities, labels) over all fold prediction CSVs of a pair."""
    folds_dir = Path(output_dir) / "folds"
    paths = sorted(folds_dir.glob(f"rep*_fold*_{model}_{calibrator}.csv"))
    if not paths:
        raise FileNotFoundError(f"no fold predictions for ({model}, {calibrator}) under {folds_dir}")
    probabilities = []
    labels = []
    for path in paths:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            for row in reader:
                probabilities.append(float(row["point"]))
                labels.append(int(row["label"]))
    return np.asarray(probabilities), np.asarray(labels)


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def _aggregate(config: ExperimentConfig, outcomes: list[_FoldOutcome]) -> AggregateTable:
    pairs: list[tuple[str, str]] = []
    for model in config.models:
        if model == "logistic":
            if "none" in config.calibrators:
                pairs.append((model, "none"))
            continue
        for cal in config.calibrators:
            pairs.append((model, cal))
    rows = []
    for model, cal in pairs:
        cell = [o for o in outcomes if o.model == model and o.calibrator == cal]
        if not cell:
            raise RuntimeError(f"no fold results for configured pair ({model}, {cal})")
        cell.sort(key=lambda o: (o.repetition, o.fold))
        reports = [o.report for o in cell]
        precisions = [r.precision for r in reports if r.precision is not None]
        ece1s = [r.ece1 for r in reports if r.ece1 is not None]
        rows.append(
            AggregateRow(
                model=model,
                calibrator=cal,
                n_folds=len(cell),
                mean_accuracy=float(np.mean([r.accuracy for r in reports])),
                mean_auc=float(np.mean([r.auc for r in reports])),
                mean_precision=float(np.mean(precisions)) if precisions else None,
                precision_fold_count=len(precisions),
                mean_recall=float(np.mean([r.recall for r in reports])),
                positive_prediction_total=int(sum(r.positive_prediction_count for r in reports)),
                mean_ece=float(np.mean([r.ece for r in reports])),
                mean_ece1=float(np.mean(ece1s)) if ece1s else None,
                ece1_fold_count=len(ece1s),
            )
        )
    return AggregateTable(rows=tuple(rows))


def _run_fold(args):
    config, dataset, split = args
    return _fold_outcomes(config, dataset, split)


def run_experiment(config: ExperimentConfig, progress=None) -> AggregateTable:
    """Run the configured experiment; returns (and optionally writes) the table.

    With an output directory set, writes per-fold metric JSONs and
    prediction CSVs, the split manifest, aggregate.json / aggregate.csv and
    a human-readable table.txt.  Fold-level errors abort the run with the
    fold named; identical config and seed produce byte-identical artifacts
    regardless of the jobs count.
    """
    needs_data = any(m != "external-scores" for m in config.models)
    outcomes: list[_FoldOutcome] = []
    splits: list[FoldSplit] = []
    dataset = None
    if needs_data:
        dataset = load_csv(config.dataset_path)
        splits = repeated_stratified_kfold(
            dataset,
            k=config.k,
            repetitions=config.repetitions,
            calibration_fraction=config.calibration_fraction,
            seed=config.seed,
        )
        if config.jobs > 1:
            with Pool(processes=config.jobs) as pool:
                for i, fold_result in enumerate(
                    pool.imap(_run_fold, [(config, dataset, s) for s in splits])
                ):
                    outcomes.extend(fold_result)
                    if progress:
                        progress(i + 1, len(splits))
        else:
            for i, split in enumerate(splits):
                outcomes.extend(_fold_outcomes(config, dataset, split))
                if progress:
                    progress(i + 1, len(splits))
    if "external-scores" in config.models:
        table = load_score_table(config.score_table_path)
        outcomes.extend(_external_outcomes(config, table))

    outcomes.sort(key=lambda o: (o.model, o.calibrator, o.repetition, o.fold))
    aggregate = _aggregate(config, outcomes)

    if config.output_dir:
        out = Path(config.output_dir)
        folds_dir = out / "folds"
        folds_dir.mkdir(parents=True, exist_ok=True)
        for outcome in outcomes:
            _write_fold_artifacts(folds_dir, outcome)
        if splits:
            write_split_manifest(out / "splits.json", splits)
        (out / "aggregate.json").write_text(aggregate.to_json(), encoding="utf-8")
        (out / "table.txt").write_text(aggregate.to_text(), encoding="utf-8")
        with (out / "aggregate.csv").open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["model", "calibrator", "n_folds", "accuracy", "auc", "precision",
                 "recall", "positive_predictions", "ece", "ece1"]
            )
            for r in aggregate.rows:
                writer.writerow(
                    [r.model, r.calibrator, r.n_folds]
                    + [
                        "" if v is None else repr(v) if isinstance(v, float) else v
                        for v in (
                            r.mean_accuracy, r.mean_auc, r.mean_precision,
                            r.mean_recall, r.positive_prediction_total,
                            r.mean_ece, r.mean_ece1,
                        )
                    ]
                )
    return aggregate


# ---------------------------------------------------------------------------
# score-table calibration and reliability export
# ---------------------------------------------------------------------------

def calibrate_scores(score_table_path, calibrator_kind: str, output_path) -> int:
    """Calibrate an external score table fold by fold; returns rows written.

    For every fold the calibrator is fitted on the calibration partition
    and applied to the test partition.  Output columns:
    instance_id,fold_id,score,p0,p1,point (p0 == p1 == point for the
    single-valued calibrators).
    """
    if calibrator_kind not in ("venn-abers", "platt", "isotonic"):
        raise ValueError(f"unknown calibrator kind {calibrator_kind!r}")
    table = load_score_table(score_table_path)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with output_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CALIBRATED_SCORE_COLUMNS)
        for fold in table.folds():
            cal_ids, cal_scores, cal_labels = table.select(fold, "calibration")
            test_ids, test_scores, _ = table.select(fold, "test")
            if cal_ids.size == 0 or test_ids.size == 0:
                missing = "calibration" if cal_ids.size == 0 else "test"
                raise ValueError(f"fold {fold}: missing {missing} partition")
            try:
                point, p0, p1 = _calibrated(calibrator_kind, cal_scores, cal_labels, test_scores)
            except ValueError as err:
                raise ValueError(f"fold {fold}: {err}") from err
            for i in range(test_ids.size):
                writer.writerow(
                    [
                        int(test_ids[i]),
                        fold,
                        repr(float(test_scores[i])),
                        repr(float(p0[i])),
                        repr(float(p1[i])),
                        repr(float(point[i])),
                    ]
                )
                written += 1
    return written


def export_reliability(probabilities, labels, scope: str = "all", bins: int = 10, mode: str = "width"):
    """Reliability bins for the requested scope; None if the scope is empty."""
    if scope not in ("all", "minority"):
        raise ValueError("scope must be 'all' or 'minority'")
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels)
    if scope == "minority":
        keep = p >= 0.5
        if not np.any(keep):
            return None
        p, y = p[keep], y[keep]
    return reliability_bins(p, y, m=bins, mode=mode)


def write_reliability_csv(path, bins) -> None:
    """Write plot-ready bins; an empty file (header only) when bins is None."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(RELIABILITY_COLUMNS)
        if bins is None:
            return
        for lo, hi, count, mop, foc in bins.rows():
            writer.writerow(
                [repr(lo), repr(hi), count, "" if count == 0 else repr(mop), "" if count == 0 else repr(foc)]
            )
