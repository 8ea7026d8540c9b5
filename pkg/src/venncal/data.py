"""Dataset ingestion and cross-validation splits.

Loads the predictive-maintenance CSV (AI4I-style column layout by default,
configurable through CsvSchema), mapping the quality letter to an ordinal
code, dropping identifier and failure-mode indicator columns, and taking
the machine-failure column as the binary label.  Also produces repeated
stratified k-fold splits where each fold's training portion is further
divided into a proper-training part and a calibration part.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "AI4I_SCHEMA",
    "CsvSchema",
    "Dataset",
    "FoldSplit",
    "InfeasibleSplitError",
    "ParseError",
    "SchemaError",
    "ValidationError",
    "load_csv",
    "repeated_stratified_kfold",
    "splits_to_manifest",
    "stratified_holdout",
    "write_split_manifest",
]


class SchemaError(ValueError):
    """CSV header does not match the configured schema."""


class ParseError(ValueError):
    """A cell could not be parsed as the expected type."""


class ValidationError(ValueError):
    """A parsed value violates a domain constraint."""


class InfeasibleSplitError(ValueError):
    """Requested split cannot be satisfied by the class counts."""


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of the input CSV.

    quality_column is mapped through quality_codes into the first feature;
    numeric_columns follow in order (csv name, feature name); id_columns
    and indicator_columns are dropped when present.  Any column outside the
    schema is an error.
    """

    quality_column: str = "Type"
    quality_feature_name: str = "quality"
    quality_codes: tuple[tuple[str, float], ...] = (("L", 0.0), ("M", 1.0), ("H", 2.0))
    numeric_columns: tuple[tuple[str, str], ...] = (
        ("Air temperature [K]", "air temperature [K]"),
        ("Process temperature [K]", "process temperature [K]"),
        ("Rotational speed [rpm]", "rotational speed [rpm]"),
        ("Torque [Nm]", "torque [Nm]"),
        ("Tool wear [min]", "tool wear [min]"),
    )
    label_column: str = "Machine failure"
    id_columns: tuple[str, ...] = ("UDI", "Product ID")
    indicator_columns: tuple[str, ...] = ("TWF", "HDF", "PWF", "OSF", "RNF")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return (self.quality_feature_name,) + tuple(name for _, name in self.numeric_columns)

    @property
    def required_columns(self) -> tuple[str, ...]:
        return (self.quality_column,) + tuple(c for c, _ in self.numeric_columns) + (self.label_column,)

    @property
    def optional_columns(self) -> tuple[str, ...]:
        return self.id_columns + self.indicator_columns


AI4I_SCHEMA = CsvSchema()


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix plus binary labels (1 = failure)."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise ValidationError("features must be (n, len(feature_names))")
        if self.labels.shape != (self.features.shape[0],):
            raise ValidationError("labels must be one per row")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValidationError("labels must be 0 or 1")
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n_instances(self) -> int:
        return int(self.labels.size)

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())


def load_csv(path, schema: CsvSchema = AI4I_SCHEMA) -> Dataset:
    """Load the maintenance CSV into a Dataset.

    Row order is preserved.  Errors name the offending column or the
    offending data row (1-based, header excluded).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    quality_map = dict(schema.quality_codes)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        known = set(schema.required_columns) | set(schema.optional_columns)
        for column in schema.required_columns:
            if column not in header:
                raise SchemaError(f"{path}: missing required column {column!r}")
        for column in header:
            if column not in known:
                raise SchemaError(f"{path}: unknown column {column!r}")

        col = {name: header.index(name) for name in header}
        quality_idx = col[schema.quality_column]
        numeric_idx = [(col[c], name) for c, name in schema.numeric_columns]
        label_idx = col[schema.label_column]

        features = []
        labels = []
        for row_number, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {row_number}: expected {len(header)} fields, got {len(row)}")
            quality_raw = row[quality_idx].strip()
            if quality_raw not in quality_map:
                raise ValidationError(
                    f"{path}: row {row_number}: unknown quality value {quality_raw!r} "
                    f"(expected one of {sorted(quality_map)})"
                )
            values = [quality_map[quality_raw]]
            for column_idx, _ in numeric_idx:
                cell = row[column_idx].strip()
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_number}: non-numeric value {cell!r} in column {header[column_idx]!r}"
                    ) from None
            label_raw = row[label_idx].strip()
            if label_raw not in ("0", "1"):
                raise ValidationError(
                    f"{path}: row {row_number}: label must be 0 or 1, got {label_raw!r}"
                )
            features.append(values)
            labels.append(int(label_raw))
    if not features:
        raise ValidationError(f"{path}: no data rows")
    return Dataset(
        features=np.asarray(features, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        feature_names=schema.feature_names,
    )


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldSplit:
    """One cross-validation cell: disjoint proper-train/calibration/test ids."""

    repetition_index: int
    fold_index: int
    proper_train_ids: np.ndarray
    calibration_ids: np.ndarray
    test_ids: np.ndarray
    seed: int

    @property
    def train_ids(self) -> np.ndarray:
        """Full training portion: proper-train plus calibration."""
        return np.sort(np.concatenate([self.proper_train_ids, self.calibration_ids]))


def stratified_holdout(labels, fraction: float, rng: np.random.Generator):
    """Split indices into (rest, held_out) with per-class proportions.

    The held-out part receives round(fraction * class size) members of each
    class; used for the calibration split inside each fold.
    """
    y = np.asarray(labels)
    held = []
    rest = []
    for value in np.unique(y):
        members = np.flatnonzero(y == value)
        members = members[rng.permutation(members.size)]
        take = int(round(fraction * members.size))
        held.append(members[:take])
        rest.append(members[take:])
    return np.sort(np.concatenate(rest)), np.sort(np.concatenate(held))


def repeated_stratified_kfold(
    dataset: Dataset,
    k: int = 10,
    repetitions: int = 10,
    calibration_fraction: float = 1.0 / 3.0,
    seed: int = 0,
) -> list[FoldSplit]:
    """Repeated stratified k-fold with a calibration share of each fold.

    Each repetition reshuffles and partitions every class into k test
    chunks (within one instance of proportional); inside each fold the
    training portion is split per class so calibration_fraction of it forms
    the calibration set.  Deterministic given the seed.
    """
    if k < 2:
        raise InfeasibleSplitError("k must be >= 2")
    if repetitions < 1:
        raise InfeasibleSplitError("repetitions must be >= 1")
    if not (0.0 < calibration_fraction < 1.0):
        raise InfeasibleSplitError("calibration_fraction must be in (0, 1)")
    y = dataset.labels
    for value in (0, 1):
        count = int(np.sum(y == value))
        if count < k:
            raise InfeasibleSplitError(
                f"class {value} has {count} members, fewer than k={k}"
            )
    rng = np.random.default_rng(seed)
    class_members = [np.flatnonzero(y == value) for value in (0, 1)]
    splits = []
    for repetition in range(repetitions):
        shuffled = [members[rng.permutation(members.size)] for members in class_members]
        chunks: list[list[np.ndarray]] = []
        for members in shuffled:
            base = members.size // k
            extra = members.size % k
            out = []
            cursor = 0
            for fold in range(k):
                size = base + (1 if fold < extra else 0)
                out.append(members[cursor : cursor + size])
                cursor += size
            chunks.append(out)
        for fold in range(k):
            test = np.sort(np.concatenate([chunks[0][fold], chunks[1][fold]]))
            calibration_parts = []
            proper_parts = []
            for cls in (0, 1):
                train_cls = np.concatenate(
                    [chunks[cls][f] for f in range(k) if f != fold]
                )
                take = int(round(calibration_fraction * train_cls.size))
                calibration_parts.append(train_cls[:take])
                proper_parts.append(train_cls[take:])
            calibration = np.sort(np.concatenate(calibration_parts))
            proper = np.sort(np.concatenate(proper_parts))
            for arr in (proper, calibration, test):
                arr.setflags(write=False)
            splits.append(
                FoldSplit(
                    repetition_index=repetition,
                    fold_index=fold,
                    proper_train_ids=proper,
                    calibration_ids=calibration,
                    test_ids=test,
                    seed=seed,
                )
            )
    return splits


def splits_to_manifest(splits: list[FoldSplit]) -> dict:
    """JSON-ready manifest for reproducibility audits."""
    return {
        "seed": splits[0].seed if splits else None,
        "folds": [
            {
                "repetition": s.repetition_index,
                "fold": s.fold_index,
                "proper_train_ids": s.proper_train_ids.tolist(),
                "calibration_ids": s.calibration_ids.tolist(),
                "test_ids": s.test_ids.tolist(),
            }
            for s in splits
        ],
    }


def write_split_manifest(path, splits: list[FoldSplit]) -> None:
    Path(path).write_text(json.dumps(splits_to_manifest(splits), sort_keys=True), encoding="utf-8")
