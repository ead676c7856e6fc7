"""Trained-model wrapper, training entry point and model files.

Model file format (JSON, UTF-8)::

    {
      "format": "llmcf-model",
      "version": 1,
      "kind": "tree-ensemble" | "boosted-trees" | "linear" | "neural",
      "threshold": 0.5,
      "seed": 0,
      "training_accuracy": 0.97,
      "schema": {... same layout as the schema config ...},
      "encoding": {"scales": [[name, lo, hi], ...], "slots": [[name, [cats]], ...]},
      "estimator": {"hyperparams": {...}, ...kind-specific arrays...}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import errors
from ..schema import Dataset, Instance, feature_bounds, schema_from_config
from .encoding import EncodingSpec
from .linear import MLP, LinearSVM
from .trees import GradientBoosting, RandomForest

MODEL_FORMAT = "llmcf-model"
MODEL_VERSION = 1

ESTIMATORS = {
    "tree-ensemble": RandomForest,
    "boosted-trees": GradientBoosting,
    "linear": LinearSVM,
    "neural": MLP,
}

# short names matching the usual table rows
ALIASES = {
    "rf": "tree-ensemble",
    "xgb": "boosted-trees",
    "gbt": "boosted-trees",
    "svc": "linear",
    "svm": "linear",
    "nn": "neural",
    "mlp": "neural",
}

SHORT_NAMES = {"tree-ensemble": "RF", "boosted-trees": "XGB", "linear": "SVC", "neural": "NN"}


def canonical_kind(kind: str) -> str:
    k = ALIASES.get(kind.lower(), kind.lower())
    if k not in ESTIMATORS:
        raise errors.UnknownModelKind(
            f"unknown model kind {kind!r}; choose from {sorted(ESTIMATORS) + sorted(ALIASES)}")
    return k


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    estimator: object = field(repr=False, compare=False)
    encoding: EncodingSpec = field(repr=False)
    threshold: float = 0.5
    seed: int = 0
    training_accuracy: float = float("nan")

    @property
    def schema(self):
        return self.encoding.schema

    def scores(self, rows: Sequence[Instance]) -> np.ndarray:
        if len(rows) == 0:
            return np.zeros(0)
        X = self.encoding.encode_many(rows)
        return np.clip(self.estimator.scores(X), 0.0, 1.0)

    def predict_many(self, rows: Sequence[Instance]) -> tuple[np.ndarray, np.ndarray]:
        s = self.scores(rows)
        return (s >= self.threshold).astype(int), s


def predict(model: TrainedModel, instance: Instance) -> tuple[int, float]:
    labels, scores = model.predict_many([instance])
    return int(labels[0]), float(scores[0])


def train(kind: str, train_set: Dataset, hyperparams: dict | None = None, seed: int = 0,
          bounds=None) -> TrainedModel:
    """Fit a classifier of ``kind``; min-max scaling uses ``train_set`` bounds."""
    kind = canonical_kind(kind)
    if len(train_set) == 0:
        raise errors.EmptyDataset("cannot train on an empty dataset")
    counts = train_set.class_counts()
    if counts[0] == 0 or counts[1] == 0:
        raise errors.SingleClass(f"training set has a single class: {counts}")
    bounds = bounds or feature_bounds(train_set)
    encoding = EncodingSpec.from_bounds(train_set.schema, bounds)
    X = encoding.encode_many(train_set.rows)
    y = np.asarray(train_set.labels, dtype=float)
    try:
        estimator = ESTIMATORS[kind](**(hyperparams or {}))
    except TypeError as exc:
        raise errors.DataError(f"bad hyperparameters for {kind}: {exc}") from None
    estimator.fit(X, y, np.random.default_rng(seed))
    acc = float(((estimator.scores(X) >= 0.5).astype(int) == y).mean())
    return TrainedModel(kind, estimator, encoding, 0.5, seed, acc)


def model_to_config(model: TrainedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "threshold": model.threshold,
        "seed": model.seed,
        "training_accuracy": model.training_accuracy,
        "schema": model.schema.to_config(),
        "encoding": model.encoding.to_config(),
        "estimator": model.estimator.to_config(),
    }


def model_from_config(config: dict) -> TrainedModel:
    if config.get("format") != MODEL_FORMAT:
        raise errors.ModelFormatError("not an llmcf model file")
    if config.get("version") != MODEL_VERSION:
        raise errors.ModelFormatError(f"unsupported model file version {config.get('version')}")
    kind = canonical_kind(config["kind"])
    schema = schema_from_config(config["schema"])
    encoding = EncodingSpec.from_config(schema, config["encoding"])
    estimator = ESTIMATORS[kind].from_config(config["estimator"])
    return TrainedModel(kind, estimator, encoding, float(config["threshold"]),
                        int(config.get("seed", 0)), float(config.get("training_accuracy", "nan")))


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_config(model)))


def load_model(path) -> TrainedModel:
    try:
        config = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise errors.ModelFormatError(f"{path}: not JSON ({exc})") from None
    return model_from_config(config)
