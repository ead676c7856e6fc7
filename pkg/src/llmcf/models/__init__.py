from .base import (
    ALIASES,
    ESTIMATORS,
    SHORT_NAMES,
    TrainedModel,
    canonical_kind,
    load_model,
    model_from_config,
    model_to_config,
    predict,
    save_model,
    train,
)
from .encoding import EncodingSpec, encode
from .linear import MLP, LinearSVM
from .metrics import REPORT_FIELDS, ClassReport, auc, classification_report, report_from_predictions
from .trees import GradientBoosting, RandomForest, Tree, grow_tree

__all__ = [
    "ALIASES", "ESTIMATORS", "SHORT_NAMES", "TrainedModel", "canonical_kind", "load_model",
    "model_from_config", "model_to_config", "predict", "save_model", "train",
    "EncodingSpec", "encode", "MLP", "LinearSVM", "REPORT_FIELDS", "ClassReport", "auc",
    "classification_report", "report_from_predictions", "GradientBoosting", "RandomForest",
    "Tree", "grow_tree",
]
