"""Counterfactual explanations for tabular classifiers, from LLM prompts and search baselines."""

from .augment import AugPolicy, ExperimentReport, build_augmented, label_cf, run_experiment
from .baselines import SearchBudget, cfnow_cf, dice_cfs, generate_baseline_batch, nearest_unlike_neighbor, nice_cf
from .cfmetrics import (CfBatch, CfFailure, CfPair, CfReport, Prediction, distance, diversity_profile,
                        evaluate_batch, plausibility, sparsity, validity)
from .datasets import heart_schema, load_heart, make_heart_like
from .errors import CfRuntimeError, DataError, LlmcfError
from .models import TrainedModel, classification_report, load_model, predict, save_model, train
from .schema import Bounds, Dataset, FeatureSchema, FeatureSpec, feature_bounds, load_csv, load_schema, split

__version__ = "0.1.0"
