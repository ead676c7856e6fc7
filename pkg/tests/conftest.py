import logging
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from llmcf.datasets import load_heart  # noqa: E402
from llmcf.models import train  # noqa: E402
from llmcf.schema import FeatureSchema, FeatureSpec, feature_bounds, make_dataset, split  # noqa: E402

logging.getLogger("llmcf").setLevel(logging.ERROR)


def target_spec(name="y"):
    return FeatureSpec(name, "categorical", role="target", categories=("0", "1"))


def cont_schema(d, immutable=()):
    feats = tuple(FeatureSpec(f"f{j}", "continuous", mutable=j not in immutable) for j in range(d))
    return FeatureSchema(feats + (target_spec(),), "toy")


def mixed_schema():
    return FeatureSchema((
        FeatureSpec("age", "continuous", mutable=False),
        FeatureSpec("sex", "categorical", mutable=False, categories=("F", "M")),
        FeatureSpec("bp", "continuous"),
        FeatureSpec("chol", "continuous"),
        FeatureSpec("ecg", "categorical", categories=("A", "B", "C")),
        target_spec(),
    ), "mixed")


class FnModel:
    """Minimal model protocol over a python scoring function on schema rows."""

    def __init__(self, schema, score_fn, threshold=0.5):
        self.schema = schema
        self.score_fn = score_fn
        self.threshold = threshold
        self.calls = 0

    def predict_many(self, rows):
        self.calls += len(rows)
        scores = np.array([float(self.score_fn(r)) for r in rows])
        return (scores >= self.threshold).astype(int), scores


def threshold_model(schema, j=0, at=5.0):
    """Class 1 when feature j exceeds ``at``."""
    return FnModel(schema, lambda r: 1.0 if r[j] > at else 0.0)


@pytest.fixture
def threshold_data():
    schema = cont_schema(1)
    ds = make_dataset(schema, [[1.0], [3.0], [7.0], [9.0]], [0, 0, 1, 1])
    return schema, ds, threshold_model(schema)


@pytest.fixture(scope="session")
def heart():
    ds, _ = load_heart()
    return ds


@pytest.fixture(scope="session")
def heart_split(heart):
    return split(heart, 0.2, 42)


@pytest.fixture(scope="session")
def heart_rf(heart_split):
    tr, _ = heart_split
    return train("rf", tr, None, 42, feature_bounds(tr))


@pytest.fixture(scope="session")
def heart_csv(tmp_path_factory, heart):
    from llmcf.schema import write_csv
    path = tmp_path_factory.mktemp("data") / "heart.csv"
    write_csv(heart, path)
    return path
