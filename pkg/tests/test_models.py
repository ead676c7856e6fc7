import numpy as np
import pytest

import oracle
from conftest import cont_schema, mixed_schema
from llmcf import errors
from llmcf.models import (ClassReport, EncodingSpec, TrainedModel, auc, classification_report,
                          encode, load_model, predict, report_from_predictions, save_model, train)
from llmcf.schema import Bounds, make_dataset

KINDS = ["rf", "xgb", "svc", "nn"]


def _separable(n=40):
    s = cont_schema(1)
    xs = np.linspace(-5, 5, n)
    xs = xs[xs != 0]
    return make_dataset(s, [[float(v)] for v in xs], [int(v > 0) for v in xs])


def test_one_hot_and_scaling():
    s = mixed_schema()
    b = Bounds({"age": (0.0, 10.0), "bp": (3.0, 3.0), "chol": (0.0, 1.0)},
               {"sex": frozenset("FM"), "ecg": frozenset("ABC")})
    enc = EncodingSpec.from_bounds(s, b)
    v = encode((5.0, "M", 3.0, 2.0, "B"), enc)
    # continuous block first: age 0.5, bp degenerate -> 0, chol clipped to 1
    assert v.tolist() == [0.5, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]
    assert enc.width == 8


def test_encode_arity():
    s = mixed_schema()
    b = Bounds({"age": (0.0, 1.0), "bp": (0.0, 1.0), "chol": (0.0, 1.0)}, {})
    with pytest.raises(errors.ArityMismatch):
        encode((1.0, "F"), EncodingSpec.from_bounds(s, b))


@pytest.mark.parametrize("kind,hp", [("rf", None), ("xgb", None), ("svc", None),
                                     ("nn", {"epochs": 2000})])
def test_separable_training_accuracy(kind, hp):
    ds = _separable()
    # 40 rows give the network few minibatch steps per epoch at default settings
    m = train(kind, ds, hp, 0)
    labels, _ = m.predict_many(ds.rows)
    assert (labels == np.array(ds.labels)).mean() == 1.0
    # a probe deep in the negative region
    assert predict(m, (-4.2,))[0] == 0


@pytest.mark.parametrize("kind", KINDS)
def test_training_deterministic(kind):
    ds = _separable()
    probe = [(v,) for v in np.linspace(-6, 6, 25)]
    a = train(kind, ds, None, 5).predict_many(probe)[1]
    b = train(kind, ds, None, 5).predict_many(probe)[1]
    assert np.array_equal(a, b)


def test_single_class_and_empty():
    s = cont_schema(1)
    with pytest.raises(errors.SingleClass):
        train("rf", make_dataset(s, [[1.0], [2.0]], [1, 1]))
    with pytest.raises(errors.EmptyDataset):
        train("rf", make_dataset(s, [], []))
    with pytest.raises(errors.UnknownModelKind):
        train("knn", _separable())


class _Const:
    def __init__(self, v):
        self.v = v

    def scores(self, X):
        return np.full(len(X), self.v)


@pytest.mark.parametrize("score,label", [(0.7, 1), (0.5, 1), (0.49, 0)])
def test_threshold_convention(score, label):
    s = cont_schema(1)
    enc = EncodingSpec.from_bounds(s, Bounds({"f0": (0.0, 1.0)}, {}))
    m = TrainedModel("tree-ensemble", _Const(score), enc)
    assert predict(m, (0.3,)) == (label, score)


@pytest.mark.parametrize("kind", KINDS)
def test_save_load_round_trip(kind, tmp_path):
    s = mixed_schema()
    rng = np.random.default_rng(1)
    rows = [[float(rng.uniform(20, 80)), rng.choice(["F", "M"]), float(rng.uniform(90, 180)),
             float(rng.uniform(0, 400)), rng.choice(["A", "B", "C"])] for _ in range(60)]
    labels = [int(r[2] > 135) for r in rows]
    ds = make_dataset(s, rows, labels)
    m = train(kind, ds, None, 3)
    path = tmp_path / "m.json"
    save_model(m, path)
    m2 = load_model(path)
    assert np.array_equal(m.predict_many(ds.rows)[1], m2.predict_many(ds.rows)[1])
    assert m2.kind == m.kind and m2.schema == s


def test_load_model_rejects_other_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "something-else"}')
    with pytest.raises(errors.ModelFormatError):
        load_model(p)


def test_auc_examples():
    assert auc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc([0.9, 0.8, 0.3, 0.1], [0, 0, 1, 1]) == 0.0
    # oracle.auc_pairs([0.8, 0.6, 0.6, 0.2], [1, 0, 1, 0]) == 0.875
    assert auc([0.8, 0.6, 0.6, 0.2], [1, 0, 1, 0]) == 0.875
    with pytest.raises(errors.SingleClass):
        auc([0.1, 0.2], [1, 1])


def test_report_examples():
    r = report_from_predictions([1, 1, 1, 0, 0], [1, 1, 0, 1, 0])
    # oracle.confusion gives (0.6, 2/3, 2/3, 2/3)
    assert r.accuracy == pytest.approx(0.6, abs=1e-12)
    assert r.precision == pytest.approx(2 / 3, abs=1e-12)
    assert r.recall == pytest.approx(2 / 3, abs=1e-12)
    assert r.f1 == pytest.approx(2 / 3, abs=1e-12)
    perfect = report_from_predictions([1, 0, 1, 0], [1, 0, 1, 0], [0.9, 0.1, 0.8, 0.2])
    assert perfect == ClassReport(1.0, 1.0, 1.0, 1.0, 1.0)
    assert report_from_predictions([1, 1, 0, 0], [0, 0, 1, 1]).accuracy == 0.0


def test_report_matches_oracle_on_random_sets():
    rng = np.random.default_rng(0)
    for _ in range(50):
        y = rng.integers(0, 2, 30)
        p = rng.integers(0, 2, 30)
        r = report_from_predictions(y, p)
        assert (r.accuracy, r.precision, r.recall, r.f1) == pytest.approx(
            oracle.confusion(y.tolist(), p.tolist()), abs=1e-12)


def test_classification_report_on_heart(heart_split, heart_rf):
    _, te = heart_split
    r = classification_report(heart_rf, te)
    assert 0.5 < r.accuracy <= 1.0
    assert 0.5 < r.auc <= 1.0
