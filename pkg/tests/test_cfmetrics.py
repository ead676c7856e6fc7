import json

import pytest

from conftest import cont_schema, mixed_schema
from llmcf import errors
from llmcf.cfmetrics import (CfBatch, CfFailure, CfPair, CfReport, Prediction, distance,
                             diversity_profile, dumps_jsonl, evaluate_batch, loads_jsonl,
                             plausibility, render_reports, reports_to_csv, sparsity, validity)
from llmcf.schema import Bounds

P0, P1 = Prediction(0, 0.2), Prediction(1, 0.8)


def _bounds():
    return Bounds({"age": (20.0, 80.0), "bp": (0.0, 10.0), "chol": (0.0, 10.0)},
                  {"sex": frozenset("FM"), "ecg": frozenset("ABC")})


def _pair(x, cf, flipped=True):
    return CfPair(tuple(x), tuple(cf), P0, P1 if flipped else P0, "t")


X = (50.0, "F", 5.0, 5.0, "A")


def test_distance_examples():
    s, b = mixed_schema(), _bounds()
    assert distance(X, X, s, b) == 0.0
    # normalized continuous diffs (0.3, 0.4) -> 0.5, as the oracle computes
    assert distance(X, (50.0, "F", 8.0, 9.0, "A"), s, b) == pytest.approx(0.5, abs=1e-12)
    assert distance(X, (50.0, "F", 5.0, 5.0, "C"), s, b) == 1.0


def test_sparsity_examples():
    s = mixed_schema()
    two = _pair(X, (50.0, "F", 6.0, 5.0, "B"))
    four = _pair(X, (51.0, "M", 6.0, 5.0, "B"))
    assert sparsity(CfBatch.of(s, [two, four])) == 3.0
    assert sparsity(CfBatch.of(s, [_pair(X, X)] * 3)) == 0.0
    all5 = _pair(X, (51.0, "M", 6.0, 6.0, "B"))
    assert sparsity(CfBatch.of(s, [all5, all5])) == 5.0


def test_sparsity_epsilon():
    s = cont_schema(1)
    b = Bounds({"f0": (0.0, 1.0)}, {})
    tiny = CfBatch.of(s, [CfPair((0.5,), (0.5 + 1e-9,), P0, P1, "t")])
    assert sparsity(tiny, bounds=b) == 0.0
    assert sparsity(CfBatch.of(s, [CfPair((0.5,), (0.6,), P0, P1, "t")]), bounds=b) == 1.0


def test_validity_examples():
    s = mixed_schema()
    ok, bad = _pair(X, X, True), _pair(X, X, False)
    assert validity(CfBatch.of(s, [ok] * 4)) == 1.0
    assert validity(CfBatch.of(s, [bad] * 4)) == 0.0
    assert validity(CfBatch.of(s, [ok, ok, ok, bad])) == 0.75


def test_plausibility_examples():
    s, b = mixed_schema(), _bounds()
    inside = _pair(X, (60.0, "F", 5.0, 5.0, "B"))
    old = _pair(X, (81.0, "F", 5.0, 5.0, "A"))
    assert plausibility(CfBatch.of(s, [inside, inside]), b) == 1.0
    assert plausibility(CfBatch.of(s, [old]), b) == 0.0
    assert plausibility(CfBatch.of(s, [inside, inside, old]), b) == pytest.approx(2 / 3, abs=1e-12)


def test_diversity_examples():
    s, b = mixed_schema(), _bounds()
    same = diversity_profile(CfBatch.of(s, [_pair(X, X)] * 3), s, b)
    assert same == {"bp": 0.0, "chol": 0.0, "ecg": 0.0}
    lo = _pair(X, (50.0, "F", 0.0, 5.0, "A"))
    hi = _pair(X, (50.0, "F", 10.0, 5.0, "B"))
    prof = diversity_profile(CfBatch.of(s, [lo, hi]), s, b)
    assert prof["bp"] == 0.5 and prof["ecg"] == 0.5


def test_empty_batch_errors():
    s = mixed_schema()
    empty = CfBatch.of(s, [], [CfFailure(X, P0, "t", 1, "boom")])
    for fn in (validity, sparsity):
        with pytest.raises(errors.EmptyBatch):
            fn(empty)
    with pytest.raises(errors.EmptyBatch):
        evaluate_batch(empty, bounds=_bounds())


def test_failures_excluded_from_norm():
    s = mixed_schema()
    b = CfBatch.of(s, [_pair(X, X)], [CfFailure(X, P0, "t", 2, "x")] * 3)
    assert len(b) == 1 and b.n_failures == 3
    r = evaluate_batch(b, bounds=_bounds())
    assert r.failure_rate == 0.75 and r.n_pairs == 1


def test_evaluate_identity_batch(heart_split, heart_rf):
    tr, _ = heart_split
    rows = tr.rows[:20]
    labels, scores = heart_rf.predict_many(rows)
    pairs = [CfPair(r, r, Prediction(int(l), float(sc)), Prediction(int(l), float(sc)), "id")
             for r, l, sc in zip(rows, labels, scores)]
    from llmcf.schema import feature_bounds
    rep = evaluate_batch(CfBatch.of(tr.schema, pairs), heart_rf, bounds=feature_bounds(tr))
    assert (rep.validity, rep.mean_distance, rep.mean_sparsity, rep.plausibility) == (0, 0, 0, 1)


def test_evaluate_detects_tampering(heart_split, heart_rf):
    from llmcf.schema import feature_bounds
    tr, _ = heart_split
    x = tr.rows[0]
    l, sc = heart_rf.predict_many([x])
    fp = Prediction(int(l[0]), float(sc[0]))
    wrong = CfPair(x, x, fp, Prediction(1 - fp.label, 0.5), "t")
    with pytest.raises(errors.PredictionMismatch):
        evaluate_batch(CfBatch.of(tr.schema, [wrong]), heart_rf, bounds=feature_bounds(tr))
    moved = list(x)
    moved[0] = x[0] + 1  # Age is immutable
    with pytest.raises(errors.ImmutableViolation):
        evaluate_batch(CfBatch.of(tr.schema, [CfPair(x, tuple(moved), fp, fp, "t")]),
                       bounds=feature_bounds(tr))


def test_jsonl_round_trip():
    s = mixed_schema()
    b = CfBatch.of(s, [_pair(X, (50.0, "F", 6.5, 5.0, "B"))], [CfFailure(X, P0, "t", 4, "no flip")])
    text = dumps_jsonl(b)
    assert len(text.splitlines()) == 2
    assert json.loads(text.splitlines()[1])["counterfactual"] is None
    back = loads_jsonl(text, s)
    assert dumps_jsonl(back) == text
    with pytest.raises(errors.DataError):
        loads_jsonl('{"factual": {}}\n', s)


def test_report_outputs():
    s = mixed_schema()
    r = evaluate_batch(CfBatch.of(s, [_pair(X, (50.0, "F", 6.0, 5.0, "A"))]), bounds=_bounds())
    assert CfReport.from_json(json.loads(json.dumps(r.to_json()))) == r
    csv_text = reports_to_csv([r])
    assert csv_text.splitlines()[0].startswith("method,n_pairs")
    assert "plausibility_pct" in csv_text and ",100.0," in csv_text
    assert "| validity |" in render_reports([r])
