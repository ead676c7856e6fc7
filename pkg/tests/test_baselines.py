import pytest

import oracle
from conftest import FnModel, cont_schema, threshold_model
from llmcf import errors
from llmcf.baselines import (SearchBudget, cfnow_cf, cfnow_revert, context_for, dice_cfs,
                             generate_baseline_batch, nearest_unlike_neighbor, nice_cf)
from llmcf.cfmetrics import validity
from llmcf.schema import feature_bounds, make_dataset


def test_nun_two_rows():
    s = cont_schema(1)
    ds = make_dataset(s, [[2.0], [8.0]], [0, 1])
    m = threshold_model(s)
    assert nearest_unlike_neighbor((2.0,), m, ds) == (8.0,)


def test_nun_tie_goes_to_lower_index():
    s = cont_schema(1)
    # rows 3 and 7 are both at distance 2 from x = 5 and predicted 1
    vals = [[0.0], [0.5], [1.0], [7.0], [0.2], [0.3], [0.4], [3.0], [0.1]]
    ds = make_dataset(s, vals, [0] * 9)
    m = FnModel(s, lambda r: 1.0 if r[0] in (7.0, 3.0) else 0.0)
    _, idx = nearest_unlike_neighbor((5.0,), m, ds, return_index=True)
    assert idx == 3


def test_nun_constant_model():
    s = cont_schema(1)
    ds = make_dataset(s, [[1.0], [2.0]], [0, 1])
    with pytest.raises(errors.NoOppositeClass):
        nearest_unlike_neighbor((1.0,), FnModel(s, lambda r: 0.0), ds)


def test_nice_threshold(threshold_data):
    _, ds, m = threshold_data
    pair = nice_cf((3.0,), m, ds)
    assert pair.counterfactual == (7.0,) and pair.is_valid


def test_nice_rejects_already_desired(threshold_data):
    _, ds, m = threshold_data
    with pytest.raises(errors.InvalidTarget):
        nice_cf((7.0,), m, ds, desired=1)


def test_nice_single_copy_suffices():
    s = cont_schema(2)
    ds = make_dataset(s, [[2.0, 1.0], [3.0, 2.0], [8.0, 9.0], [9.0, 8.0]], [0, 0, 1, 1])
    m = threshold_model(s, j=0)
    x = (2.0, 1.0)
    pair = nice_cf(x, m, ds)
    donor = nearest_unlike_neighbor(x, m, ds)
    # brute force over single-feature copies from the donor
    singles = [j for j in range(2)
               if m.predict_many([tuple(donor[k] if k == j else x[k] for k in range(2))])[0][0] == 1]
    assert singles == [0]
    assert sum(a != b for a, b in zip(x, pair.counterfactual)) == 1


def test_nice_respects_immutables():
    s = cont_schema(2, immutable=(1,))
    ds = make_dataset(s, [[2.0, 1.0], [8.0, 9.0]], [0, 1])
    m = FnModel(s, lambda r: 1.0 if r[0] + r[1] > 12 else 0.0)
    # only the immutable second feature could close the gap
    with pytest.raises(errors.NoFlip):
        nice_cf((2.0, 1.0), m, ds)


def test_cfnow_threshold(threshold_data):
    _, ds, m = threshold_data
    pair = cfnow_cf((3.0,), m, ds)
    assert pair.is_valid
    # the smallest grid value above the threshold, reached in one change
    ctx = context_for(m, ds)
    assert pair.counterfactual[0] == min(v for v in ctx.grids[0] if v > 5)


def test_cfnow_revert_drops_unneeded_changes():
    s = cont_schema(3)
    m = threshold_model(s, j=0)
    x, cur = (0.0, 0.0, 0.0), (9.0, 9.0, 9.0)
    grids = [[0.0, 9.0]] * 3
    assert oracle.min_sparsity_exhaustive(x, lambda c: m.predict_many([c])[0][0], grids, 1) == 1
    cf, pred, _ = cfnow_revert(x, cur, m, 1, [1, 2, 0], s)
    assert cf == (9.0, 0.0, 0.0) and pred.label == 1


def test_cfnow_constant_model():
    s = cont_schema(1)
    ds = make_dataset(s, [[1.0], [2.0], [3.0]], [0, 1, 0])
    with pytest.raises(errors.BudgetExhausted):
        cfnow_cf((1.0,), FnModel(s, lambda r: 0.0), ds, budget=SearchBudget(100))


def test_dice_threshold(threshold_data):
    s, ds, m = threshold_data
    b = feature_bounds(ds)
    out = dice_cfs((3.0,), m, s, b, k=3, budget=SearchBudget(500, seed=4))
    assert 1 <= len(out) <= 3
    assert all(p.is_valid for p in out)
    again = dice_cfs((3.0,), m, s, b, k=3, budget=SearchBudget(500, seed=4))
    assert again == out


def test_dice_constant_model():
    s = cont_schema(1)
    ds = make_dataset(s, [[1.0], [9.0]], [0, 1])
    assert dice_cfs((1.0,), FnModel(s, lambda r: 0.0), s, feature_bounds(ds),
                    budget=SearchBudget(200)) == []


@pytest.mark.parametrize("method", ["nice", "cfnow", "dice"])
def test_batch_records_failures(method):
    s = cont_schema(1)
    ds = make_dataset(s, [[1.0], [3.0], [7.0], [9.0]], [0, 0, 1, 1])
    m = threshold_model(s)
    batch = generate_baseline_batch(method, [(3.0,), (8.0,)], m, ds, budget=SearchBudget(300))
    assert batch.n_failures == 0 and validity(batch) == 1.0
    const = FnModel(s, lambda r: 0.0)
    failed = generate_baseline_batch(method, [(3.0,), (8.0,)], const, ds,
                                     budget=SearchBudget(100))
    assert len(failed) == 0 and failed.n_failures == 2


def test_unknown_method():
    s = cont_schema(1)
    ds = make_dataset(s, [[1.0], [9.0]], [0, 1])
    with pytest.raises(errors.DataError):
        generate_baseline_batch("wachter", [(1.0,)], threshold_model(s), ds)
